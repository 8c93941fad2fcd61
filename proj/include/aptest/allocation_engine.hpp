#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "aptest/outcome_models.hpp"
#include "aptest/random.hpp"

namespace aptest {

enum class DesignKind : std::uint8_t { EqualRandomization, StandardBrar, TunedBrar };

std::string to_string(DesignKind kind);
DesignKind design_kind_from_string(const std::string& name);

/// Trial layout: a burn-in block of `burn_in` subjects (block 0) followed by
/// `num_blocks` adaptive blocks of `block_size` subjects, so
/// total_n = burn_in + block_size * num_blocks.
class DesignConfig {
public:
    /// Resolves the number of blocks from the sample size; throws ConfigError
    /// when the layout does not divide evenly or an invariant fails.
    static DesignConfig from_sample_size(int total_n, int burn_in, int block_size, DesignKind kind,
                                         int t_min = 1, int permuted_block_size = 8);

    int total_n() const noexcept { return burn_in_ + block_size_ * num_blocks_; }
    int burn_in() const noexcept { return burn_in_; }
    int block_size() const noexcept { return block_size_; }
    int num_blocks() const noexcept { return num_blocks_; }
    int t_min() const noexcept { return t_min_; }
    DesignKind kind() const noexcept { return kind_; }
    int permuted_block_size() const noexcept { return permuted_block_size_; }

    DesignConfig with_kind(DesignKind kind) const;
    DesignConfig with_t_min(int t_min) const;

    std::string describe() const;

private:
    DesignConfig(int burn_in, int block_size, int num_blocks, int t_min, DesignKind kind,
                 int permuted_block_size);

    int burn_in_;
    int block_size_;
    int num_blocks_;
    int t_min_;
    DesignKind kind_;
    int permuted_block_size_;
};

/// One simulated trial. Subjects are stored flat in allocation order: the
/// burn-in first, then blocks 1..T.
struct TrialTrajectory {
    int burn_in = 0;
    int block_size = 0;
    int num_blocks = 0;
    std::vector<Arm> allocations;
    std::vector<double> outcomes;
    /// π_{t,1} for t = 1..T+1, stored at index t-1. The last entry is the
    /// hypothetical block computed from all trial data.
    std::vector<double> alloc_probs;
    PosteriorState final_posterior{FamilyKind::Exponential};
    /// When requested: the state from which π_{t,1} was computed, index t-1.
    std::vector<PosteriorState> block_posteriors;

    double pi(int t) const { return alloc_probs.at(static_cast<std::size_t>(t - 1)); }
    /// Fraction of subjects on `arm`.
    double fraction_on(Arm arm) const;
};

struct TrialOptions {
    bool record_block_posteriors = false;
    /// Inverts every arm label the random stream produces. Paired with a
    /// model whose arms are swapped, this reproduces the mirrored trial.
    bool mirrored_labels = false;
    /// ER trials skip the posterior probabilities when false (alloc_probs
    /// then holds NaN); only the comparator tests can be applied.
    bool er_probabilities = true;
};

/// Posterior probability that the experimental arm is better (untuned BRAR).
double brar_probability(const ArmPosterior& experimental, const ArmPosterior& control,
                        const PriorSpec& prior, Direction direction);

/// Regularised probability π^c / (π^c + (1-π)^c) with c = 0.1 + 0.9 t/T.
double tune_probability(double pi, int t, int num_blocks);

/// Permuted-block allocation of n subjects with balanced blocks of size
/// `block`; the leftover block is as balanced as its size allows.
std::vector<Arm> permuted_block_sequence(int n, int block, Rng& rng);

/// π_{t,1} for block t given the data observed before it, with tuning applied
/// for TunedBrar designs.
double allocation_probability(const DesignConfig& design, const PosteriorState& state,
                              const PriorSpec& prior, Direction direction, int t);

TrialTrajectory simulate_trial(const DesignConfig& design, const OutcomeModel& model,
                               const PriorSpec& prior, Rng& rng, const TrialOptions& options = {});

/// Recomputes π_{1..k+1,1} from observed allocations and outcomes covering
/// the burn-in and the first k blocks. `initial` supplies the family and
/// known SDs.
std::vector<double> replay_allocation_probabilities(const DesignConfig& design,
                                                    const PriorSpec& prior, Direction direction,
                                                    PosteriorState initial,
                                                    std::span<const Arm> allocations,
                                                    std::span<const double> outcomes);

/// Writes one row per block t = 1..T+1:
/// replicate, t, pi_t1, n1, n0, suffstat1, suffstat0 (tab separated).
void write_trajectory_rows(std::ostream& out, long replicate, const TrialTrajectory& traj);
void write_trajectory_header(std::ostream& out);

}  // namespace aptest
