#include "aptest/allocation_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "aptest/errors.hpp"
#include "aptest/format.hpp"

namespace aptest {

std::string to_string(DesignKind kind) {
    switch (kind) {
        case DesignKind::EqualRandomization: return "er";
        case DesignKind::StandardBrar: return "standard_brar";
        case DesignKind::TunedBrar: return "tuned_brar";
    }
    return "unknown";
}

DesignKind design_kind_from_string(const std::string& name) {
    if (name == "er" || name == "equal_randomization") return DesignKind::EqualRandomization;
    if (name == "standard_brar" || name == "standard") return DesignKind::StandardBrar;
    if (name == "tuned_brar" || name == "tuned") return DesignKind::TunedBrar;
    throw ConfigError("unknown design kind '" + name + "'");
}

DesignConfig::DesignConfig(int burn_in, int block_size, int num_blocks, int t_min, DesignKind kind,
                           int permuted_block_size)
    : burn_in_(burn_in),
      block_size_(block_size),
      num_blocks_(num_blocks),
      t_min_(t_min),
      kind_(kind),
      permuted_block_size_(permuted_block_size) {
    if (burn_in_ < 2 || burn_in_ % 2 != 0)
        throw ConfigError("burn_in must be even and at least 2, got " + std::to_string(burn_in_));
    if (block_size_ < 1) throw ConfigError("block_size must be at least 1");
    if (num_blocks_ < 0) throw ConfigError("number of blocks must be non-negative");
    if (t_min_ < 1 || t_min_ > num_blocks_ + 1)
        throw ConfigError("t_min must lie in [1, T+1] = [1, " + std::to_string(num_blocks_ + 1) +
                          "], got " + std::to_string(t_min_));
    if (permuted_block_size_ < 2 || permuted_block_size_ % 2 != 0)
        throw ConfigError("permuted block size must be even and at least 2");
}

DesignConfig DesignConfig::from_sample_size(int total_n, int burn_in, int block_size,
                                            DesignKind kind, int t_min, int permuted_block_size) {
    if (total_n < burn_in)
        throw ConfigError("total_n (" + std::to_string(total_n) + ") is smaller than burn_in (" +
                          std::to_string(burn_in) + ")");
    if (block_size < 1) throw ConfigError("block_size must be at least 1");
    const int adaptive = total_n - burn_in;
    if (adaptive % block_size != 0)
        throw ConfigError("total_n - burn_in = " + std::to_string(adaptive) +
                          " is not a multiple of block_size " + std::to_string(block_size));
    return DesignConfig(burn_in, block_size, adaptive / block_size, t_min, kind,
                        permuted_block_size);
}

DesignConfig DesignConfig::with_kind(DesignKind kind) const {
    DesignConfig copy = *this;
    copy.kind_ = kind;
    return copy;
}

DesignConfig DesignConfig::with_t_min(int t_min) const {
    return DesignConfig(burn_in_, block_size_, num_blocks_, t_min, kind_, permuted_block_size_);
}

std::string DesignConfig::describe() const {
    return to_string(kind_) + " N=" + std::to_string(total_n()) + " B'=" + std::to_string(burn_in_) +
           " B=" + std::to_string(block_size_) + " T=" + std::to_string(num_blocks_) +
           " t_min=" + std::to_string(t_min_);
}

double TrialTrajectory::fraction_on(Arm arm) const {
    if (allocations.empty()) return 0.0;
    const auto count = std::count(allocations.begin(), allocations.end(), arm);
    return static_cast<double>(count) / static_cast<double>(allocations.size());
}

double brar_probability(const ArmPosterior& experimental, const ArmPosterior& control,
                        const PriorSpec& prior, Direction direction) {
    return superiority_probability(experimental, control, prior, direction);
}

double tune_probability(double pi, int t, int num_blocks) {
    if (num_blocks <= 0 || t == num_blocks) return pi;
    const double c = 0.1 + 0.9 * (static_cast<double>(t) / static_cast<double>(num_blocks));
    const double a = std::pow(pi, c);
    const double b = std::pow(1.0 - pi, c);
    return a / (a + b);
}

std::vector<Arm> permuted_block_sequence(int n, int block, Rng& rng) {
    if (block < 2 || block % 2 != 0)
        throw ConfigError("permuted block size must be even and at least 2, got " +
                          std::to_string(block));
    if (n < 1) throw ConfigError("permuted block sequence needs n >= 1");
    std::vector<Arm> seq;
    seq.reserve(static_cast<std::size_t>(n));
    for (int start = 0; start < n; start += block) {
        const int size = std::min(block, n - start);
        int on_experimental = size / 2;
        if (size % 2 != 0 && uniform01(rng) < 0.5) ++on_experimental;
        const auto first = seq.size();
        seq.insert(seq.end(), static_cast<std::size_t>(on_experimental), Arm::Experimental);
        seq.insert(seq.end(), static_cast<std::size_t>(size - on_experimental), Arm::Control);
        std::shuffle(seq.begin() + static_cast<std::ptrdiff_t>(first), seq.end(), rng);
    }
    return seq;
}

double allocation_probability(const DesignConfig& design, const PosteriorState& state,
                              const PriorSpec& prior, Direction direction, int t) {
    const double pi =
        brar_probability(state[Arm::Experimental], state[Arm::Control], prior, direction);
    if (design.kind() == DesignKind::TunedBrar) return tune_probability(pi, t, design.num_blocks());
    return pi;
}

namespace {

Arm flip_if(Arm arm, bool mirrored) { return mirrored ? other(arm) : arm; }

void record_probability(TrialTrajectory& traj, const DesignConfig& design,
                        const PosteriorState& state, const PriorSpec& prior, Direction direction,
                        int t, const TrialOptions& options) {
    traj.alloc_probs.push_back(allocation_probability(design, state, prior, direction, t));
    if (options.record_block_posteriors) traj.block_posteriors.push_back(state);
}

}  // namespace

TrialTrajectory simulate_trial(const DesignConfig& design, const OutcomeModel& model,
                               const PriorSpec& prior, Rng& rng, const TrialOptions& options) {
    if (prior.family() != model.kind())
        throw ConfigError("prior " + prior.describe() + " does not match outcome family " +
                          to_string(model.kind()));
    const int n_total = design.total_n();
    const int num_blocks = design.num_blocks();
    const Direction direction = model.direction();

    TrialTrajectory traj;
    traj.burn_in = design.burn_in();
    traj.block_size = design.block_size();
    traj.num_blocks = num_blocks;
    traj.allocations.reserve(static_cast<std::size_t>(n_total));
    traj.outcomes.reserve(static_cast<std::size_t>(n_total));
    traj.alloc_probs.reserve(static_cast<std::size_t>(num_blocks + 1));

    PosteriorState state = PosteriorState::for_model(model);
    auto enrol = [&](Arm arm) {
        const double y = sample_outcome(model, arm, rng);
        traj.allocations.push_back(arm);
        traj.outcomes.push_back(y);
        state.observe(arm, y);
    };

    if (design.kind() == DesignKind::EqualRandomization) {
        const auto seq = permuted_block_sequence(n_total, design.permuted_block_size(), rng);
        std::size_t next = 0;
        for (int i = 0; i < design.burn_in(); ++i) enrol(flip_if(seq[next++], options.mirrored_labels));
        for (int t = 1; t <= num_blocks; ++t) {
            if (options.er_probabilities)
                record_probability(traj, design, state, prior, direction, t, options);
            else
                traj.alloc_probs.push_back(std::numeric_limits<double>::quiet_NaN());
            for (int i = 0; i < design.block_size(); ++i)
                enrol(flip_if(seq[next++], options.mirrored_labels));
        }
    } else {
        // Burn-in: exactly half per arm in random order.
        std::vector<Arm> burn(static_cast<std::size_t>(design.burn_in()), Arm::Control);
        std::fill(burn.begin() + design.burn_in() / 2, burn.end(), Arm::Experimental);
        std::shuffle(burn.begin(), burn.end(), rng);
        for (Arm arm : burn) enrol(flip_if(arm, options.mirrored_labels));

        for (int t = 1; t <= num_blocks; ++t) {
            record_probability(traj, design, state, prior, direction, t, options);
            const double pi = traj.alloc_probs.back();
            for (int i = 0; i < design.block_size(); ++i) {
                const double u = uniform01(rng);
                // Mirrored runs see π' = 1 - π for their experimental arm.
                const Arm arm = options.mirrored_labels
                                    ? (u < 1.0 - pi ? Arm::Control : Arm::Experimental)
                                    : (u < pi ? Arm::Experimental : Arm::Control);
                enrol(arm);
            }
        }
    }
    if (design.kind() != DesignKind::EqualRandomization || options.er_probabilities)
        record_probability(traj, design, state, prior, direction, num_blocks + 1, options);
    else
        traj.alloc_probs.push_back(std::numeric_limits<double>::quiet_NaN());
    traj.final_posterior = state;
    return traj;
}

std::vector<double> replay_allocation_probabilities(const DesignConfig& design,
                                                    const PriorSpec& prior, Direction direction,
                                                    PosteriorState initial,
                                                    std::span<const Arm> allocations,
                                                    std::span<const double> outcomes) {
    if (allocations.size() != outcomes.size())
        throw InputError("allocations and outcomes differ in length");
    const auto burn = static_cast<std::size_t>(design.burn_in());
    const auto block = static_cast<std::size_t>(design.block_size());
    if (allocations.size() < burn || (allocations.size() - burn) % block != 0)
        throw InputError("observed data must cover the burn-in and whole blocks");
    const int complete = static_cast<int>((allocations.size() - burn) / block);
    if (complete > design.num_blocks())
        throw InputError("observed data has more blocks than the design");

    std::vector<double> probs;
    probs.reserve(static_cast<std::size_t>(complete + 1));
    std::size_t next = 0;
    for (; next < burn; ++next) initial.observe(allocations[next], outcomes[next]);
    for (int t = 1; t <= complete + 1; ++t) {
        probs.push_back(allocation_probability(design, initial, prior, direction, t));
        if (t > complete) break;
        for (std::size_t i = 0; i < block; ++i, ++next)
            initial.observe(allocations[next], outcomes[next]);
    }
    return probs;
}

void write_trajectory_header(std::ostream& out) {
    out << "replicate\tt\tpi_t1\tn1\tn0\tsuffstat1\tsuffstat0\n";
}

void write_trajectory_rows(std::ostream& out, long replicate, const TrialTrajectory& traj) {
    // Sufficient statistics of the data seen before each block.
    std::array<int, 2> n{0, 0};
    std::array<double, 2> sum{0.0, 0.0};
    std::size_t next = 0;
    auto take = [&](std::size_t count) {
        for (std::size_t i = 0; i < count; ++i, ++next) {
            const auto a = index_of(traj.allocations[next]);
            n[a] += 1;
            sum[a] += traj.outcomes[next];
        }
    };
    take(static_cast<std::size_t>(traj.burn_in));
    for (int t = 1; t <= traj.num_blocks + 1; ++t) {
        out << replicate << '\t' << t << '\t' << format_double(traj.pi(t)) << '\t' << n[1] << '\t'
            << n[0] << '\t' << format_double(sum[1]) << '\t' << format_double(sum[0]) << '\n';
        if (t <= traj.num_blocks) take(static_cast<std::size_t>(traj.block_size));
    }
}

}  // namespace aptest
