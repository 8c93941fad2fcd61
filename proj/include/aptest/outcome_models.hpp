#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include "aptest/random.hpp"

namespace aptest {

enum class Arm : std::uint8_t { Control = 0, Experimental = 1 };

constexpr std::size_t index_of(Arm arm) noexcept { return static_cast<std::size_t>(arm); }
constexpr Arm other(Arm arm) noexcept {
    return arm == Arm::Control ? Arm::Experimental : Arm::Control;
}

/// Which direction of the arm parameter (rate, probability, mean) is beneficial.
/// For the exponential family the parameter is the event rate, so a larger
/// rate means a shorter time to event.
enum class Direction : std::uint8_t { LargerIsBetter, SmallerIsBetter };

enum class FamilyKind : std::uint8_t { Exponential, Bernoulli, Normal };

std::string to_string(FamilyKind kind);
std::string to_string(Direction direction);

struct Exponential {
    double rate_control;
    double rate_experimental;
};

struct Bernoulli {
    double p_control;
    double p_experimental;
};

struct NormalKnownVar {
    double mean_control;
    double mean_experimental;
    double sd_control;
    double sd_experimental;
};

/// Data-generating truth for a two-arm trial. Validated on construction.
class OutcomeModel {
public:
    using Family = std::variant<Exponential, Bernoulli, NormalKnownVar>;

    OutcomeModel(Family family, Direction direction);

    static OutcomeModel exponential(double rate_control, double rate_experimental,
                                    Direction direction = Direction::LargerIsBetter);
    static OutcomeModel bernoulli(double p_control, double p_experimental,
                                  Direction direction = Direction::LargerIsBetter);
    static OutcomeModel normal(double mean_control, double mean_experimental, double sd_control,
                               double sd_experimental,
                               Direction direction = Direction::LargerIsBetter);

    const Family& family() const noexcept { return family_; }
    FamilyKind kind() const noexcept;
    Direction direction() const noexcept { return direction_; }

    /// Rate, success probability or mean of the arm.
    double parameter(Arm arm) const noexcept;
    /// Known outcome SD for the normal family; 1 for the others.
    double known_sd(Arm arm) const noexcept;
    /// Expected outcome of one subject on the arm.
    double expected_outcome(Arm arm) const noexcept;

    /// True when both arms share the rate, probability or mean (a null
    /// configuration). Normal arms may still differ in their known SDs.
    bool arms_equal() const noexcept;
    /// The strictly better arm, or nullopt when the arms are equal.
    std::optional<Arm> better_arm() const noexcept;

    OutcomeModel with_arms_swapped() const;
    /// Copy with both arms set to the control arm's parameters.
    OutcomeModel null_at_control() const;

    /// Compact text form, e.g. "exponential(1,1.5)".
    std::string describe() const;

private:
    Family family_;
    Direction direction_;
};

struct GammaPrior {
    double shape;
    double rate;
};

struct BetaPrior {
    double alpha;
    double beta;
};

struct NormalPrior {
    double mean;
    double variance;
};

/// Conjugate prior applied identically to both arms.
class PriorSpec {
public:
    using Kind = std::variant<GammaPrior, BetaPrior, NormalPrior>;

    static PriorSpec gamma(double shape, double rate);
    static PriorSpec beta(double alpha, double beta);
    static PriorSpec normal(double mean, double variance);

    /// Gamma prior with rate 0. The posterior is proper only once the arm has
    /// data; intended for the scale-invariance checks.
    static PriorSpec improper_gamma_for_testing(double shape);

    /// Default priors: Gamma(1, 0.001), Beta(1, 1), Normal(0, 1e6).
    static PriorSpec default_for(FamilyKind kind);

    const Kind& kind() const noexcept { return kind_; }
    FamilyKind family() const noexcept;
    bool improper() const noexcept { return improper_; }
    std::string describe() const;

private:
    explicit PriorSpec(Kind kind, bool improper = false) : kind_(kind), improper_(improper) {}

    Kind kind_;
    bool improper_;
};

/// Sufficient statistics for one arm.
struct ArmPosterior {
    int n = 0;
    /// Total time (exponential), number of successes (Bernoulli) or sum of outcomes (normal).
    double sum = 0.0;
    /// Known outcome SD; only read by the normal family.
    double noise_sd = 1.0;

    friend bool operator==(const ArmPosterior&, const ArmPosterior&) = default;
};

class PosteriorState {
public:
    explicit PosteriorState(FamilyKind kind) : kind_(kind) {}

    /// Empty state with the model's known SDs attached.
    static PosteriorState for_model(const OutcomeModel& model);

    FamilyKind family() const noexcept { return kind_; }
    const ArmPosterior& operator[](Arm arm) const noexcept { return arms_[index_of(arm)]; }

    /// Adds one observation; throws InputError for values outside the family's support.
    void observe(Arm arm, double outcome);

    friend bool operator==(const PosteriorState&, const PosteriorState&) = default;

private:
    FamilyKind kind_;
    std::array<ArmPosterior, 2> arms_{};
};

double sample_outcome(const OutcomeModel& model, Arm arm, Rng& rng);

PosteriorState update_posterior(PosteriorState state, Arm arm, double outcome);

/// P[arm parameter of `experimental` is better than that of `control` | data].
/// Closed form for Gamma posteriors with an integer shape, Beta posteriors with
/// an integer first parameter, and all normal posteriors; adaptive quadrature
/// otherwise. The result is clamped to the open interval (0, 1).
double superiority_probability(const ArmPosterior& experimental, const ArmPosterior& control,
                               const PriorSpec& prior, Direction direction);

/// The same probability computed by adaptive quadrature for every family.
/// Throws NumericalError when the error estimate exceeds 1e-10.
double superiority_probability_quadrature(const ArmPosterior& experimental,
                                          const ArmPosterior& control, const PriorSpec& prior,
                                          Direction direction);

}  // namespace aptest
