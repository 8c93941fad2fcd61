#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "aptest/allocation_engine.hpp"
#include "aptest/errors.hpp"
#include "aptest/outcome_models.hpp"
#include "aptest/test_statistics.hpp"

namespace aptest {

/// Pooled estimate sits on the boundary of the parameter space.
class CalibrationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Null configuration for Monte Carlo calibration.
class NullSpec {
public:
    /// Throws ConfigError unless both arms of `model` share their parameter.
    NullSpec(DesignConfig design, OutcomeModel model, PriorSpec prior, long replicates = 1'000'000,
             std::uint64_t seed = 0);

    const DesignConfig& design() const noexcept { return design_; }
    const OutcomeModel& model() const noexcept { return model_; }
    const PriorSpec& prior() const noexcept { return prior_; }
    long replicates() const noexcept { return replicates_; }
    std::uint64_t seed() const noexcept { return seed_; }

    std::string describe() const;

private:
    DesignConfig design_;
    OutcomeModel model_;
    PriorSpec prior_;
    long replicates_;
    std::uint64_t seed_;
};

/// Sorted null samples of one statistic.
class NullDistribution {
public:
    NullDistribution(std::string test_name, std::vector<double> samples);

    const std::string& test_name() const noexcept { return test_name_; }
    std::span<const double> samples() const noexcept { return samples_; }
    long replicates() const noexcept { return static_cast<long>(samples_.size()); }

    /// Empirical P(statistic > q).
    double tail_probability(double q) const;
    double quantile_sample(double p) const;

private:
    std::string test_name_;
    std::vector<double> samples_;
};

struct CriticalValue {
    double q_alpha = 0.0;
    double achieved_alpha = 0.0;
    double alpha_nominal = 0.05;
    /// The threshold is the largest observed value, so the test never rejects
    /// under the null (and, for a bounded discrete statistic, never at all).
    bool degenerate_max = false;
    long replicates = 0;
};

/// Runs `null.replicates()` trials under the null and records every test's
/// statistic on the shared trajectories.
std::map<std::string, NullDistribution> simulate_null_distribution(const NullSpec& null,
                                                                   std::span<const TestSpec> tests,
                                                                   unsigned threads = 0);

/// Smallest observed value q with empirical P(statistic > q) <= alpha.
CriticalValue critical_value(const NullDistribution& dist, double alpha);

struct PooledOptions {
    /// Replace a pooled proportion of 0 or 1 by (s + 0.5) / (n + 1).
    bool continuity_correction = false;
};

/// Equal-arms null model at the arm-agnostic estimate from the observed data:
/// pooled rate n / total time, pooled proportion, or pooled mean (normal
/// arms keep their known SDs).
OutcomeModel pooled_null_model(const TrialTrajectory& observed, Direction direction,
                               const PooledOptions& options = {});

std::map<std::string, CriticalValue> calibrate_under_pooled(
    const TrialTrajectory& observed, const DesignConfig& design, const PriorSpec& prior,
    Direction direction, std::span<const TestSpec> tests, double alpha, long replicates,
    std::uint64_t seed, unsigned threads = 0, const PooledOptions& options = {});

/// One row of a null-sensitivity sweep: the critical value calibrated under
/// `calibrated_at` and its empirical type I error under `evaluated_at`.
struct SensitivityCell {
    std::string test_name;
    OutcomeModel calibrated_at;
    OutcomeModel evaluated_at;
    CriticalValue critical;
    double type1_error = 0.0;
};

/// Calibrates every test under each null in `nulls` and cross-evaluates the
/// thresholds under the other nulls.
std::vector<SensitivityCell> null_sensitivity_sweep(const DesignConfig& design,
                                                    const PriorSpec& prior,
                                                    std::span<const OutcomeModel> nulls,
                                                    std::span<const TestSpec> tests, double alpha,
                                                    long replicates, std::uint64_t seed,
                                                    unsigned threads = 0);

}  // namespace aptest
