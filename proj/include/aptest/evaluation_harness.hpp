#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aptest/allocation_engine.hpp"
#include "aptest/calibration.hpp"
#include "aptest/outcome_models.hpp"
#include "aptest/test_statistics.hpp"

namespace aptest {

enum class EvalMode : std::uint8_t { Nominal, Calibrated };

std::string to_string(EvalMode mode);
EvalMode eval_mode_from_string(const std::string& name);

struct ScenarioSpec {
    std::string name;
    /// Adaptive designs evaluated on the shared layout; every test runs on each.
    std::vector<DesignConfig> designs;
    PriorSpec prior = PriorSpec::default_for(FamilyKind::Exponential);
    OutcomeModel null_model = OutcomeModel::exponential(1.0, 1.0);
    /// Alternatives share the null's control arm.
    std::vector<OutcomeModel> alternatives;
    double alpha = 0.05;
    std::vector<TestSpec> tests;
    /// Adds a permuted-block ER cell analysed with the family's comparator test.
    bool er_comparator = true;
    std::vector<EvalMode> modes{EvalMode::Calibrated};
    long replicates_eval = 100'000;
    long replicates_calib = 1'000'000;
    std::uint64_t seed = 0;
    /// Figure-data file the rows also go to ("fig1".."fig4"), if any.
    std::string figure;

    /// Throws ConfigError on the first violated invariant.
    void validate() const;
    /// Soft problems (e.g. too few replicates for MC SE <= 0.005).
    std::vector<std::string> warnings() const;

    /// The ER comparator's layout (first design with kind EqualRandomization).
    DesignConfig er_design() const;
    bool wants(EvalMode mode) const;
};

struct BenefitSummary {
    /// NaN when the arms are equal (no better arm).
    double pct_better_mean = 0.0;
    double pct_better_sd = 0.0;
    /// Mean time to event / mean outcome; expected total successes per trial for binary.
    double mean_outcome = 0.0;
};

/// Per-replicate patient-benefit quantities, reduced in replicate order.
class BenefitAccumulator {
public:
    BenefitAccumulator(const OutcomeModel& model, std::size_t replicates);

    void record(std::size_t replicate, const TrialTrajectory& traj);
    BenefitSummary summary() const;

private:
    std::optional<Arm> better_;
    FamilyKind kind_;
    std::vector<double> fraction_better_;
    std::vector<double> outcome_sum_;
    std::vector<int> subjects_;
};

BenefitSummary patient_benefit(std::span<const TrialTrajectory> batch, const OutcomeModel& model);

struct ReportRow {
    std::string scenario;
    DesignConfig design;
    OutcomeModel model;
    std::string test;
    EvalMode mode = EvalMode::Calibrated;
    double alpha = 0.05;
    double rejection_rate = 0.0;
    double mc_se = 0.0;
    BenefitSummary benefit;
    std::uint64_t seed = 0;
    long replicates = 0;
    double threshold = 0.0;
    bool degenerate_max = false;
    std::string figure;
};

struct CalibrationRecord {
    std::string scenario;
    std::string test;
    DesignConfig design;
    OutcomeModel null_model;
    PriorSpec prior;
    CriticalValue critical;
    std::uint64_t seed = 0;
};

struct PerformanceReport {
    std::vector<ReportRow> rows;
    std::vector<CalibrationRecord> critical_values;
    std::vector<std::string> warnings;
    /// Never written to output files.
    double wall_time_seconds = 0.0;

    void append(PerformanceReport other);
    /// Row lookup for tests and summaries; throws std::out_of_range when absent.
    const ReportRow& row(DesignKind design, double param_exp, const std::string& test,
                         EvalMode mode) const;
};

double mc_standard_error(double rate, long replicates);

/// Calibrates every test under the null, then evaluates the null and each
/// alternative on shared trajectories.
PerformanceReport run_scenario(const ScenarioSpec& spec, unsigned threads = 0);

/// Burn-in used by the fully sequential sweeps: N/10 rounded to an even count.
int sweep_burn_in(int total_n);

/// Copies of `base` over the grid with B = 1 and the sweep burn-in.
std::vector<ScenarioSpec> sample_size_grid(const ScenarioSpec& base, std::span<const int> grid);

/// Type I error per N (null model only).
PerformanceReport type1_curve(const ScenarioSpec& base, std::span<const int> grid,
                              unsigned threads = 0);

inline constexpr int kDefaultLargeSampleGrid[] = {100, 200, 500, 1000, 2000, 5000};

/// Power per N for each alternative in `base`, calibrating at every N.
PerformanceReport power_convergence_sweep(const ScenarioSpec& base, std::span<const int> grid,
                                          unsigned threads = 0);

}  // namespace aptest
