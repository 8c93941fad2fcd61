#include "aptest/evaluation_harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

#include "aptest/parallel.hpp"
#include "aptest/random.hpp"

namespace aptest {

std::string to_string(EvalMode mode) {
    return mode == EvalMode::Nominal ? "nominal" : "calibrated";
}

EvalMode eval_mode_from_string(const std::string& name) {
    if (name == "nominal") return EvalMode::Nominal;
    if (name == "calibrated") return EvalMode::Calibrated;
    throw ConfigError("unknown mode '" + name + "' (expected nominal or calibrated)");
}

// ---- ScenarioSpec -----------------------------------------------------------

namespace {

bool comparator_matches(ComparatorKind kind, FamilyKind family) {
    return comparator_for(family) == kind;
}

}  // namespace

void ScenarioSpec::validate() const {
    if (designs.empty()) throw ConfigError("scenario " + name + " has no designs");
    for (const auto& d : designs) {
        if (d.total_n() != designs.front().total_n() || d.burn_in() != designs.front().burn_in() ||
            d.block_size() != designs.front().block_size())
            throw ConfigError("designs in scenario " + name + " must share N, B' and B");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (!null_model.arms_equal())
        throw ConfigError("null model " + null_model.describe() + " does not have equal arms");
    if (prior.family() != null_model.kind())
        throw ConfigError("prior " + prior.describe() + " does not match " + null_model.describe());
    for (const auto& alt : alternatives) {
        if (alt.kind() != null_model.kind() || alt.direction() != null_model.direction())
            throw ConfigError("alternative " + alt.describe() + " differs in family or direction");
        if (alt.parameter(Arm::Control) != null_model.parameter(Arm::Control) ||
            alt.known_sd(Arm::Control) != null_model.known_sd(Arm::Control))
            throw ConfigError("alternative " + alt.describe() + " does not share the control arm of " +
                              null_model.describe());
    }
    if (tests.empty()) throw ConfigError("scenario " + name + " has no tests");
    std::set<std::string> names;
    for (const auto& t : tests) {
        if (!names.insert(t.name).second) throw ConfigError("duplicate test name '" + t.name + "'");
        if (const auto* c = std::get_if<ComparatorKind>(&t.kind);
            c && !comparator_matches(*c, null_model.kind()))
            throw ConfigError("test '" + t.name + "' does not apply to " +
                              to_string(null_model.kind()) + " outcomes");
    }
    if (modes.empty()) throw ConfigError("scenario " + name + " has no modes");
    if (replicates_eval < 1 || replicates_calib < 1)
        throw ConfigError("replicate counts must be positive");
}

std::vector<std::string> ScenarioSpec::warnings() const {
    std::vector<std::string> out;
    if (replicates_eval < 10'000)
        out.push_back("scenario " + name + ": replicates_eval=" + std::to_string(replicates_eval) +
                      " cannot guarantee MC SE <= 0.005");
    return out;
}

DesignConfig ScenarioSpec::er_design() const {
    return designs.front().with_kind(DesignKind::EqualRandomization);
}

bool ScenarioSpec::wants(EvalMode mode) const {
    return std::find(modes.begin(), modes.end(), mode) != modes.end();
}

// ---- patient benefit ----------------------------------------------------------

BenefitAccumulator::BenefitAccumulator(const OutcomeModel& model, std::size_t replicates)
    : better_(model.better_arm()),
      kind_(model.kind()),
      fraction_better_(replicates),
      outcome_sum_(replicates),
      subjects_(replicates) {}

void BenefitAccumulator::record(std::size_t replicate, const TrialTrajectory& traj) {
    if (better_) fraction_better_[replicate] = 100.0 * traj.fraction_on(*better_);
    double sum = 0.0;
    for (double y : traj.outcomes) sum += y;
    outcome_sum_[replicate] = sum;
    subjects_[replicate] = static_cast<int>(traj.outcomes.size());
}

BenefitSummary BenefitAccumulator::summary() const {
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    BenefitSummary s{nan, nan, nan};
    const auto reps = fraction_better_.size();
    if (reps == 0) return s;
    if (better_) {
        double mean = 0.0;
        for (double f : fraction_better_) mean += f;
        mean /= static_cast<double>(reps);
        double ss = 0.0;
        for (double f : fraction_better_) ss += (f - mean) * (f - mean);
        s.pct_better_mean = mean;
        s.pct_better_sd = reps > 1 ? std::sqrt(ss / static_cast<double>(reps - 1)) : 0.0;
    }
    double total = 0.0;
    long subjects = 0;
    for (std::size_t r = 0; r < reps; ++r) {
        total += outcome_sum_[r];
        subjects += subjects_[r];
    }
    if (kind_ == FamilyKind::Bernoulli)
        s.mean_outcome = total / static_cast<double>(reps);
    else
        s.mean_outcome = subjects > 0 ? total / static_cast<double>(subjects) : nan;
    return s;
}

BenefitSummary patient_benefit(std::span<const TrialTrajectory> batch, const OutcomeModel& model) {
    if (batch.empty()) throw ConfigError("patient benefit needs at least one trajectory");
    BenefitAccumulator acc(model, batch.size());
    for (std::size_t r = 0; r < batch.size(); ++r) acc.record(r, batch[r]);
    return acc.summary();
}

// ---- report -----------------------------------------------------------------

void PerformanceReport::append(PerformanceReport other) {
    rows.insert(rows.end(), std::make_move_iterator(other.rows.begin()),
                std::make_move_iterator(other.rows.end()));
    critical_values.insert(critical_values.end(),
                           std::make_move_iterator(other.critical_values.begin()),
                           std::make_move_iterator(other.critical_values.end()));
    warnings.insert(warnings.end(), std::make_move_iterator(other.warnings.begin()),
                    std::make_move_iterator(other.warnings.end()));
    wall_time_seconds += other.wall_time_seconds;
}

const ReportRow& PerformanceReport::row(DesignKind design, double param_exp,
                                        const std::string& test, EvalMode mode) const {
    for (const auto& r : rows) {
        if (r.design.kind() == design && r.model.parameter(Arm::Experimental) == param_exp &&
            r.test == test && r.mode == mode)
            return r;
    }
    throw std::out_of_range("no report row for " + to_string(design) + " " + test + " " +
                            to_string(mode));
}

double mc_standard_error(double rate, long replicates) {
    if (replicates < 1) return std::numeric_limits<double>::quiet_NaN();
    return std::sqrt(rate * (1.0 - rate) / static_cast<double>(replicates));
}

// ---- run_scenario -------------------------------------------------------------

namespace {

struct Cell {
    DesignConfig design;
    std::vector<TestSpec> tests;
    bool er_comparator;
};

/// How one (test, mode) pair turns a statistic into a decision.
struct Rule {
    EvalMode mode;
    bool p_value_rule = false;  // reject iff nominal p <= alpha
    double threshold = 0.0;     // otherwise reject iff statistic > threshold
    bool degenerate_max = false;
};

bool comparators_only(std::span<const TestSpec> tests) {
    return std::none_of(tests.begin(), tests.end(), [](const TestSpec& t) { return t.is_ap(); });
}

std::optional<Rule> nominal_rule(const TestSpec& test, const DesignConfig& design, double alpha) {
    if (const auto* ap = std::get_if<APTestSpec>(&test.kind)) {
        if (auto q = nominal_ap_threshold(*ap, design.num_blocks())) {
            return Rule{EvalMode::Nominal, false, *q, false};
        }
        return std::nullopt;
    }
    return Rule{EvalMode::Nominal, true, alpha, false};
}

/// Rules for each test in the order the scenario requests modes. An AP
/// statistic without a fixed threshold is always calibrated; in a
/// nominal-only run it is reported once under the calibrated label.
std::vector<std::vector<EvalMode>> modes_per_test(const ScenarioSpec& spec, const Cell& cell) {
    std::vector<std::vector<EvalMode>> out;
    for (const auto& test : cell.tests) {
        std::vector<EvalMode> modes;
        for (EvalMode m : spec.modes) {
            EvalMode effective = m;
            if (m == EvalMode::Nominal && !nominal_rule(test, cell.design, spec.alpha))
                effective = EvalMode::Calibrated;
            if (std::find(modes.begin(), modes.end(), effective) == modes.end())
                modes.push_back(effective);
        }
        out.push_back(std::move(modes));
    }
    return out;
}

}  // namespace

PerformanceReport run_scenario(const ScenarioSpec& spec, unsigned threads) {
    spec.validate();
    const auto start = std::chrono::steady_clock::now();
    PerformanceReport report;
    report.warnings = spec.warnings();

    std::vector<Cell> cells;
    for (const auto& d : spec.designs) cells.push_back({d, spec.tests, false});
    if (spec.er_comparator) {
        const auto kind = comparator_for(spec.null_model.kind());
        TestSpec comparator = TestSpec::comparator(kind);
        for (const auto& t : spec.tests) {
            if (const auto* c = std::get_if<ComparatorKind>(&t.kind); c && *c == kind) comparator = t;
        }
        cells.push_back({spec.er_design(), {comparator}, true});
    }

    std::vector<OutcomeModel> models{spec.null_model};
    models.insert(models.end(), spec.alternatives.begin(), spec.alternatives.end());

    for (const auto& cell : cells) {
        const auto modes = modes_per_test(spec, cell);

        // (1) calibration under the null for every test that needs it.
        std::vector<TestSpec> to_calibrate;
        for (std::size_t k = 0; k < cell.tests.size(); ++k) {
            if (std::find(modes[k].begin(), modes[k].end(), EvalMode::Calibrated) != modes[k].end())
                to_calibrate.push_back(cell.tests[k]);
        }
        std::map<std::string, CriticalValue> critical;
        if (!to_calibrate.empty()) {
            const NullSpec null(cell.design, spec.null_model, spec.prior, spec.replicates_calib,
                                spec.seed);
            for (const auto& [name, dist] : simulate_null_distribution(null, to_calibrate, threads)) {
                const auto cv = critical_value(dist, spec.alpha);
                critical.emplace(name, cv);
                report.critical_values.push_back(
                    {spec.name, name, cell.design, spec.null_model, spec.prior, cv, spec.seed});
                if (cv.degenerate_max)
                    report.warnings.push_back(spec.name + ": " + name + " on " +
                                              to_string(cell.design.kind()) +
                                              " has a degenerate critical value (never rejects under the null)");
            }
        }

        std::vector<std::vector<Rule>> rules(cell.tests.size());
        for (std::size_t k = 0; k < cell.tests.size(); ++k) {
            for (EvalMode m : modes[k]) {
                if (m == EvalMode::Nominal) {
                    rules[k].push_back(*nominal_rule(cell.tests[k], cell.design, spec.alpha));
                } else {
                    const auto& cv = critical.at(cell.tests[k].name);
                    rules[k].push_back({EvalMode::Calibrated, false, cv.q_alpha, cv.degenerate_max});
                }
            }
        }

        // (2) evaluation: null first, then the alternatives, all tests on shared trajectories.
        TrialOptions options;
        options.er_probabilities = !comparators_only(cell.tests);
        const auto reps = static_cast<std::size_t>(spec.replicates_eval);
        for (std::size_t m = 0; m < models.size(); ++m) {
            const auto& model = models[m];
            const std::uint64_t stream =
                (cell.er_comparator ? streams::kErComparator : streams::kEvaluation) + m;
            // rejected[k][j][r]: test k, rule j, replicate r.
            std::vector<std::vector<std::vector<char>>> rejected(cell.tests.size());
            for (std::size_t k = 0; k < cell.tests.size(); ++k)
                rejected[k].assign(rules[k].size(), std::vector<char>(reps, 0));
            BenefitAccumulator benefit(model, reps);

            parallel_for(reps, threads, [&](std::size_t r) {
                try {
                    Rng rng = make_stream(spec.seed, stream, r);
                    const auto traj = simulate_trial(cell.design, model, spec.prior, rng, options);
                    benefit.record(r, traj);
                    for (std::size_t k = 0; k < cell.tests.size(); ++k) {
                        const auto stat = evaluate_statistic(cell.tests[k], traj);
                        for (std::size_t j = 0; j < rules[k].size(); ++j) {
                            const auto& rule = rules[k][j];
                            const bool reject =
                                rule.p_value_rule
                                    ? (!stat.degenerate && stat.nominal_p && *stat.nominal_p <= rule.threshold)
                                    : stat.value > rule.threshold;
                            rejected[k][j][r] = reject ? 1 : 0;
                        }
                    }
                } catch (const NumericalError& e) {
                    throw NumericalError("evaluation replicate " + std::to_string(r) + " under " +
                                         model.describe() + ": " + e.what());
                }
            });

            const auto summary = benefit.summary();
            for (std::size_t k = 0; k < cell.tests.size(); ++k) {
                for (std::size_t j = 0; j < rules[k].size(); ++j) {
                    long count = 0;
                    for (char c : rejected[k][j]) count += c;
                    const double rate = static_cast<double>(count) / static_cast<double>(reps);
                    ReportRow row{spec.name,
                                  cell.design,
                                  model,
                                  cell.tests[k].name,
                                  rules[k][j].mode,
                                  spec.alpha,
                                  rate,
                                  mc_standard_error(rate, spec.replicates_eval),
                                  summary,
                                  spec.seed,
                                  spec.replicates_eval,
                                  rules[k][j].threshold,
                                  rules[k][j].degenerate_max,
                                  spec.figure};
                    if (row.mc_se > 0.005 && rate >= 0.05 && rate <= 0.95)
                        report.warnings.push_back(spec.name + ": MC SE of " + row.test + " under " +
                                                  model.describe() + " exceeds 0.005");
                    report.rows.push_back(std::move(row));
                }
            }
        }
    }
    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

// ---- sweeps -------------------------------------------------------------------

int sweep_burn_in(int total_n) {
    return std::max(2, 2 * static_cast<int>(std::lround(total_n / 20.0)));
}

std::vector<ScenarioSpec> sample_size_grid(const ScenarioSpec& base, std::span<const int> grid) {
    std::vector<ScenarioSpec> out;
    for (int n : grid) {
        ScenarioSpec s = base;
        s.name = base.name + "-N" + std::to_string(n);
        s.designs.clear();
        for (const auto& d : base.designs) {
            s.designs.push_back(DesignConfig::from_sample_size(n, sweep_burn_in(n), 1, d.kind(),
                                                               d.t_min(), d.permuted_block_size()));
        }
        out.push_back(std::move(s));
    }
    return out;
}

PerformanceReport type1_curve(const ScenarioSpec& base, std::span<const int> grid,
                              unsigned threads) {
    ScenarioSpec null_only = base;
    null_only.alternatives.clear();
    PerformanceReport out;
    for (const auto& s : sample_size_grid(null_only, grid)) out.append(run_scenario(s, threads));
    return out;
}

PerformanceReport power_convergence_sweep(const ScenarioSpec& base, std::span<const int> grid,
                                          unsigned threads) {
    PerformanceReport out;
    for (const auto& s : sample_size_grid(base, grid)) out.append(run_scenario(s, threads));
    return out;
}

}  // namespace aptest
