// Acceptance run: one PASS/FAIL line per criterion at desk scale
// (10^5 calibration and 10^4 evaluation replicates unless noted).
//
// Exit status is non-zero when a criterion fails that is not in
// kKnownFailures, or when a known failure unexpectedly passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "aptest/cli_interface.hpp"
#include "aptest/evaluation_harness.hpp"
#include "oracles.hpp"

using namespace aptest;
namespace fs = std::filesystem;

namespace {

// ---- pinned tolerances ----------------------------------------------------------

constexpr double kAlpha = 0.05;
constexpr long kDeskCalib = 100'000;
constexpr long kDeskEval = 10'000;
constexpr long kConfirmEval = 100'000;
constexpr double kType1Band = 0.0065;        // 3 binomial SE at 10^4
constexpr double kPctTolSmall = 2.0;         // benefit, N=100
constexpr double kPctSdTolSmall = 3.0;
constexpr double kTimeTolSmall = 0.02;
constexpr double kPctTolLarge = 1.0;         // benefit, N=500
constexpr double kPctSdTolLarge = 1.0;
constexpr double kTimeTolLarge = 0.01;
constexpr double kOrderingZ = 3.0;           // ordering holds up to 3 combined MC SE
constexpr double kGapMin = 0.20;
constexpr double kOriginalType1 = 0.15;
constexpr double kOriginalType1Tol = 0.03;
constexpr double kOriginalPowerMax = 0.45;
constexpr double kPowerTolPct = 2.5;         // empirical example, percentage points
constexpr double kBenefitTolPct = 2.5;
constexpr double kTimeTolSeconds = 5.0;
constexpr double kSuccessTol = 1.0;
constexpr double kOracleTol = 1e-8;
constexpr double kFisherRelTol = 1e-12;
constexpr double kInvarianceZ = 3.0;

const std::set<int> kKnownFailures{1, 6};

const std::uint64_t kSeed = 20240611;

struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;

    void check(bool ok, const std::string& what) {
        pass = pass && ok;
        notes.push_back(std::string(ok ? "ok    " : "FAIL  ") + what);
    }
    void info(const std::string& what) { notes.push_back("info  " + what); }
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double combined_se(const ReportRow& a, const ReportRow& b) {
    return std::sqrt(a.mc_se * a.mc_se + b.mc_se * b.mc_se);
}

DesignConfig layout(int n, int burn, int block, DesignKind kind) {
    return DesignConfig::from_sample_size(n, burn, block, kind);
}

std::vector<DesignConfig> brar_pair(int n, int burn, int block) {
    return {layout(n, burn, block, DesignKind::StandardBrar), layout(n, burn, block, DesignKind::TunedBrar)};
}

const char* kind_label(DesignKind k) {
    switch (k) {
        case DesignKind::StandardBrar: return "standard";
        case DesignKind::TunedBrar: return "tuned";
        case DesignKind::EqualRandomization: return "ER";
    }
    return "?";
}

// ---- criteria -------------------------------------------------------------------------

Outcome calibration_correctness() {
    Outcome out;
    struct Family {
        const char* name;
        OutcomeModel null;
        PriorSpec prior;
    };
    const Family families[] = {
        {"exponential", OutcomeModel::exponential(1, 1), PriorSpec::gamma(1, 0.001)},
        {"bernoulli", OutcomeModel::bernoulli(0.5, 0.5), PriorSpec::beta(1, 1)},
        {"normal", OutcomeModel::normal(0, 0, 1, 1), PriorSpec::normal(0, 1e6)},
    };
    std::uint64_t seed = kSeed;
    for (const auto& f : families) {
        ScenarioSpec s;
        s.name = std::string("c1-") + f.name;
        s.designs = brar_pair(500, 50, 10);
        s.prior = f.prior;
        s.null_model = f.null;
        s.tests = {TestSpec::timedirect(), TestSpec::last_block()};
        s.er_comparator = false;
        s.replicates_calib = kDeskCalib;
        s.replicates_eval = kDeskEval;
        s.seed = ++seed;
        const auto report = run_scenario(s);
        bool family_ok = true;
        for (const auto& row : report.rows) {
            const bool ok = std::abs(row.rejection_rate - kAlpha) <= kType1Band;
            family_ok = family_ok && ok;
            out.check(ok, fmt("%-11s %-8s %-10s type I %.4f (target 0.05 +/- %.4f)", f.name,
                              kind_label(row.design.kind()), row.test.c_str(), row.rejection_rate, kType1Band));
        }
        if (!family_ok) {
            // Same calibration, ten times the evaluation replicates: separates a
            // miscalibrated threshold from evaluation noise. Does not change the verdict.
            s.replicates_eval = kConfirmEval;
            for (const auto& row : run_scenario(s).rows)
                out.info(fmt("%-11s %-8s %-10s type I %.4f at %ld evaluation replicates (MC SE %.4f)", f.name,
                             kind_label(row.design.kind()), row.test.c_str(), row.rejection_rate, kConfirmEval, row.mc_se));
        }
    }
    return out;
}

Outcome patient_benefit_check() {
    Outcome out;
    struct Target {
        int n;
        DesignKind kind;
        double pct, pct_tol;
        std::optional<double> sd;
        double sd_tol;
        double time, time_tol;
    };
    const Target targets[] = {
        {100, DesignKind::StandardBrar, 79, kPctTolSmall, 14.0, kPctSdTolSmall, 0.74, kTimeTolSmall},
        {100, DesignKind::TunedBrar, 73, kPctTolSmall, std::nullopt, 0, 0.76, kTimeTolSmall},
        {500, DesignKind::StandardBrar, 91, kPctTolLarge, 4.3, kPctSdTolLarge, 0.70, kTimeTolLarge},
        {500, DesignKind::TunedBrar, 86, kPctTolLarge, std::nullopt, 0, 0.72, kTimeTolLarge},
    };
        for (const auto& [n, burn, block] : {std::tuple{100, 10, 1}, std::tuple{500, 50, 10}}) {
        ScenarioSpec s;
        s.name = "c2-N" + std::to_string(n);
        s.designs = brar_pair(n, burn, block);
        s.alternatives = {OutcomeModel::exponential(1, 1.5), OutcomeModel::exponential(1, 2.0)};
        s.tests = {TestSpec::last_block()};
        s.replicates_calib = 2'000;  // only the benefit columns are used
        s.replicates_eval = kDeskEval;
        s.seed = kSeed;
        const auto report = run_scenario(s);
        for (const auto& t : targets) {
            if (t.n != n) continue;
            const auto& b = report.row(t.kind, 1.5, "lastblock", EvalMode::Calibrated).benefit;
            out.check(std::abs(b.pct_better_mean - t.pct) <= t.pct_tol,
                      fmt("N=%d %-8s %% on better arm %.1f (target %.0f +/- %.0f)", n, kind_label(t.kind),
                          b.pct_better_mean, t.pct, t.pct_tol));
            if (t.sd)
                out.check(std::abs(b.pct_better_sd - *t.sd) <= t.sd_tol,
                          fmt("N=%d %-8s sd %.1f (target %.1f +/- %.0f)", n, kind_label(t.kind),
                              b.pct_better_sd, *t.sd, t.sd_tol));
            out.check(std::abs(b.mean_outcome - t.time) <= t.time_tol,
                      fmt("N=%d %-8s mean time %.3f (target %.2f +/- %.2f)", n, kind_label(t.kind),
                          b.mean_outcome, t.time, t.time_tol));
            const auto& b2 = report.row(t.kind, 2.0, "lastblock", EvalMode::Calibrated).benefit;
            out.info(fmt("N=%d %-8s at rate 2: %.1f%% (sd %.1f), mean time %.3f", n, kind_label(t.kind),
                         b2.pct_better_mean, b2.pct_better_sd, b2.mean_outcome));
        }
        const auto& er = report.row(DesignKind::EqualRandomization, 1.5, "lr", EvalMode::Calibrated).benefit;
        out.info(fmt("N=%d ER: %.1f%% on better arm, mean time %.3f", n, er.pct_better_mean, er.mean_outcome));
    }
    return out;
}

struct Phase3 {
    PerformanceReport report;
};

Outcome power_ordering(const PerformanceReport& r) {
    Outcome out;
    bool gap_found = false;
    for (auto kind : {DesignKind::StandardBrar, DesignKind::TunedBrar}) {
        for (double lam : {1.4, 1.6, 1.8, 2.0}) {
            const auto& lb = r.row(kind, lam, "lastblock", EvalMode::Calibrated);
            const auto& td = r.row(kind, lam, "timedirect", EvalMode::Calibrated);
            const auto& og = r.row(kind, lam, "original", EvalMode::Calibrated);
            const bool ok1 = lb.rejection_rate >= td.rejection_rate - kOrderingZ * combined_se(lb, td);
            const bool ok2 = td.rejection_rate >= og.rejection_rate - kOrderingZ * combined_se(td, og);
            out.check(ok1 && ok2, fmt("%-8s rate %.1f: lastblock %.4f, timedirect %.4f, original %.4f",
                                      kind_label(kind), lam, lb.rejection_rate, td.rejection_rate,
                                      og.rejection_rate));
            if (lb.rejection_rate < td.rejection_rate)
                out.info(fmt("%-8s rate %.1f: timedirect above lastblock by %.4f (%.1f combined MC SE)", kind_label(kind), lam,
                             td.rejection_rate - lb.rejection_rate,
                             (td.rejection_rate - lb.rejection_rate) / combined_se(lb, td)));
            gap_found = gap_found || lb.rejection_rate - og.rejection_rate >= kGapMin;
        }
    }
    out.check(gap_found, fmt("lastblock - original gap >= %.2f for at least one rate", kGapMin));
    return out;
}

Outcome original_pathology(const PerformanceReport& r) {
    Outcome out;
    for (auto kind : {DesignKind::StandardBrar, DesignKind::TunedBrar}) {
        const auto& null = r.row(kind, 1.0, "original", EvalMode::Nominal);
        if (kind == DesignKind::StandardBrar)
            out.check(std::abs(null.rejection_rate - kOriginalType1) <= kOriginalType1Tol,
                      fmt("standard unadjusted original type I %.4f (target %.2f +/- %.2f)", null.rejection_rate,
                          kOriginalType1, kOriginalType1Tol));
        else
            out.info(fmt("tuned unadjusted original type I %.4f", null.rejection_rate));
        for (double lam : {1.2, 1.4, 1.6, 1.8, 2.0}) {
            const auto& cal = r.row(kind, lam, "original", EvalMode::Calibrated);
            const auto& nom = r.row(kind, lam, "original", EvalMode::Nominal);
            out.check(cal.rejection_rate < kOriginalPowerMax,
                      fmt("%-8s rate %.1f adjusted original power %.4f < %.2f%s", kind_label(kind), lam,
                          cal.rejection_rate, kOriginalPowerMax, cal.degenerate_max ? " (never rejects)" : ""));
            out.info(fmt("%-8s rate %.1f: randomized-boundary equivalent power %.4f", kind_label(kind), lam,
                         nom.rejection_rate * kAlpha / null.rejection_rate));
        }
    }
    return out;
}

Outcome type1_curve_shape() {
    Outcome out;
    auto specs = load_preset("type1-curve-desk");
    PerformanceReport all;
    for (auto& s : specs) {
        s.designs = {s.designs.front().with_kind(DesignKind::StandardBrar)};
        s.tests = {TestSpec::comparator(ComparatorKind::LikelihoodRatio)};
        s.modes = {EvalMode::Nominal};
        all.append(run_scenario(s));
    }
    const ReportRow* previous = nullptr;
    for (const auto& row : all.rows) {
        if (row.design.kind() == DesignKind::EqualRandomization) {
            out.check(std::abs(row.rejection_rate - kAlpha) <= kType1Band,
                      fmt("N=%d ER LR type I %.4f (0.05 +/- %.4f)", row.design.total_n(), row.rejection_rate, kType1Band));
            continue;
        }
        out.check(row.rejection_rate > kAlpha,
                  fmt("N=%d standard BRAR LR type I %.4f > 0.05", row.design.total_n(), row.rejection_rate));
        if (previous) {
            const double slack = kOrderingZ * combined_se(*previous, row);
            out.check(row.rejection_rate >= previous->rejection_rate - slack,
                      fmt("  non-decreasing from N=%d (%.4f -> %.4f, slack %.4f)", previous->design.total_n(),
                          previous->rejection_rate, row.rejection_rate, slack));
        }
        previous = &row;
    }
    return out;
}

Outcome empirical_example() {
    Outcome out;
    struct Item {
        DesignKind kind;
        const char* test;
        double target;
    };
    auto run_preset = [](const std::string& name) {
        auto specs = load_preset(name);
        specs[0].modes = {EvalMode::Nominal, EvalMode::Calibrated};
        return run_scenario(specs[0]);
    };
    auto compare = [&](const PerformanceReport& r, const char* family, double alt, const std::vector<Item>& items) {
        for (const auto& it : items) {
            const auto& row = r.row(it.kind, alt, it.test, EvalMode::Calibrated);
            out.check(std::abs(100.0 * row.rejection_rate - it.target) <= kPowerTolPct,
                      fmt("%-11s %-8s %-10s power %.1f%% (target %.1f +/- %.1f)", family, kind_label(it.kind), it.test,
                          100.0 * row.rejection_rate, it.target, kPowerTolPct));
        }
    };
    auto randomized_original = [&](const PerformanceReport& r, const char* family, double null, double alt) {
        for (auto kind : {DesignKind::StandardBrar, DesignKind::TunedBrar}) {
            const double t1 = r.row(kind, null, "original", EvalMode::Nominal).rejection_rate;
            const double pw = r.row(kind, alt, "original", EvalMode::Nominal).rejection_rate;
            out.info(fmt("%-11s %-8s original: unadjusted type I %.4f, unadjusted power %.4f, randomized-boundary power %.1f%%",
                         family, kind_label(kind), t1, pw, 100.0 * pw * kAlpha / t1));
        }
    };

    const auto e = run_preset("empirical-exponential-desk");
    compare(e, "exponential", 0.0035,
            {{DesignKind::StandardBrar, "original", 26.2}, {DesignKind::StandardBrar, "timedirect", 66.4},
             {DesignKind::StandardBrar, "lr", 57.7}, {DesignKind::StandardBrar, "lastblock", 73.2},
             {DesignKind::EqualRandomization, "lr", 87.2}, {DesignKind::TunedBrar, "original", 28.4},
             {DesignKind::TunedBrar, "timedirect", 81.2}, {DesignKind::TunedBrar, "lr", 75.4},
             {DesignKind::TunedBrar, "lastblock", 86.6}});
    for (const auto& [kind, pct, time] : {std::tuple{DesignKind::StandardBrar, 86.0, 315.0},
                                          std::tuple{DesignKind::TunedBrar, 80.0, 330.0},
                                          std::tuple{DesignKind::EqualRandomization, 50.0, 376.0}}) {
        const auto& b = e.row(kind, 0.0035, kind == DesignKind::EqualRandomization ? "lr" : "lastblock",
                              EvalMode::Calibrated).benefit;
        out.check(std::abs(b.pct_better_mean - pct) <= kBenefitTolPct,
                  fmt("exponential %-8s on better arm %.1f%% (target %.0f +/- %.1f)", kind_label(kind), b.pct_better_mean, pct, kBenefitTolPct));
        out.check(std::abs(b.mean_outcome - time) <= kTimeTolSeconds,
                  fmt("exponential %-8s mean time %.1f s (target %.0f +/- %.0f)", kind_label(kind), b.mean_outcome, time, kTimeTolSeconds));
    }
    out.info(fmt("ER mean time expected from the rates: %.1f s", 0.5 * (1 / 0.002 + 1 / 0.0035)));
    randomized_original(e, "exponential", 0.002, 0.0035);
    {
        // Two-sided LR on ER trajectories, for comparison with the target.
        const auto design = layout(121, 12, 1, DesignKind::EqualRandomization);
        TrialOptions opts;
        opts.er_probabilities = false;
        long two = 0, one = 0;
        for (long r = 0; r < kDeskEval; ++r) {
            Rng rng = make_stream(kSeed, 7777, static_cast<std::uint64_t>(r));
            const auto p = lr_exponential(simulate_trial(design, OutcomeModel::exponential(0.002, 0.0035),
                                                         PriorSpec::gamma(1, 0.001), rng, opts)).p_value;
            one += p <= kAlpha;
            two += 2.0 * std::min(p, 1.0 - p) <= kAlpha;
        }
        out.info(fmt("ER LR power: one-sided %.1f%%, two-sided %.1f%%", 100.0 * one / kDeskEval, 100.0 * two / kDeskEval));
    }

    const auto b = run_preset("empirical-binary-desk");
    compare(b, "binary", 0.9,
            {{DesignKind::StandardBrar, "original", 22.0}, {DesignKind::StandardBrar, "timedirect", 59.3},
             {DesignKind::StandardBrar, "fisher", 60.6}, {DesignKind::StandardBrar, "lastblock", 67.4},
             {DesignKind::EqualRandomization, "fisher", 88.5}, {DesignKind::TunedBrar, "original", 26.6},
             {DesignKind::TunedBrar, "timedirect", 75.8}, {DesignKind::TunedBrar, "fisher", 79.4},
             {DesignKind::TunedBrar, "lastblock", 82.5}});
    for (const auto& [kind, successes] : {std::pair{DesignKind::StandardBrar, 106.0}, std::pair{DesignKind::TunedBrar, 104.0},
                                          std::pair{DesignKind::EqualRandomization, 97.0}}) {
        const auto& ben = b.row(kind, 0.9, kind == DesignKind::EqualRandomization ? "fisher" : "lastblock",
                                EvalMode::Calibrated).benefit;
        out.check(std::abs(ben.mean_outcome - successes) <= kSuccessTol,
                  fmt("binary      %-8s successes %.1f (target %.0f +/- %.0f)", kind_label(kind), ben.mean_outcome, successes, kSuccessTol));
        if (kind != DesignKind::EqualRandomization)
            out.info(fmt("binary      %-8s on better arm %.1f%% (sd %.1f)", kind_label(kind), ben.pct_better_mean, ben.pct_better_sd));
    }
    randomized_original(b, "binary", 0.7, 0.9);
    return out;
}

Outcome oracle_equivalence() {
    Outcome out;
    std::mt19937_64 rng(kSeed);
    std::uniform_int_distribution<int> n(0, 300);
    std::uniform_real_distribution<double> u(0.05, 3.0);
    const auto gamma = PriorSpec::gamma(1, 0.001);
    const auto beta = PriorSpec::beta(1, 1);
    const auto normal = PriorSpec::normal(0, 1e6);
    double worst_g = 0, worst_b = 0, worst_n = 0, worst_q = 0;
    const int pairs = 100;
    for (int i = 0; i < pairs; ++i) {
        const int n1 = n(rng), n0 = n(rng);
        const ArmPosterior ge{n1, n1 * u(rng) + 0.1}, gc{n0, n0 * u(rng) + 0.1};
        const double g = superiority_probability(ge, gc, gamma, Direction::LargerIsBetter);
        worst_g = std::max(worst_g, std::abs(g - oracle::gamma_superiority(1 + n1, 0.001 + ge.sum, 1 + n0, 0.001 + gc.sum)));
        worst_q = std::max(worst_q, std::abs(g - superiority_probability_quadrature(ge, gc, gamma, Direction::LargerIsBetter)));

        const ArmPosterior be{n1, std::floor(n1 * u(rng) / 3.0)}, bc{n0, std::floor(n0 * u(rng) / 3.0)};
        const double bp = superiority_probability(be, bc, beta, Direction::LargerIsBetter);
        worst_b = std::max(worst_b, std::abs(bp - oracle::beta_superiority(1 + be.sum, 1 + n1 - be.sum, 1 + bc.sum, 1 + n0 - bc.sum)));
        worst_q = std::max(worst_q, std::abs(bp - superiority_probability_quadrature(be, bc, beta, Direction::LargerIsBetter)));

        const double s1 = 0.5 + u(rng), s0 = 0.5 + u(rng);
        const ArmPosterior ne{n1, n1 * (u(rng) - 1.5), s1}, nc{n0, n0 * (u(rng) - 1.5), s0};
        auto post = [](const ArmPosterior& a) {
            const double prec = 1e-6 + a.n / (a.noise_sd * a.noise_sd);
            return std::pair{a.sum / (a.noise_sd * a.noise_sd) / prec, 1.0 / prec};
        };
        const auto [m1, v1] = post(ne);
        const auto [m0, v0] = post(nc);
        const double np = superiority_probability(ne, nc, normal, Direction::LargerIsBetter);
        worst_n = std::max(worst_n, std::abs(np - oracle::normal_superiority(m1, v1, m0, v0)));
        worst_q = std::max(worst_q, std::abs(np - superiority_probability_quadrature(ne, nc, normal, Direction::LargerIsBetter)));
    }
    out.check(worst_g < kOracleTol, fmt("gamma: max |closed form - oracle| %.2e over %d pairs", worst_g, pairs));
    out.check(worst_b < kOracleTol, fmt("beta: max |closed form - oracle| %.2e over %d pairs", worst_b, pairs));
    out.check(worst_n < kOracleTol, fmt("normal: max |closed form - oracle| %.2e over %d pairs", worst_n, pairs));
    out.check(worst_q < kOracleTol, fmt("all families: max |closed form - library quadrature| %.2e", worst_q));

    double worst_f = 0;
    long tables = 0;
    for (int n1 = 0; n1 <= 12; ++n1)
        for (int n0 = 0; n0 <= 12; ++n0)
            for (int s1 = 0; s1 <= n1; ++s1)
                for (int s0 = 0; s0 <= n0; ++s0, ++tables) {
                    const double ref = oracle::fisher_enumerated(n1, s1, n0, s0);
                    worst_f = std::max(worst_f, std::abs(fisher_exact_one_sided(n1, s1, n0, s0) - ref) / ref);
                }
    out.check(worst_f < kFisherRelTol, fmt("Fisher: max relative error %.2e over %ld tables with margins <= 12", worst_f, tables));
    return out;
}

Outcome calibration_invariance() {
    Outcome out;
    const auto design = layout(500, 50, 10, DesignKind::StandardBrar);
    const double se = std::sqrt(2.0 * kAlpha * (1 - kAlpha) / kDeskCalib);
    {
        const std::vector<OutcomeModel> nulls{OutcomeModel::exponential(1, 1), OutcomeModel::exponential(10, 10)};
        const std::vector<TestSpec> tests{TestSpec::original(), TestSpec::timedirect(), TestSpec::last_block()};
        for (const auto& c : null_sensitivity_sweep(design, PriorSpec::gamma(1, 0.001), nulls, tests, kAlpha, kDeskCalib, kSeed)) {
            if (c.calibrated_at.describe() == c.evaluated_at.describe()) continue;
            const double diff = c.type1_error - c.critical.achieved_alpha;
            out.check(std::abs(diff) < kInvarianceZ * se,
                      fmt("exponential %-10s q=%.6g from %s: tail %.4f under %s vs %.4f (|diff| %.4f < %.4f)",
                          c.test_name.c_str(), c.critical.q_alpha, c.calibrated_at.describe().c_str(), c.type1_error,
                          c.evaluated_at.describe().c_str(), c.critical.achieved_alpha, std::abs(diff), kInvarianceZ * se));
        }
    }
    {
        const std::vector<OutcomeModel> nulls{OutcomeModel::bernoulli(0.5, 0.5), OutcomeModel::bernoulli(0.9, 0.9)};
        const std::vector<TestSpec> tests{TestSpec::last_block()};
        bool detected = false;
        for (const auto& c : null_sensitivity_sweep(design, PriorSpec::beta(1, 1), nulls, tests, kAlpha, kDeskCalib, kSeed)) {
            if (c.calibrated_at.describe() == c.evaluated_at.describe()) continue;
            const double diff = c.type1_error - c.critical.achieved_alpha;
            detected = detected || std::abs(diff) > kInvarianceZ * se;
            out.info(fmt("binary lastblock q=%.6f from %s: tail %.4f under %s (diff %.4f)", c.critical.q_alpha,
                         c.calibrated_at.describe().c_str(), c.type1_error, c.evaluated_at.describe().c_str(), diff));
        }
        out.check(detected, fmt("binary lastblock calibration differs by > %.0f MC SE between p=0.5 and p=0.9", kInvarianceZ));
    }
    return out;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism() {
    Outcome out;
    auto specs = load_preset("phase3-desk");
    Overrides o;
    o.replicates_eval = 1'000;
    o.replicates_calib = 5'000;
    apply_overrides(specs, o);
    const auto root = fs::temp_directory_path() / "aptest_acceptance_determinism";
    fs::remove_all(root);
    std::vector<fs::path> dirs;
    for (unsigned threads : {4u, 4u, 1u}) {
        RunManifest m;
        m.preset = "phase3-desk";
        m.specs = specs;
        m.threads = threads;
        m.output_dir = root / std::to_string(dirs.size());
        std::ostringstream log;
        out.check(run(m, log) == kExitOk, fmt("run %zu with %u threads exits 0", dirs.size() + 1, threads));
        dirs.push_back(m.output_dir);
    }
    for (const char* f : {"report.tsv", "critical_values.tsv", "fig2.tsv", "manifest.json"}) {
        const auto a = slurp(dirs[0] / f);
        out.check(!a.empty() && a == slurp(dirs[1] / f), fmt("%s byte-identical across reruns", f));
        out.check(a == slurp(dirs[2] / f), fmt("%s identical for 4 threads and 1 thread", f));
    }
    fs::remove_all(root);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    const bool verbose = argc > 1 && std::string(argv[1]) == "-v";
    struct Criterion {
        int id;
        const char* title;
        std::function<Outcome()> run;
    };
    PerformanceReport phase3;
    bool phase3_ready = false;
    auto phase3_report = [&]() -> const PerformanceReport& {
        if (!phase3_ready) {
            phase3 = run_scenario(load_preset("phase3-desk")[0]);
            phase3_ready = true;
        }
        return phase3;
    };
    const std::vector<Criterion> criteria{
        {1, "calibration correctness (fresh-seed type I error of timedirect and lastblock)", calibration_correctness},
        {2, "patient benefit at treatment ratio 50% (rates 1 and 1.5), N=100 and N=500", patient_benefit_check},
        {3, "phase-3 power ordering lastblock >= timedirect >= original", [&] { return power_ordering(phase3_report()); }},
        {4, "original AP: unadjusted type I near 3x nominal, low adjusted power", [&] { return original_pathology(phase3_report()); }},
        {5, "type I error curve of the asymptotic LR test", type1_curve_shape},
        {6, "empirical example power, benefit and outcomes", empirical_example},
        {7, "closed forms vs oracles; Fisher vs enumeration", oracle_equivalence},
        {8, "calibration invariance (exponential) and sensitivity (binary)", calibration_invariance},
        {9, "determinism across reruns and thread counts", determinism},
    };

    int unexpected = 0, passed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.check(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool known = kKnownFailures.count(c.id) > 0;
        passed += o.pass;
        if (o.pass == known) ++unexpected;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << c.id << ": " << c.title
                  << (known && !o.pass ? "  [known deviation]" : "") << (known && o.pass ? "  [known failure now passes]" : "")
                  << '\n';
        for (const auto& n : o.notes)
            if (verbose || n.rfind("ok", 0) != 0) std::cout << "        " << n << '\n';
        std::cerr << "        (" << fmt("%.1f", secs) << " s)\n";
        std::cout.flush();
    }
    std::cout << passed << "/" << criteria.size() << " criteria passed";
    if (unexpected) std::cout << ", " << unexpected << " unexpected result(s)";
    std::cout << '\n';
    return unexpected == 0 ? 0 : 1;
}
