#include "aptest/calibration.hpp"

#include <algorithm>
#include <cmath>

#include "aptest/parallel.hpp"
#include "aptest/random.hpp"

namespace aptest {

NullSpec::NullSpec(DesignConfig design, OutcomeModel model, PriorSpec prior, long replicates,
                   std::uint64_t seed)
    : design_(design), model_(model), prior_(prior), replicates_(replicates), seed_(seed) {
    if (!model_.arms_equal())
        throw ConfigError("null model must have equal arms, got " + model_.describe());
    if (prior_.family() != model_.kind())
        throw ConfigError("prior " + prior_.describe() + " does not match " + model_.describe());
    if (replicates_ < 1) throw ConfigError("calibration needs at least one replicate");
}

std::string NullSpec::describe() const {
    return design_.describe() + " " + model_.describe() + " prior=" + prior_.describe();
}

NullDistribution::NullDistribution(std::string test_name, std::vector<double> samples)
    : test_name_(std::move(test_name)), samples_(std::move(samples)) {
    std::sort(samples_.begin(), samples_.end());
}

double NullDistribution::tail_probability(double q) const {
    if (samples_.empty()) return 0.0;
    const auto above = samples_.end() - std::upper_bound(samples_.begin(), samples_.end(), q);
    return static_cast<double>(above) / static_cast<double>(samples_.size());
}

double NullDistribution::quantile_sample(double p) const {
    if (samples_.empty()) throw ConfigError("empty null distribution");
    const auto n = samples_.size();
    auto idx = static_cast<std::size_t>(std::floor(p * static_cast<double>(n)));
    return samples_[std::min(idx, n - 1)];
}

std::map<std::string, NullDistribution> simulate_null_distribution(const NullSpec& null,
                                                                   std::span<const TestSpec> tests,
                                                                   unsigned threads) {
    const auto reps = static_cast<std::size_t>(null.replicates());
    std::vector<std::vector<double>> values(tests.size(), std::vector<double>(reps));
    TrialOptions options;
    options.er_probabilities =
        std::any_of(tests.begin(), tests.end(), [](const TestSpec& t) { return t.is_ap(); });
    parallel_for(reps, threads, [&](std::size_t r) {
        try {
            Rng rng = make_stream(null.seed(), streams::kCalibration, r);
            const auto traj = simulate_trial(null.design(), null.model(), null.prior(), rng, options);
            for (std::size_t k = 0; k < tests.size(); ++k)
                values[k][r] = evaluate_statistic(tests[k], traj).value;
        } catch (const NumericalError& e) {
            throw NumericalError("null replicate " + std::to_string(r) + ": " + e.what());
        }
    });
    std::map<std::string, NullDistribution> out;
    for (std::size_t k = 0; k < tests.size(); ++k) {
        out.insert_or_assign(tests[k].name, NullDistribution(tests[k].name, std::move(values[k])));
    }
    return out;
}

CriticalValue critical_value(const NullDistribution& dist, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    const auto samples = dist.samples();
    if (samples.empty()) throw ConfigError("null distribution for " + dist.test_name() + " is empty");
    const auto n = samples.size();
    // At most `allowed` samples may exceed q; q = the (n - allowed)-th order statistic.
    const auto allowed =
        static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n) * (1.0 + 1e-12)));
    const std::size_t idx = n - std::min(allowed, n - 1) - 1;

    CriticalValue cv;
    cv.q_alpha = samples[idx];
    cv.achieved_alpha = dist.tail_probability(cv.q_alpha);
    cv.alpha_nominal = alpha;
    cv.degenerate_max = cv.q_alpha >= samples.back();
    cv.replicates = static_cast<long>(n);
    return cv;
}

OutcomeModel pooled_null_model(const TrialTrajectory& observed, Direction direction,
                               const PooledOptions& options) {
    const auto& post = observed.final_posterior;
    const auto& exp = post[Arm::Experimental];
    const auto& ctrl = post[Arm::Control];
    const double n = static_cast<double>(exp.n + ctrl.n);
    const double total = exp.sum + ctrl.sum;
    if (n < 1) throw CalibrationError("observed trial has no outcomes");
    switch (post.family()) {
        case FamilyKind::Exponential: {
            if (!(total > 0.0)) throw CalibrationError("pooled total time is zero");
            const double rate = n / total;
            return OutcomeModel::exponential(rate, rate, direction);
        }
        case FamilyKind::Bernoulli: {
            double p = total / n;
            if (p <= 0.0 || p >= 1.0) {
                if (!options.continuity_correction)
                    throw CalibrationError(
                        "pooled proportion is " + std::to_string(p) +
                        "; rerun with the add-half continuity correction to calibrate at (s+0.5)/(n+1)");
                p = (total + 0.5) / (n + 1.0);
            }
            return OutcomeModel::bernoulli(p, p, direction);
        }
        case FamilyKind::Normal: {
            const double mean = total / n;
            return OutcomeModel::normal(mean, mean, ctrl.noise_sd, exp.noise_sd, direction);
        }
    }
    throw CalibrationError("unknown outcome family");
}

std::map<std::string, CriticalValue> calibrate_under_pooled(
    const TrialTrajectory& observed, const DesignConfig& design, const PriorSpec& prior,
    Direction direction, std::span<const TestSpec> tests, double alpha, long replicates,
    std::uint64_t seed, unsigned threads, const PooledOptions& options) {
    const NullSpec null(design, pooled_null_model(observed, direction, options), prior, replicates,
                        seed);
    std::map<std::string, CriticalValue> out;
    for (const auto& [name, dist] : simulate_null_distribution(null, tests, threads)) {
        out.emplace(name, critical_value(dist, alpha));
    }
    return out;
}

std::vector<SensitivityCell> null_sensitivity_sweep(const DesignConfig& design,
                                                    const PriorSpec& prior,
                                                    std::span<const OutcomeModel> nulls,
                                                    std::span<const TestSpec> tests, double alpha,
                                                    long replicates, std::uint64_t seed,
                                                    unsigned threads) {
    std::vector<std::map<std::string, NullDistribution>> dists;
    dists.reserve(nulls.size());
    for (std::size_t i = 0; i < nulls.size(); ++i) {
        // Distinct seeds per null keep the cross-evaluations independent.
        const NullSpec null(design, nulls[i], prior, replicates, mix64(seed + i));
        dists.push_back(simulate_null_distribution(null, tests, threads));
    }
    std::vector<SensitivityCell> cells;
    for (const auto& test : tests) {
        for (std::size_t i = 0; i < nulls.size(); ++i) {
            const auto cv = critical_value(dists[i].at(test.name), alpha);
            for (std::size_t j = 0; j < nulls.size(); ++j) {
                cells.push_back({test.name, nulls[i], nulls[j], cv,
                                 dists[j].at(test.name).tail_probability(cv.q_alpha)});
            }
        }
    }
    return cells;
}

}  // namespace aptest
