#include "aptest/outcome_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "aptest/errors.hpp"

namespace aptest {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

std::string num(double x) {
    std::ostringstream os;
    os.precision(12);
    os << x;
    return os.str();
}

// Exact integer test for summation bounds.
bool is_whole(double x) { return x >= 1.0 && x < 9.0e15 && x == std::floor(x); }

double xlogy(double a, double y) { return a == 0.0 ? 0.0 : a * std::log(y); }

constexpr double kLowerClamp = 1e-300;
const double kUpperClamp = std::nextafter(1.0, 0.0);

double clamp_open(double p) { return std::clamp(p, kLowerClamp, kUpperClamp); }

// Running sum that rescales when it grows large. Terms are relative to a
// leading term whose log is known, so the sum never under- or overflows.
struct ScaledSum {
    double term = 1.0;
    double sum = 1.0;
    double log_scale = 0.0;

    void push(double ratio) {
        term *= ratio;
        sum += term;
        if (sum > 1e280) {
            term *= 1e-280;
            sum *= 1e-280;
            log_scale += 280.0 * std::log(10.0);
        }
    }
    double value(double log_first_term) const {
        return std::exp(log_first_term + log_scale + std::log(sum));
    }
};

// P(K <= m) for K ~ NegativeBinomial(shape a, success probability p), with
// pmf Γ(a+k)/(Γ(a) k!) p^a q^k and q = 1 - p passed separately for accuracy.
// Equal to P(λ1 > λ0) for λ0 ~ Gamma(a, b0), λ1 ~ Gamma(m + 1, b1) and
// p = b0 / (b0 + b1).
double negbin_cdf(double a, double p, double q, long m) {
    ScaledSum acc;
    for (long k = 1; k <= m; ++k) {
        const double ratio = (a + static_cast<double>(k) - 1.0) * q / static_cast<double>(k);
        acc.push(ratio);
        // Past the mode the ratios are decreasing (a >= 1) or bounded by q
        // (a < 1), so the remaining tail is below a geometric series.
        const double next = (a + static_cast<double>(k)) * q / static_cast<double>(k + 1);
        const double bound = a < 1.0 ? std::max(next, q) : next;
        if (bound < 1.0 && acc.term * bound / (1.0 - bound) < 1e-17 * acc.sum) break;
    }
    return acc.value(a * std::log(p));
}

// P(p1 > p0) for p1 ~ Beta(a1, b1), p0 ~ Beta(a0, b0) with integer a1:
//   sum_{i<a1} B(a0+i, b0+b1) / ((b1+i) B(1+i, b1) B(a0, b0)).
double beta_superiority_sum(double a1, double b1, double a0, double b0) {
    using boost::math::lgamma;
    // log B(a0, b0+b1) - log B(a0, b0)
    const double log_first = lgamma(b0 + b1) - lgamma(a0 + b0 + b1) - lgamma(b0) + lgamma(a0 + b0);
    ScaledSum acc;
    const long terms = static_cast<long>(a1);
    for (long i = 1; i < terms; ++i) {
        const double di = static_cast<double>(i);
        acc.push((a0 + di - 1.0) * (b1 + di - 1.0) / ((a0 + b0 + b1 + di - 1.0) * di));
    }
    return acc.value(log_first);
}

struct GammaPosterior {
    double shape;
    double rate;
};

GammaPosterior gamma_posterior(const ArmPosterior& arm, const GammaPrior& prior) {
    GammaPosterior post{prior.shape + arm.n, prior.rate + arm.sum};
    if (!positive_finite(post.rate) || !positive_finite(post.shape)) {
        throw NumericalError("improper Gamma posterior: shape=" + num(post.shape) +
                             " rate=" + num(post.rate) + " (n=" + std::to_string(arm.n) + ")");
    }
    return post;
}

struct BetaPosterior {
    double a;
    double b;
};

BetaPosterior beta_posterior(const ArmPosterior& arm, const BetaPrior& prior) {
    return {prior.alpha + arm.sum, prior.beta + static_cast<double>(arm.n) - arm.sum};
}

struct NormalPosterior {
    double mean;
    double variance;
};

NormalPosterior normal_posterior(const ArmPosterior& arm, const NormalPrior& prior) {
    const double noise_var = arm.noise_sd * arm.noise_sd;
    const double precision = 1.0 / prior.variance + static_cast<double>(arm.n) / noise_var;
    const double mean = (prior.mean / prior.variance + arm.sum / noise_var) / precision;
    return {mean, 1.0 / precision};
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Larger-is-better superiority in closed form; `ok` is false when neither shape is whole.
double gamma_closed_form(const GammaPosterior& exp, const GammaPosterior& ctrl, bool& ok) {
    const double total = exp.rate + ctrl.rate;
    const double p = ctrl.rate / total;  // weight on the control rate
    const double q = exp.rate / total;
    const bool exp_whole = is_whole(exp.shape);
    const bool ctrl_whole = is_whole(ctrl.shape);
    ok = true;
    // Sum over the shorter side; the mirrored call takes the complement of the same sum.
    if (exp_whole && (!ctrl_whole || exp.shape <= ctrl.shape)) {
        return negbin_cdf(ctrl.shape, p, q, static_cast<long>(exp.shape) - 1);
    }
    if (ctrl_whole) {
        return 1.0 - negbin_cdf(exp.shape, q, p, static_cast<long>(ctrl.shape) - 1);
    }
    ok = false;
    return 0.0;
}

double beta_closed_form(const BetaPosterior& exp, const BetaPosterior& ctrl, bool& ok) {
    const bool exp_whole = is_whole(exp.a);
    const bool ctrl_whole = is_whole(ctrl.a);
    ok = true;
    if (exp_whole && (!ctrl_whole || exp.a <= ctrl.a)) {
        return beta_superiority_sum(exp.a, exp.b, ctrl.a, ctrl.b);
    }
    if (ctrl_whole) {
        return 1.0 - beta_superiority_sum(ctrl.a, ctrl.b, exp.a, exp.b);
    }
    ok = false;
    return 0.0;
}

// ---- quadrature route ------------------------------------------------------

constexpr double kQuadratureTolerance = 1e-10;

template <class F>
double integrate_pieces(F f, std::vector<double> breaks, const std::string& what) {
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    boost::math::quadrature::tanh_sinh<double> integrator;
    double total = 0.0;
    double total_error = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        if (!(breaks[i] < breaks[i + 1])) continue;
        double error = 0.0;
        total += integrator.integrate(f, breaks[i], breaks[i + 1], 1e-13, &error);
        total_error += error;
    }
    if (!std::isfinite(total) || total_error > kQuadratureTolerance) {
        throw NumericalError("quadrature did not converge for " + what + ": value=" + num(total) +
                             " error=" + num(total_error));
    }
    return total;
}

// Breakpoints for a Beta(a, b) density: interval end points plus the mode ± 8 SD.
std::vector<double> beta_breaks(double a, double b, double lo, double hi) {
    std::vector<double> breaks{lo, hi};
    const double sd = std::sqrt(a * b / ((a + b) * (a + b) * (a + b + 1.0)));
    const double centre = (a > 1.0 && b > 1.0) ? (a - 1.0) / (a + b - 2.0) : a / (a + b);
    for (double c : {centre - 8.0 * sd, centre, centre + 8.0 * sd}) {
        if (c > lo && c < hi) breaks.push_back(c);
    }
    return breaks;
}

double log_beta_density(double x, double a, double b) {
    using boost::math::lgamma;
    return xlogy(a - 1.0, x) + xlogy(b - 1.0, 1.0 - x) - (lgamma(a) + lgamma(b) - lgamma(a + b));
}

double larger_is_better_quadrature(const ArmPosterior& exp, const ArmPosterior& ctrl,
                                   const PriorSpec& prior) {
    return std::visit(
        Overloaded{
            [&](const GammaPrior& g) {
                const auto e = gamma_posterior(exp, g);
                const auto c = gamma_posterior(ctrl, g);
                // V = G1/(G1+G0) ~ Beta(a1, a0); λ1 > λ0 iff V > b1/(b0+b1).
                const double cut = e.rate / (e.rate + c.rate);
                auto density = [&](double v) {
                    return std::exp(log_beta_density(v, e.shape, c.shape));
                };
                return integrate_pieces(density, beta_breaks(e.shape, c.shape, cut, 1.0),
                                        "gamma superiority");
            },
            [&](const BetaPrior& bp) {
                const auto e = beta_posterior(exp, bp);
                const auto c = beta_posterior(ctrl, bp);
                auto integrand = [&](double x) {
                    return std::exp(log_beta_density(x, c.a, c.b)) *
                           boost::math::ibetac(e.a, e.b, x);
                };
                return integrate_pieces(integrand, beta_breaks(c.a, c.b, 0.0, 1.0),
                                        "beta superiority");
            },
            [&](const NormalPrior& np) {
                const auto e = normal_posterior(exp, np);
                const auto c = normal_posterior(ctrl, np);
                const double sd_c = std::sqrt(c.variance);
                const double sd_e = std::sqrt(e.variance);
                auto integrand = [&](double x) {
                    const double z = (x - c.mean) / sd_c;
                    const double density = std::exp(-0.5 * z * z) / (sd_c * std::sqrt(2.0 * M_PI));
                    return density * 0.5 * std::erfc((x - e.mean) / (sd_e * std::sqrt(2.0)));
                };
                std::vector<double> breaks{c.mean - 12.0 * sd_c, c.mean, c.mean + 12.0 * sd_c};
                if (e.mean > breaks.front() && e.mean < breaks.back()) breaks.push_back(e.mean);
                return integrate_pieces(integrand, breaks, "normal superiority");
            },
        },
        prior.kind());
}

}  // namespace

std::string to_string(FamilyKind kind) {
    switch (kind) {
        case FamilyKind::Exponential: return "exponential";
        case FamilyKind::Bernoulli: return "bernoulli";
        case FamilyKind::Normal: return "normal";
    }
    return "unknown";
}

std::string to_string(Direction direction) {
    return direction == Direction::LargerIsBetter ? "larger_is_better" : "smaller_is_better";
}

// ---- OutcomeModel ----------------------------------------------------------

OutcomeModel::OutcomeModel(Family family, Direction direction)
    : family_(family), direction_(direction) {
    std::visit(Overloaded{
                   [](const Exponential& m) {
                       if (!positive_finite(m.rate_control) || !positive_finite(m.rate_experimental))
                           throw ConfigError("exponential rates must be positive and finite");
                   },
                   [](const Bernoulli& m) {
                       auto ok = [](double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; };
                       if (!ok(m.p_control) || !ok(m.p_experimental))
                           throw ConfigError("success probabilities must lie in [0, 1]");
                   },
                   [](const NormalKnownVar& m) {
                       if (!std::isfinite(m.mean_control) || !std::isfinite(m.mean_experimental))
                           throw ConfigError("normal means must be finite");
                       if (!positive_finite(m.sd_control) || !positive_finite(m.sd_experimental))
                           throw ConfigError("normal standard deviations must be positive");
                   },
               },
               family_);
}

OutcomeModel OutcomeModel::exponential(double rate_control, double rate_experimental,
                                       Direction direction) {
    return OutcomeModel(Exponential{rate_control, rate_experimental}, direction);
}

OutcomeModel OutcomeModel::bernoulli(double p_control, double p_experimental, Direction direction) {
    return OutcomeModel(Bernoulli{p_control, p_experimental}, direction);
}

OutcomeModel OutcomeModel::normal(double mean_control, double mean_experimental, double sd_control,
                                  double sd_experimental, Direction direction) {
    return OutcomeModel(NormalKnownVar{mean_control, mean_experimental, sd_control, sd_experimental},
                        direction);
}

FamilyKind OutcomeModel::kind() const noexcept {
    return static_cast<FamilyKind>(family_.index());
}

double OutcomeModel::parameter(Arm arm) const noexcept {
    const bool ctrl = arm == Arm::Control;
    return std::visit(Overloaded{
                          [&](const Exponential& m) { return ctrl ? m.rate_control : m.rate_experimental; },
                          [&](const Bernoulli& m) { return ctrl ? m.p_control : m.p_experimental; },
                          [&](const NormalKnownVar& m) { return ctrl ? m.mean_control : m.mean_experimental; },
                      },
                      family_);
}

double OutcomeModel::known_sd(Arm arm) const noexcept {
    if (const auto* m = std::get_if<NormalKnownVar>(&family_)) {
        return arm == Arm::Control ? m->sd_control : m->sd_experimental;
    }
    return 1.0;
}

double OutcomeModel::expected_outcome(Arm arm) const noexcept {
    const double theta = parameter(arm);
    return kind() == FamilyKind::Exponential ? 1.0 / theta : theta;
}

bool OutcomeModel::arms_equal() const noexcept {
    return parameter(Arm::Control) == parameter(Arm::Experimental);
}

std::optional<Arm> OutcomeModel::better_arm() const noexcept {
    const double c = parameter(Arm::Control);
    const double e = parameter(Arm::Experimental);
    if (c == e) return std::nullopt;
    const bool exp_larger = e > c;
    const bool larger_better = direction_ == Direction::LargerIsBetter;
    return exp_larger == larger_better ? Arm::Experimental : Arm::Control;
}

OutcomeModel OutcomeModel::with_arms_swapped() const {
    return std::visit(
        Overloaded{
            [&](const Exponential& m) {
                return OutcomeModel(Exponential{m.rate_experimental, m.rate_control}, direction_);
            },
            [&](const Bernoulli& m) {
                return OutcomeModel(Bernoulli{m.p_experimental, m.p_control}, direction_);
            },
            [&](const NormalKnownVar& m) {
                return OutcomeModel(NormalKnownVar{m.mean_experimental, m.mean_control,
                                                   m.sd_experimental, m.sd_control},
                                    direction_);
            },
        },
        family_);
}

OutcomeModel OutcomeModel::null_at_control() const {
    return std::visit(
        Overloaded{
            [&](const Exponential& m) {
                return OutcomeModel(Exponential{m.rate_control, m.rate_control}, direction_);
            },
            [&](const Bernoulli& m) {
                return OutcomeModel(Bernoulli{m.p_control, m.p_control}, direction_);
            },
            [&](const NormalKnownVar& m) {
                return OutcomeModel(
                    NormalKnownVar{m.mean_control, m.mean_control, m.sd_control, m.sd_control},
                    direction_);
            },
        },
        family_);
}

std::string OutcomeModel::describe() const {
    std::string out = to_string(kind()) + "(" + num(parameter(Arm::Control)) + "," +
                      num(parameter(Arm::Experimental));
    if (kind() == FamilyKind::Normal) {
        out += ";sd=" + num(known_sd(Arm::Control)) + "," + num(known_sd(Arm::Experimental));
    }
    out += ")";
    if (direction_ == Direction::SmallerIsBetter) out += "[smaller_is_better]";
    return out;
}

// ---- PriorSpec -------------------------------------------------------------

PriorSpec PriorSpec::gamma(double shape, double rate) {
    if (!positive_finite(shape) || !positive_finite(rate))
        throw ConfigError("gamma prior shape and rate must be positive");
    return PriorSpec(GammaPrior{shape, rate});
}

PriorSpec PriorSpec::beta(double alpha, double beta) {
    if (!positive_finite(alpha) || !positive_finite(beta))
        throw ConfigError("beta prior parameters must be positive");
    return PriorSpec(BetaPrior{alpha, beta});
}

PriorSpec PriorSpec::normal(double mean, double variance) {
    if (!std::isfinite(mean) || !positive_finite(variance))
        throw ConfigError("normal prior needs a finite mean and a positive variance");
    return PriorSpec(NormalPrior{mean, variance});
}

PriorSpec PriorSpec::improper_gamma_for_testing(double shape) {
    if (!positive_finite(shape)) throw ConfigError("gamma prior shape must be positive");
    return PriorSpec(GammaPrior{shape, 0.0}, true);
}

PriorSpec PriorSpec::default_for(FamilyKind kind) {
    switch (kind) {
        case FamilyKind::Exponential: return gamma(1.0, 0.001);
        case FamilyKind::Bernoulli: return beta(1.0, 1.0);
        case FamilyKind::Normal: return normal(0.0, 1e6);
    }
    throw ConfigError("unknown outcome family");
}

FamilyKind PriorSpec::family() const noexcept { return static_cast<FamilyKind>(kind_.index()); }

std::string PriorSpec::describe() const {
    return std::visit(
        Overloaded{
            [](const GammaPrior& g) { return "gamma(" + num(g.shape) + "," + num(g.rate) + ")"; },
            [](const BetaPrior& b) { return "beta(" + num(b.alpha) + "," + num(b.beta) + ")"; },
            [](const NormalPrior& n) { return "normal(" + num(n.mean) + "," + num(n.variance) + ")"; },
        },
        kind_);
}

// ---- posterior state -------------------------------------------------------

PosteriorState PosteriorState::for_model(const OutcomeModel& model) {
    PosteriorState state(model.kind());
    state.arms_[0].noise_sd = model.known_sd(Arm::Control);
    state.arms_[1].noise_sd = model.known_sd(Arm::Experimental);
    return state;
}

void PosteriorState::observe(Arm arm, double outcome) {
    switch (kind_) {
        case FamilyKind::Exponential:
            if (!std::isfinite(outcome) || outcome < 0.0)
                throw InputError("exponential outcome must be a non-negative time, got " + num(outcome));
            break;
        case FamilyKind::Bernoulli:
            if (outcome != 0.0 && outcome != 1.0)
                throw InputError("binary outcome must be 0 or 1, got " + num(outcome));
            break;
        case FamilyKind::Normal:
            if (!std::isfinite(outcome)) throw InputError("normal outcome must be finite");
            break;
    }
    auto& a = arms_[index_of(arm)];
    a.n += 1;
    a.sum += outcome;
}

PosteriorState update_posterior(PosteriorState state, Arm arm, double outcome) {
    state.observe(arm, outcome);
    return state;
}

double sample_outcome(const OutcomeModel& model, Arm arm, Rng& rng) {
    const bool ctrl = arm == Arm::Control;
    return std::visit(
        Overloaded{
            [&](const Exponential& m) {
                return std::exponential_distribution<double>(ctrl ? m.rate_control
                                                                  : m.rate_experimental)(rng);
            },
            [&](const Bernoulli& m) {
                return uniform01(rng) < (ctrl ? m.p_control : m.p_experimental) ? 1.0 : 0.0;
            },
            [&](const NormalKnownVar& m) {
                return std::normal_distribution<double>(ctrl ? m.mean_control : m.mean_experimental,
                                                        ctrl ? m.sd_control : m.sd_experimental)(rng);
            },
        },
        model.family());
}

// ---- superiority -----------------------------------------------------------

double superiority_probability(const ArmPosterior& experimental, const ArmPosterior& control,
                               const PriorSpec& prior, Direction direction) {
    double larger = std::visit(
        Overloaded{
            [&](const GammaPrior& g) {
                bool ok = false;
                const double p = gamma_closed_form(gamma_posterior(experimental, g),
                                                   gamma_posterior(control, g), ok);
                return ok ? p : larger_is_better_quadrature(experimental, control, prior);
            },
            [&](const BetaPrior& b) {
                bool ok = false;
                const double p =
                    beta_closed_form(beta_posterior(experimental, b), beta_posterior(control, b), ok);
                return ok ? p : larger_is_better_quadrature(experimental, control, prior);
            },
            [&](const NormalPrior& n) {
                const auto e = normal_posterior(experimental, n);
                const auto c = normal_posterior(control, n);
                return normal_cdf((e.mean - c.mean) / std::sqrt(e.variance + c.variance));
            },
        },
        prior.kind());
    if (!std::isfinite(larger)) {
        throw NumericalError("non-finite superiority probability (n_exp=" +
                             std::to_string(experimental.n) + ", n_ctrl=" +
                             std::to_string(control.n) + ")");
    }
    if (direction == Direction::SmallerIsBetter) larger = 1.0 - larger;
    return clamp_open(larger);
}

double superiority_probability_quadrature(const ArmPosterior& experimental,
                                          const ArmPosterior& control, const PriorSpec& prior,
                                          Direction direction) {
    double larger = larger_is_better_quadrature(experimental, control, prior);
    if (direction == Direction::SmallerIsBetter) larger = 1.0 - larger;
    return clamp_open(larger);
}

}  // namespace aptest
