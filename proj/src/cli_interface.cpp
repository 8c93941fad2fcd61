#include "aptest/cli_interface.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "aptest/format.hpp"
#include "aptest/report_io.hpp"

namespace aptest {

using json = nlohmann::json;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};

// ---- JSON reading with paths ------------------------------------------------

class Node {
public:
    Node(const json& j, std::string path) : j_(&j), path_(std::move(path)) {}

    const std::string& path() const { return path_; }
    const json& raw() const { return *j_; }

    [[noreturn]] void fail(const std::string& what) const { throw ConfigError(what, path_); }

    void expect_object(std::initializer_list<std::string_view> allowed) const {
        if (!j_->is_object()) fail("expected an object");
        for (const auto& [key, value] : j_->items()) {
            if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
                throw ConfigError("unknown key", path_ + "." + key);
        }
    }

    bool has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

    Node at(const std::string& key) const {
        if (!has(key)) throw ConfigError("missing required key", path_ + "." + key);
        return {j_->at(key), path_ + "." + key};
    }

    std::optional<Node> get(const std::string& key) const {
        if (!has(key)) return std::nullopt;
        return Node(j_->at(key), path_ + "." + key);
    }

    double number() const {
        if (!j_->is_number()) fail("expected a number");
        const double x = j_->get<double>();
        if (!std::isfinite(x)) fail("expected a finite number");
        return x;
    }

    long integer() const {
        if (j_->is_number_integer()) return j_->get<long>();
        if (j_->is_number_float()) {
            const double x = j_->get<double>();
            if (std::isfinite(x) && x == std::floor(x) && std::abs(x) < 9e15)
                return static_cast<long>(x);
        }
        fail("expected an integer");
    }

    std::uint64_t unsigned_integer() const {
        if (j_->is_number_unsigned()) return j_->get<std::uint64_t>();
        const long v = integer();
        if (v < 0) fail("expected a non-negative integer");
        return static_cast<std::uint64_t>(v);
    }

    std::string str() const {
        if (!j_->is_string()) fail("expected a string");
        return j_->get<std::string>();
    }

    bool boolean() const {
        if (!j_->is_boolean()) fail("expected true or false");
        return j_->get<bool>();
    }

    std::vector<Node> array() const {
        if (!j_->is_array()) fail("expected an array");
        std::vector<Node> out;
        for (std::size_t i = 0; i < j_->size(); ++i)
            out.emplace_back((*j_)[i], path_ + "[" + std::to_string(i) + "]");
        return out;
    }

private:
    const json* j_;
    std::string path_;
};

/// Attaches `path` to ConfigErrors raised by domain constructors.
template <class Fn>
auto at_path(const std::string& path, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        if (!e.path().empty()) throw;
        throw ConfigError(e.what(), path);
    }
}

FamilyKind family_from_string(const Node& n) {
    const auto s = n.str();
    if (s == "exponential") return FamilyKind::Exponential;
    if (s == "binary" || s == "bernoulli") return FamilyKind::Bernoulli;
    if (s == "normal") return FamilyKind::Normal;
    n.fail("unknown family '" + s + "' (expected exponential, binary or normal)");
}

Direction direction_from_string(const Node& n) {
    const auto s = n.str();
    if (s == "larger_is_better") return Direction::LargerIsBetter;
    if (s == "smaller_is_better") return Direction::SmallerIsBetter;
    n.fail("unknown direction '" + s + "'");
}

PriorSpec parse_prior(const Node& n, FamilyKind family) {
    return at_path(n.path(), [&] {
        switch (family) {
            case FamilyKind::Exponential:
                n.expect_object({"shape", "rate"});
                return PriorSpec::gamma(n.at("shape").number(), n.at("rate").number());
            case FamilyKind::Bernoulli:
                n.expect_object({"alpha", "beta"});
                return PriorSpec::beta(n.at("alpha").number(), n.at("beta").number());
            case FamilyKind::Normal:
                n.expect_object({"mean", "variance"});
                return PriorSpec::normal(n.at("mean").number(), n.at("variance").number());
        }
        n.fail("unknown family");
    });
}

OutcomeModel make_model(FamilyKind family, double control, double experimental,
                        std::pair<double, double> sd, Direction direction) {
    switch (family) {
        case FamilyKind::Exponential: return OutcomeModel::exponential(control, experimental, direction);
        case FamilyKind::Bernoulli: return OutcomeModel::bernoulli(control, experimental, direction);
        case FamilyKind::Normal:
            return OutcomeModel::normal(control, experimental, sd.first, sd.second, direction);
    }
    throw ConfigError("unknown family");
}

TestSpec parse_test(const Node& n, FamilyKind family, int design_t_min) {
    if (n.raw().is_string()) {
        const auto s = n.str();
        if (s == "original") return TestSpec::original(design_t_min);
        if (s == "timedirect") return TestSpec::timedirect(design_t_min);
        if (s == "lastblock") return TestSpec::last_block(design_t_min);
        for (auto kind : {ComparatorKind::LikelihoodRatio, ComparatorKind::FisherExact,
                          ComparatorKind::ZTest}) {
            if (s == to_string(kind)) {
                if (kind != comparator_for(family))
                    n.fail("test '" + s + "' does not apply to " + to_string(family) + " outcomes");
                return TestSpec::comparator(kind);
            }
        }
        n.fail("unknown test '" + s + "'");
    }
    n.expect_object({"name", "transform", "weights", "t_min"});
    const auto name = n.at("name").str();
    if (name.empty()) n.at("name").fail("test name must not be empty");

    APTestSpec::Transform f = Identity{};
    if (auto t = n.get("transform")) {
        if (t->raw().is_string()) {
            const auto s = t->str();
            if (s == "identity") f = Identity{};
            else if (s == "indicator") f = Indicator{};
            else t->fail("unknown transform '" + s + "'");
        } else {
            t->expect_object({"indicator"});
            const auto ind = t->at("indicator");
            ind.expect_object({"threshold", "strict"});
            Indicator i;
            if (auto th = ind.get("threshold")) i.threshold = th->number();
            if (auto st = ind.get("strict")) i.strict = st->boolean();
            f = i;
        }
    }
    APTestSpec::Weights w = OnesWeights{};
    if (auto wn = n.get("weights")) {
        if (wn->raw().is_string()) {
            const auto s = wn->str();
            if (s == "ones") w = OnesWeights{};
            else if (s == "time") w = TimeWeights{};
            else if (s == "last_block") w = LastBlockWeights{};
            else wn->fail("unknown weights '" + s + "'");
        } else {
            CustomWeights c;
            for (const auto& v : wn->array()) c.values.push_back(v.number());
            w = std::move(c);
        }
    }
    const int t_min = n.has("t_min") ? static_cast<int>(n.at("t_min").integer()) : design_t_min;
    return at_path(n.path(), [&] { return TestSpec{name, APTestSpec(f, w, t_min)}; });
}

std::vector<ScenarioSpec> parse_scenario(const Node& s) {
    s.expect_object({"name", "family", "direction", "design", "prior", "null", "alternatives", "sd",
                     "alpha", "tests", "er_comparator", "modes", "replicates_eval",
                     "replicates_calib", "seed", "figure"});
    ScenarioSpec spec;
    spec.name = s.at("name").str();
    if (spec.name.empty()) s.at("name").fail("scenario name must not be empty");
    const FamilyKind family = family_from_string(s.at("family"));
    const Direction direction =
        s.has("direction") ? direction_from_string(s.at("direction")) : Direction::LargerIsBetter;

    std::pair<double, double> sd{1.0, 1.0};
    if (auto n = s.get("sd")) {
        if (family != FamilyKind::Normal) n->fail("sd applies to the normal family only");
        if (n->raw().is_array()) {
            const auto v = n->array();
            if (v.size() != 2) n->fail("expected [sd_control, sd_experimental]");
            sd = {v[0].number(), v[1].number()};
        } else {
            sd = {n->number(), n->number()};
        }
    }

    double null_param = 1.0;
    if (auto n = s.get("null")) {
        null_param = n->number();
    } else if (family != FamilyKind::Exponential) {
        throw ConfigError(
            "a null parameter is required for " + to_string(family) +
                " outcomes; critical values depend on it (run a sensitivity sweep to choose)",
            s.path() + ".null");
    }
    spec.null_model = at_path(s.path() + ".null", [&] {
        return make_model(family, null_param, null_param, sd, direction);
    });
    if (auto n = s.get("alternatives")) {
        for (const auto& a : n->array()) {
            const double x = a.number();
            spec.alternatives.push_back(
                at_path(a.path(), [&] { return make_model(family, null_param, x, sd, direction); }));
        }
    }

    spec.prior = s.has("prior") ? parse_prior(s.at("prior"), family) : PriorSpec::default_for(family);
    if (auto n = s.get("alpha")) spec.alpha = n->number();
    if (auto n = s.get("er_comparator")) spec.er_comparator = n->boolean();
    if (auto n = s.get("modes")) {
        spec.modes.clear();
        for (const auto& m : n->array())
            spec.modes.push_back(at_path(m.path(), [&] { return eval_mode_from_string(m.str()); }));
    }
    if (auto n = s.get("replicates_eval")) spec.replicates_eval = n->integer();
    if (auto n = s.get("replicates_calib")) spec.replicates_calib = n->integer();
    if (auto n = s.get("seed")) spec.seed = n->unsigned_integer();
    if (auto n = s.get("figure")) {
        spec.figure = n->str();
        if (spec.figure != "fig1" && spec.figure != "fig2" && spec.figure != "fig3" &&
            spec.figure != "fig4")
            n->fail("figure must be one of fig1..fig4");
    }

    // Design layout.
    const auto d = s.at("design");
    d.expect_object({"N", "sample_sizes", "burn_in", "block_size", "kinds", "t_min",
                     "permuted_block_size"});
    std::vector<DesignKind> kinds{DesignKind::StandardBrar, DesignKind::TunedBrar};
    if (auto k = d.get("kinds")) {
        kinds.clear();
        for (const auto& kn : k->array())
            kinds.push_back(at_path(kn.path(), [&] { return design_kind_from_string(kn.str()); }));
        if (kinds.empty()) k->fail("at least one design kind is required");
    }
    const int t_min = d.has("t_min") ? static_cast<int>(d.at("t_min").integer()) : 1;
    const int pbs =
        d.has("permuted_block_size") ? static_cast<int>(d.at("permuted_block_size").integer()) : 8;

    std::vector<int> grid;
    if (d.has("sample_sizes")) {
        if (d.has("N")) d.fail("give either N or sample_sizes, not both");
        if (d.has("burn_in") || d.has("block_size"))
            d.fail("sample_sizes sweeps fix B=1 and burn-in N/10 (rounded to even); remove burn_in/block_size");
        for (const auto& n : d.at("sample_sizes").array()) grid.push_back(static_cast<int>(n.integer()));
        if (grid.empty()) d.at("sample_sizes").fail("empty sample-size grid");
        for (int n : grid)
            for (DesignKind k : kinds)
                at_path(d.path() + ".sample_sizes", [&] {
                    return DesignConfig::from_sample_size(n, sweep_burn_in(n), 1, k, t_min, pbs);
                });
        // Expanded per N by sample_size_grid below.
        for (DesignKind k : kinds)
            spec.designs.push_back(DesignConfig::from_sample_size(
                grid.front(), sweep_burn_in(grid.front()), 1, k, t_min, pbs));
    } else {
        const int n = static_cast<int>(d.at("N").integer());
        const int burn = static_cast<int>(d.at("burn_in").integer());
        const int block = d.has("block_size") ? static_cast<int>(d.at("block_size").integer()) : 1;
        for (DesignKind k : kinds)
            spec.designs.push_back(at_path(d.path(), [&] {
                return DesignConfig::from_sample_size(n, burn, block, k, t_min, pbs);
            }));
    }

    if (auto n = s.get("tests")) {
        for (const auto& t : n->array()) spec.tests.push_back(parse_test(t, family, t_min));
    } else {
        spec.tests = {TestSpec::original(t_min), TestSpec::timedirect(t_min),
                      TestSpec::last_block(t_min), TestSpec::comparator(comparator_for(family))};
    }
    // Custom weights must fit T; check against each design now for a pathful error.
    for (std::size_t i = 0; i < spec.tests.size(); ++i) {
        if (const auto* ap = std::get_if<APTestSpec>(&spec.tests[i].kind)) {
            if (const auto* c = std::get_if<CustomWeights>(&ap->weights())) {
                const auto expected = static_cast<std::size_t>(spec.designs.front().num_blocks() + 2 - ap->t_min());
                if (!grid.empty() || c->values.size() != expected)
                    throw ConfigError("custom weights need " + std::to_string(expected) +
                                          " values (t_min..T+1) and a fixed N",
                                      s.path() + ".tests[" + std::to_string(i) + "].weights");
            }
            if (ap->t_min() > spec.designs.front().num_blocks() + 1)
                throw ConfigError("t_min exceeds T+1", s.path() + ".tests[" + std::to_string(i) + "]");
        }
    }

    at_path(s.path(), [&] { spec.validate(); return 0; });
    if (grid.empty()) return {spec};
    return sample_size_grid(spec, grid);
}

json test_to_json(const TestSpec& t) {
    if (const auto* c = std::get_if<ComparatorKind>(&t.kind)) return to_string(*c);
    const auto& ap = std::get<APTestSpec>(t.kind);
    json j;
    j["name"] = t.name;
    if (const auto* ind = std::get_if<Indicator>(&ap.transform()))
        j["transform"] = {{"indicator", {{"threshold", ind->threshold}, {"strict", ind->strict}}}};
    else
        j["transform"] = "identity";
    std::visit(Overloaded{[&](const OnesWeights&) { j["weights"] = "ones"; },
                          [&](const TimeWeights&) { j["weights"] = "time"; },
                          [&](const LastBlockWeights&) { j["weights"] = "last_block"; },
                          [&](const CustomWeights& c) { j["weights"] = c.values; }},
               ap.weights());
    j["t_min"] = ap.t_min();
    return j;
}

json spec_to_json(const ScenarioSpec& s) {
    json j;
    j["name"] = s.name;
    const auto family = s.null_model.kind();
    j["family"] = family == FamilyKind::Bernoulli ? "binary" : to_string(family);
    j["direction"] = to_string(s.null_model.direction());
    const auto& d0 = s.designs.front();
    json design = {{"N", d0.total_n()},
                   {"burn_in", d0.burn_in()},
                   {"block_size", d0.block_size()},
                   {"t_min", d0.t_min()},
                   {"permuted_block_size", d0.permuted_block_size()}};
    json kinds = json::array();
    for (const auto& d : s.designs) kinds.push_back(to_string(d.kind()));
    design["kinds"] = kinds;
    j["design"] = design;
    std::visit(Overloaded{[&](const GammaPrior& g) { j["prior"] = {{"shape", g.shape}, {"rate", g.rate}}; },
                          [&](const BetaPrior& b) { j["prior"] = {{"alpha", b.alpha}, {"beta", b.beta}}; },
                          [&](const NormalPrior& n) {
                              j["prior"] = {{"mean", n.mean}, {"variance", n.variance}};
                          }},
               s.prior.kind());
    j["null"] = s.null_model.parameter(Arm::Control);
    if (family == FamilyKind::Normal)
        j["sd"] = {s.null_model.known_sd(Arm::Control), s.null_model.known_sd(Arm::Experimental)};
    json alts = json::array();
    for (const auto& a : s.alternatives) alts.push_back(a.parameter(Arm::Experimental));
    j["alternatives"] = alts;
    j["alpha"] = s.alpha;
    json tests = json::array();
    for (const auto& t : s.tests) tests.push_back(test_to_json(t));
    j["tests"] = tests;
    j["er_comparator"] = s.er_comparator;
    json modes = json::array();
    for (auto m : s.modes) modes.push_back(to_string(m));
    j["modes"] = modes;
    j["replicates_eval"] = s.replicates_eval;
    j["replicates_calib"] = s.replicates_calib;
    j["seed"] = s.seed;
    if (!s.figure.empty()) j["figure"] = s.figure;
    return j;
}

// ---- presets ------------------------------------------------------------------

json base_exponential(const std::string& name) {
    return {{"name", name},
            {"family", "exponential"},
            {"prior", {{"shape", 1}, {"rate", 0.001}}},
            {"null", 1.0},
            {"alternatives", {1.2, 1.4, 1.6, 1.8, 2.0}},
            {"tests", {"original", "timedirect", "lastblock", "lr"}},
            {"er_comparator", true},
            {"seed", 20240611}};
}

json preset_document(const std::string& base) {
    json scenarios = json::array();
    if (base == "phase2") {
        json s = base_exponential("phase2");
        s["design"] = {{"N", 100}, {"burn_in", 10}, {"block_size", 1}};
        s["alpha"] = 0.10;
        s["modes"] = {"nominal", "calibrated"};
        s["figure"] = "fig1";
        scenarios.push_back(s);
    } else if (base == "phase3") {
        json s = base_exponential("phase3");
        s["design"] = {{"N", 500}, {"burn_in", 50}, {"block_size", 10}};
        s["alpha"] = 0.05;
        s["modes"] = {"nominal", "calibrated"};
        s["figure"] = "fig2";
        scenarios.push_back(s);
    } else if (base == "type1-curve") {
        json s = base_exponential("type1");
        s["design"] = {{"sample_sizes", {100, 200, 300, 400, 500}}};
        s["alternatives"] = json::array();
        s["alpha"] = 0.05;
        s["modes"] = {"nominal", "calibrated"};
        s["figure"] = "fig3";
        scenarios.push_back(s);
    } else if (base == "large-sample") {
        json s = base_exponential("large");
        json grid = json::array();
        for (int n : kDefaultLargeSampleGrid) grid.push_back(n);
        s["design"] = {{"sample_sizes", grid}, {"kinds", {"standard_brar"}}};
        s["alternatives"] = {1.5, 2.0};
        s["alpha"] = 0.05;
        s["modes"] = {"nominal", "calibrated"};
        s["figure"] = "fig4";
        scenarios.push_back(s);
    } else if (base == "empirical-exponential") {
        json s = base_exponential("empirical-exponential");
        s["design"] = {{"N", 121}, {"burn_in", 12}, {"block_size", 1}};
        s["null"] = 0.002;
        s["alternatives"] = {0.0035};
        s["alpha"] = 0.05;
        s["modes"] = {"calibrated"};
        scenarios.push_back(s);
    } else if (base == "empirical-binary") {
        json s = {{"name", "empirical-binary"},
                  {"family", "binary"},
                  {"prior", {{"alpha", 1}, {"beta", 1}}},
                  {"null", 0.7},
                  {"alternatives", {0.9}},
                  {"tests", {"original", "timedirect", "lastblock", "fisher"}},
                  {"er_comparator", true},
                  {"seed", 20240611}};
        s["design"] = {{"N", 121}, {"burn_in", 12}, {"block_size", 1}};
        s["alpha"] = 0.05;
        s["modes"] = {"calibrated"};
        scenarios.push_back(s);
    } else {
        throw ConfigError("unknown preset '" + base + "'");
    }
    return {{"scenarios", scenarios}};
}

}  // namespace

// ---- public API -----------------------------------------------------------------

std::vector<ScenarioSpec> parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what(), "$");
    }
    const Node root(doc, "$");
    root.expect_object({"scenarios"});
    std::vector<ScenarioSpec> specs;
    for (const auto& s : root.at("scenarios").array()) {
        auto expanded = parse_scenario(s);
        specs.insert(specs.end(), expanded.begin(), expanded.end());
    }
    if (specs.empty()) root.at("scenarios").fail("no scenarios");
    std::set<std::string> names;
    for (const auto& s : specs)
        if (!names.insert(s.name).second) throw ConfigError("duplicate scenario name '" + s.name + "'", "$.scenarios");
    return specs;
}

std::vector<ScenarioSpec> load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string specs_to_json(const std::vector<ScenarioSpec>& specs) {
    json scenarios = json::array();
    for (const auto& s : specs) scenarios.push_back(spec_to_json(s));
    return json{{"scenarios", scenarios}}.dump(2) + "\n";
}

std::vector<std::string> preset_names() {
    std::vector<std::string> out;
    for (const char* base : {"phase2", "phase3", "type1-curve", "large-sample",
                             "empirical-exponential", "empirical-binary"}) {
        out.emplace_back(base);
        out.emplace_back(std::string(base) + "-desk");
    }
    return out;
}

std::string preset_config(const std::string& name) {
    const std::string suffix = "-desk";
    const bool desk = name.size() > suffix.size() && name.ends_with(suffix);
    json doc = preset_document(desk ? name.substr(0, name.size() - suffix.size()) : name);
    for (auto& s : doc["scenarios"]) {
        s["replicates_calib"] = desk ? 100'000 : 1'000'000;
        s["replicates_eval"] = desk ? 10'000 : 100'000;
        if (desk) s["name"] = s["name"].get<std::string>() + suffix;
    }
    return doc.dump(2) + "\n";
}

std::vector<ScenarioSpec> load_preset(const std::string& name) {
    return parse_config(preset_config(name));
}

void apply_overrides(std::vector<ScenarioSpec>& specs, const Overrides& o) {
    for (auto& s : specs) {
        if (o.seed) s.seed = *o.seed;
        if (o.alpha) s.alpha = *o.alpha;
        if (o.replicates_eval) s.replicates_eval = *o.replicates_eval;
        if (o.replicates_calib) s.replicates_calib = *o.replicates_calib;
        if (o.modes) s.modes = *o.modes;
        s.validate();
    }
}

void read_observed_trial(std::istream& in, std::vector<Arm>& allocations,
                         std::vector<double>& outcomes) {
    allocations.clear();
    outcomes.clear();
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream row(line);
        std::string arm_text, outcome_text;
        row >> arm_text >> outcome_text;
        if (arm_text.empty()) continue;
        if (line_no == 1 && arm_text == "arm") continue;
        char* end = nullptr;
        const double outcome = std::strtod(outcome_text.c_str(), &end);
        if (outcome_text.empty() || *end != '\0')
            throw InputError("line " + std::to_string(line_no) + ": bad outcome '" + outcome_text + "'");
        if (arm_text == "0") allocations.push_back(Arm::Control);
        else if (arm_text == "1") allocations.push_back(Arm::Experimental);
        else throw InputError("line " + std::to_string(line_no) + ": arm must be 0 or 1");
        outcomes.push_back(outcome);
    }
}

ObservedAnalysis analyze_observed_trial(const ScenarioSpec& spec, std::span<const Arm> allocations,
                                        std::span<const double> outcomes, unsigned threads,
                                        const PooledOptions& pooled) {
    const auto& design = spec.designs.front();
    if (static_cast<int>(allocations.size()) != design.total_n())
        throw InputError("observed trial has " + std::to_string(allocations.size()) +
                         " subjects; the design expects " + std::to_string(design.total_n()));
    const Direction direction = spec.null_model.direction();
    const auto initial = PosteriorState::for_model(spec.null_model);

    TrialTrajectory traj;
    traj.burn_in = design.burn_in();
    traj.block_size = design.block_size();
    traj.num_blocks = design.num_blocks();
    traj.allocations.assign(allocations.begin(), allocations.end());
    traj.outcomes.assign(outcomes.begin(), outcomes.end());
    traj.alloc_probs =
        replay_allocation_probabilities(design, spec.prior, direction, initial, allocations, outcomes);
    traj.final_posterior = initial;
    for (std::size_t i = 0; i < allocations.size(); ++i)
        traj.final_posterior.observe(allocations[i], outcomes[i]);

    ObservedAnalysis out{traj, pooled_null_model(traj, direction, pooled), {}};
    const auto critical =
        calibrate_under_pooled(traj, design, spec.prior, direction, spec.tests, spec.alpha,
                               spec.replicates_calib, spec.seed, threads, pooled);
    for (const auto& test : spec.tests) {
        const auto stat = evaluate_statistic(test, traj);
        out.decisions.push_back(
            make_decision(test.name, stat.value, critical.at(test.name).q_alpha, spec.alpha));
    }
    return out;
}

namespace {

void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::ios_base::failure("cannot open " + path.string() + " for writing");
    body(out);
    out.flush();
    if (!out) throw std::ios_base::failure("failed writing " + path.string());
}

void print_summary(std::ostream& log, const ScenarioSpec& spec, const PerformanceReport& report) {
    log << "== " << spec.name << "  (" << report.wall_time_seconds << " s)\n";
    log << "  design          param_exp  test         mode        reject   mc_se   %better  outcome\n";
    for (const auto& r : report.rows) {
        char line[256];
        std::snprintf(line, sizeof line, "  %-15s %-10s %-12s %-11s %6.2f%%  %.4f  %7s  %s\n",
                      to_string(r.design.kind()).c_str(),
                      format_double(r.model.parameter(Arm::Experimental)).c_str(), r.test.c_str(),
                      to_string(r.mode).c_str(), 100.0 * r.rejection_rate, r.mc_se,
                      format_fixed(r.benefit.pct_better_mean, 1).c_str(),
                      format_fixed(r.benefit.mean_outcome, 3).c_str());
        log << line;
    }
}

}  // namespace

int run(const RunManifest& manifest, std::ostream& log) {
    PerformanceReport all;
    try {
        for (const auto& spec : manifest.specs) {
            for (const auto& w : spec.warnings()) log << "warning: " << w << '\n';
            auto report = run_scenario(spec, manifest.threads);
            print_summary(log, spec, report);
            for (const auto& w : report.warnings)
                if (std::find(all.warnings.begin(), all.warnings.end(), w) == all.warnings.end())
                    log << "warning: " << w << '\n';
            all.append(std::move(report));
        }
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const InputError& e) {
        log << "input error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NumericalError& e) {
        log << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    }

    const auto headers = header_entries(manifest.specs);
    try {
        std::filesystem::create_directories(manifest.output_dir);
        const auto& dir = manifest.output_dir;
        write_file(dir / "report.tsv", [&](std::ostream& out) {
            write_header(out, headers);
            write_report(out, all.rows);
        });
        write_file(dir / "critical_values.tsv", [&](std::ostream& out) {
            write_header(out, headers);
            write_critical_values(out, all.critical_values);
        });
        std::map<std::string, std::vector<ReportRow>> figures;
        for (const auto& r : all.rows)
            if (!r.figure.empty()) figures[r.figure].push_back(r);
        for (const auto& [fig, rows] : figures) {
            write_file(dir / (fig + ".tsv"), [&](std::ostream& out) {
                write_header(out, headers);
                write_report(out, rows);
            });
        }
        write_file(dir / "manifest.json",
                   [&](std::ostream& out) { out << specs_to_json(manifest.specs); });

        if (manifest.dump_trajectories > 0) {
            write_file(dir / "trajectories.tsv", [&](std::ostream& out) {
                write_header(out, headers);
                for (const auto& spec : manifest.specs) {
                    std::vector<OutcomeModel> models{spec.null_model};
                    models.insert(models.end(), spec.alternatives.begin(), spec.alternatives.end());
                    for (const auto& design : spec.designs) {
                        for (std::size_t m = 0; m < models.size(); ++m) {
                            out << "# scenario=" << spec.name << " design=" << design.describe()
                                << " model=" << models[m].describe() << '\n';
                            write_trajectory_header(out);
                            const long count = std::min(manifest.dump_trajectories, spec.replicates_eval);
                            for (long r = 0; r < count; ++r) {
                                Rng rng = make_stream(spec.seed, streams::kEvaluation + m,
                                                      static_cast<std::uint64_t>(r));
                                write_trajectory_rows(
                                    out, r, simulate_trial(design, models[m], spec.prior, rng));
                            }
                        }
                    }
                }
            });
        }
    } catch (const std::exception& e) {
        log << "io error: " << e.what() << '\n';
        return kExitIo;
    }

    if (manifest.analyze) {
        std::vector<Arm> allocations;
        std::vector<double> outcomes;
        try {
            std::ifstream in(*manifest.analyze);
            if (!in) throw std::ios_base::failure("cannot read " + manifest.analyze->string());
            read_observed_trial(in, allocations, outcomes);
        } catch (const InputError& e) {
            log << "input error: " << e.what() << '\n';
            return kExitConfig;
        } catch (const std::exception& e) {
            log << "io error: " << e.what() << '\n';
            return kExitIo;
        }
        try {
            const auto& spec = manifest.specs.front();
            const auto result = analyze_observed_trial(spec, allocations, outcomes, manifest.threads);
            const std::string null_desc = spec.designs.front().describe() + " " +
                                          result.pooled_null.describe() + " prior=" +
                                          spec.prior.describe();
            write_file(manifest.output_dir / "decisions.tsv", [&](std::ostream& out) {
                write_header(out, std::span(headers).first(1));
                write_decisions(out, result.decisions, null_desc);
            });
            log << "analysis under pooled null " << result.pooled_null.describe() << ":\n";
            for (const auto& d : result.decisions)
                log << "  " << d.test_name << " statistic=" << format_double(d.statistic)
                    << " critical=" << format_double(d.critical_value)
                    << (d.rejected ? " reject" : " retain") << '\n';
        } catch (const InputError& e) {
            log << "input error: " << e.what() << '\n';
            return kExitConfig;
        } catch (const ConfigError& e) {
            log << "config error: " << e.what() << '\n';
            return kExitConfig;
        } catch (const NumericalError& e) {
            log << "numerical error: " << e.what() << '\n';
            return kExitNumerical;
        } catch (const std::ios_base::failure& e) {
            log << "io error: " << e.what() << '\n';
            return kExitIo;
        }
    }
    log << "wrote " << all.rows.size() << " report rows to " << manifest.output_dir.string() << '\n';
    return kExitOk;
}

}  // namespace aptest
