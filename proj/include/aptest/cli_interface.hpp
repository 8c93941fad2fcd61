#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "aptest/calibration.hpp"
#include "aptest/evaluation_harness.hpp"

namespace aptest {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumerical = 3, kExitIo = 4 };

/// Parses a JSON scenario document. Errors are ConfigError carrying a JSON
/// path such as `$.scenarios[0].design.N`.
std::vector<ScenarioSpec> parse_config(const std::string& text);
std::vector<ScenarioSpec> load_config(const std::filesystem::path& path);

/// Canonical JSON for resolved specs; parse_config round-trips it.
std::string specs_to_json(const std::vector<ScenarioSpec>& specs);

std::vector<std::string> preset_names();
/// The preset's JSON document; "-desk" variants use 1e5 calibration and 1e4
/// evaluation replicates.
std::string preset_config(const std::string& name);
std::vector<ScenarioSpec> load_preset(const std::string& name);

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<double> alpha;
    std::optional<long> replicates_eval;
    std::optional<long> replicates_calib;
    std::optional<std::vector<EvalMode>> modes;
};

/// Applies command-line overrides to every scenario and re-validates.
void apply_overrides(std::vector<ScenarioSpec>& specs, const Overrides& overrides);

struct RunManifest {
    std::filesystem::path config_path;
    std::optional<std::string> preset;
    std::vector<ScenarioSpec> specs;
    unsigned threads = 0;
    std::filesystem::path output_dir = "out";
    /// Number of leading evaluation replicates per cell written to trajectories.tsv.
    long dump_trajectories = 0;
    /// Observed trial (columns arm, outcome) analysed with pooled-estimate calibration.
    std::optional<std::filesystem::path> analyze;
};

struct ObservedAnalysis {
    TrialTrajectory trajectory;
    OutcomeModel pooled_null;
    std::vector<TestDecisionRecord> decisions;
};

/// Reads `arm<TAB>outcome` rows (arm 1 = experimental); a header line is optional.
void read_observed_trial(std::istream& in, std::vector<Arm>& allocations,
                         std::vector<double>& outcomes);

/// Reconstructs the allocation probabilities of an observed trial run under
/// `spec.designs[0]`, calibrates every test under the pooled null and decides.
ObservedAnalysis analyze_observed_trial(const ScenarioSpec& spec, std::span<const Arm> allocations,
                                        std::span<const double> outcomes, unsigned threads = 0,
                                        const PooledOptions& pooled = {});

/// Runs calibration and evaluation, writes the output files and prints a
/// summary to `log`. Returns an ExitCode.
int run(const RunManifest& manifest, std::ostream& log);

}  // namespace aptest
