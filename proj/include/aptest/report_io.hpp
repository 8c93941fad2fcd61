#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aptest/calibration.hpp"
#include "aptest/evaluation_harness.hpp"
#include "aptest/test_statistics.hpp"

namespace aptest {

std::string_view tool_version();

/// Provenance of one scenario, written as a `#` comment line.
struct HeaderEntry {
    std::string scenario;
    std::uint64_t seed = 0;
    long replicates_eval = 0;
    long replicates_calib = 0;
};

std::vector<HeaderEntry> header_entries(std::span<const ScenarioSpec> specs);

/// Comment lines with the tool version and, per scenario, seed and replicate counts.
void write_header(std::ostream& out, std::span<const HeaderEntry> entries);

/// Columns: design N B Bprime family param_ctrl param_exp test mode alpha
/// rejection_rate mc_se pct_better_mean pct_better_sd mean_outcome seed.
void write_report(std::ostream& out, std::span<const ReportRow> rows);

/// Columns: test alpha q_alpha achieved_alpha degenerate_max replicates seed null_model_description.
void write_critical_values(std::ostream& out, std::span<const CalibrationRecord> records);

void write_sensitivity(std::ostream& out, std::span<const SensitivityCell> cells, double alpha,
                       std::uint64_t seed);

void write_decisions(std::ostream& out, std::span<const TestDecisionRecord> decisions,
                     const std::string& null_description);

}  // namespace aptest
