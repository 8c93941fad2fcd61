#include "aptest/report_io.hpp"

#include <ostream>

#include "aptest/format.hpp"

namespace aptest {

std::string_view tool_version() { return "0.1.0"; }

std::vector<HeaderEntry> header_entries(std::span<const ScenarioSpec> specs) {
    std::vector<HeaderEntry> out;
    for (const auto& s : specs)
        out.push_back({s.name, s.seed, s.replicates_eval, s.replicates_calib});
    return out;
}

void write_header(std::ostream& out, std::span<const HeaderEntry> entries) {
    out << "# aptest " << tool_version() << '\n';
    for (const auto& e : entries) {
        out << "# scenario=" << e.scenario << " seed=" << e.seed
            << " replicates_eval=" << e.replicates_eval
            << " replicates_calib=" << e.replicates_calib << '\n';
    }
}

void write_report(std::ostream& out, std::span<const ReportRow> rows) {
    out << "design\tN\tB\tBprime\tfamily\tparam_ctrl\tparam_exp\ttest\tmode\talpha\trejection_rate"
           "\tmc_se\tpct_better_mean\tpct_better_sd\tmean_outcome\tseed\n";
    for (const auto& r : rows) {
        out << to_string(r.design.kind()) << '\t' << r.design.total_n() << '\t'
            << r.design.block_size() << '\t' << r.design.burn_in() << '\t'
            << to_string(r.model.kind()) << '\t' << format_double(r.model.parameter(Arm::Control))
            << '\t' << format_double(r.model.parameter(Arm::Experimental)) << '\t' << r.test << '\t'
            << to_string(r.mode) << '\t' << format_double(r.alpha) << '\t'
            << format_double(r.rejection_rate) << '\t' << format_double(r.mc_se) << '\t'
            << format_double(r.benefit.pct_better_mean) << '\t'
            << format_double(r.benefit.pct_better_sd) << '\t'
            << format_double(r.benefit.mean_outcome) << '\t' << r.seed << '\n';
    }
}

void write_critical_values(std::ostream& out, std::span<const CalibrationRecord> records) {
    out << "test\talpha\tq_alpha\tachieved_alpha\tdegenerate_max\treplicates\tseed"
           "\tnull_model_description\n";
    for (const auto& c : records) {
        out << c.test << '\t' << format_double(c.critical.alpha_nominal) << '\t'
            << format_double(c.critical.q_alpha) << '\t' << format_double(c.critical.achieved_alpha)
            << '\t' << (c.critical.degenerate_max ? "true" : "false") << '\t'
            << c.critical.replicates << '\t' << c.seed << '\t' << c.design.describe() << ' '
            << c.null_model.describe() << " prior=" << c.prior.describe() << '\n';
    }
}

void write_sensitivity(std::ostream& out, std::span<const SensitivityCell> cells, double alpha,
                       std::uint64_t seed) {
    out << "test\talpha\tcalibrated_at\tevaluated_at\tq_alpha\tdegenerate_max\ttype1_error\tseed\n";
    for (const auto& c : cells) {
        out << c.test_name << '\t' << format_double(alpha) << '\t' << c.calibrated_at.describe()
            << '\t' << c.evaluated_at.describe() << '\t' << format_double(c.critical.q_alpha) << '\t'
            << (c.critical.degenerate_max ? "true" : "false") << '\t'
            << format_double(c.type1_error) << '\t' << seed << '\n';
    }
}

void write_decisions(std::ostream& out, std::span<const TestDecisionRecord> decisions,
                     const std::string& null_description) {
    out << "test\tstatistic\tcritical_value\trejected\tnominal_alpha\tnull_model_description\n";
    for (const auto& d : decisions) {
        out << d.test_name << '\t' << format_double(d.statistic) << '\t'
            << format_double(d.critical_value) << '\t' << (d.rejected ? "true" : "false") << '\t'
            << format_double(d.nominal_alpha) << '\t' << null_description << '\n';
    }
}

}  // namespace aptest
