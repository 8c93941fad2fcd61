// aptest: calibrate and evaluate allocation-probability tests for BRAR trials.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "aptest/cli_interface.hpp"
#include "aptest/report_io.hpp"

int main(int argc, char** argv) {
    using namespace aptest;

    CLI::App app{"Monte Carlo calibration and operating characteristics of allocation-probability tests"};
    app.set_version_flag("--version", std::string(tool_version()));

    std::string config_path, preset, out_dir, mode, analyze;
    std::uint64_t seed = 0;
    double alpha = 0.0;
    long reps_eval = 0, reps_calib = 0, dump = 0;
    unsigned threads = 0;
    bool list_presets = false, print_config = false;

    auto* config_opt = app.add_option("--config", config_path, "JSON scenario file")->check(CLI::ExistingFile);
    auto* preset_opt = app.add_option("--preset", preset, "built-in scenario (see --list-presets)");
    config_opt->excludes(preset_opt);
    auto* seed_opt = app.add_option("--seed", seed, "master seed for every scenario");
    auto* alpha_opt = app.add_option("--alpha", alpha, "significance level")->check(CLI::Range(0.0, 1.0));
    auto* eval_opt = app.add_option("--replicates-eval", reps_eval, "evaluation replicates")->check(CLI::PositiveNumber);
    auto* calib_opt = app.add_option("--replicates-calib", reps_calib, "calibration replicates")->check(CLI::PositiveNumber);
    app.add_option("--threads", threads, "worker threads (0 = all hardware threads)");
    auto* out_opt = app.add_option("--out", out_dir, "output directory");
    auto* mode_opt = app.add_option("--mode", mode, "decision mode")
                         ->check(CLI::IsMember({"nominal", "calibrated", "both"}));
    app.add_option("--dump-trajectories", dump, "write the first N evaluation trajectories per cell");
    auto* analyze_opt = app.add_option("--analyze", analyze,
                                       "observed trial (arm, outcome per line) to test under the pooled null")
                            ->check(CLI::ExistingFile);
    app.add_flag("--list-presets", list_presets, "print preset names and exit");
    app.add_flag("--print-config", print_config, "print the resolved configuration and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    if (list_presets) {
        for (const auto& name : preset_names()) std::cout << name << '\n';
        return kExitOk;
    }

    RunManifest manifest;
    try {
        if (*config_opt) {
            manifest.config_path = config_path;
            manifest.specs = load_config(config_path);
        } else if (*preset_opt) {
            manifest.preset = preset;
            manifest.specs = load_preset(preset);
        } else {
            std::cerr << "one of --config or --preset is required\n";
            return kExitConfig;
        }
        Overrides o;
        if (*seed_opt) o.seed = seed;
        if (*alpha_opt) o.alpha = alpha;
        if (*eval_opt) o.replicates_eval = reps_eval;
        if (*calib_opt) o.replicates_calib = reps_calib;
        if (*mode_opt) {
            if (mode == "both") o.modes = std::vector{EvalMode::Nominal, EvalMode::Calibrated};
            else o.modes = std::vector{eval_mode_from_string(mode)};
        }
        apply_overrides(manifest.specs, o);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }

    if (print_config) {
        std::cout << specs_to_json(manifest.specs);
        return kExitOk;
    }

    manifest.threads = threads;
    if (*out_opt) manifest.output_dir = out_dir;
    else if (const char* env = std::getenv("APTEST_OUT_DIR")) manifest.output_dir = env;
    manifest.dump_trajectories = dump;
    if (*analyze_opt) manifest.analyze = analyze;

    return run(manifest, std::cout);
}
