// Command-line front end: synthetic data, registration, benchmark and report
// aggregation.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "stml/bench.hpp"

namespace fs = std::filesystem;

namespace {

// Flags shared by register and bench; only flags given on the command line
// end up in the settings map, so they override config-file values.
struct CommonFlags {
    std::map<std::string, std::string> values;
    std::string config;

    void attach(CLI::App* app) {
        app->add_option("--config", config, "Key/value config file");
        add(app, "--beta", "beta", "Smoothness weight of the least-squares predictor");
        add(app, "--lambda", "lambda", "Drift penalty weight, or 'auto'");
        add(app, "--eps", "eps", "Relative tolerance of the temporal stopping rule");
        add(app, "--stop-mode", "stop_mode", "dissim or param");
        add(app, "--spatial-levels", "spatial_levels", "Number of spatial levels");
        add(app, "--temporal-coarsest", "temporal_coarsest_size", "Maximum size of the coarsest frame subset");
        add(app, "--seed", "seed", "Seed of the synthetic generator");
        add(app, "--threads", "threads", "Worker threads inside objective evaluation");
        add(app, "--max-iters", "max_iters", "L-BFGS iteration cap per registration");
    }

    void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        app->add_option_function<std::string>(
            flag, [this, key](const std::string& v) { values[key] = v; }, help);
    }

    stml::RunConfig build() const {
        stml::RunConfig cfg;
        if (!config.empty()) stml::apply_settings(cfg, stml::parse_config_file(config));
        stml::apply_settings(cfg, values);
        return cfg;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatio-temporal multilevel groupwise registration"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Write a synthetic STSQ1 sequence and its ground-truth transforms");
    std::string synth_out;
    stml::SynthSpec spec;
    std::string motion = "sinusoidal";
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--seed", spec.seed, "Generator seed");
    synth->add_option("--frames", spec.frames, "Number of frames");
    synth->add_option("--dims", spec.dims, "Grid dimensions")->expected(2, 3);
    synth->add_option("--translation", spec.translation_amplitude, "Translation amplitude in cells");
    synth->add_option("--rotation", spec.rotation_amplitude_deg, "Rotation amplitude in degrees");
    synth->add_option("--noise", spec.noise_level, "Noise level relative to dynamic range");
    synth->add_option("--motion", motion, "sinusoidal or linear")->check(CLI::IsMember({"sinusoidal", "linear"}));

    // register
    auto* reg = app.add_subcommand("register", "Register an STSQ1 sequence");
    std::string method = "stml";
    std::string reg_in;
    std::string reg_out;
    bool reg_profile = false;
    CommonFlags reg_flags;
    reg->add_option("--method", method, "stml or spml")->check(CLI::IsMember({"stml", "spml"}));
    reg->add_option("--in", reg_in, "Input STSQ1 file")->required();
    reg->add_option("--out", reg_out, "Output directory")->required();
    reg->add_flag("--line-profile", reg_profile, "Also write lineprofile.csv");
    reg_flags.attach(reg);

    // bench
    auto* bench = app.add_subcommand("bench", "Run both drivers on synthetic data");
    std::string bench_out;
    bool bench_profile = false;
    CommonFlags bench_flags;
    bench->add_option("--out", bench_out, "Output directory")->required();
    bench->add_flag("--line-profile", bench_profile, "Also write lineprofile.csv");
    bench_flags.attach(bench);

    // report
    auto* report = app.add_subcommand("report", "Aggregate report.csv files of several runs");
    std::string runs_dir;
    std::string report_out;
    report->add_option("--runs", runs_dir, "Directory containing run directories")->required();
    report->add_option("--out", report_out, "Output CSV (stdout if omitted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            spec.motion = motion == "linear" ? stml::MotionModel::linear : stml::MotionModel::sinusoidal;
            const stml::SynthData data = stml::synth_generate(spec);
            fs::create_directories(synth_out);
            stml::write_sequence(data.sequence, fs::path(synth_out) / "sequence.stsq");
            stml::write_stack(fs::path(synth_out) / "ground_truth.txt", data.truth);
            std::cout << "wrote " << (fs::path(synth_out) / "sequence.stsq").string()
                      << " (min consecutive rho " << data.min_consecutive_rho << ")\n";
        } else if (*reg) {
            stml::RunConfig cfg = reg_flags.build();
            cfg.method = method == "spml" ? stml::Method::spml : stml::Method::stml;
            const stml::ImageSequence seq = stml::read_sequence(reg_in);
            const stml::RunReport rep = stml::run_registration(seq, cfg);
            stml::write_run_outputs(reg_out, rep);
            const auto& result = rep.spml ? *rep.spml : *rep.stml;
            stml::write_stack(fs::path(reg_out) / "transforms.txt", result.transforms);
            if (reg_profile) {
                std::ofstream os(fs::path(reg_out) / "lineprofile.csv");
                stml::write_line_profile(os, seq, rep);
            }
            stml::write_report_csv(std::cout, rep);
        } else if (*bench) {
            const stml::RunConfig cfg = bench_flags.build();
            const stml::RunReport rep = stml::run_benchmark(cfg);
            stml::write_run_outputs(bench_out, rep);
            if (bench_profile) {
                stml::SynthSpec s = cfg.synth;
                s.seed = cfg.seed;
                std::ofstream os(fs::path(bench_out) / "lineprofile.csv");
                stml::write_line_profile(os, stml::synth_generate(s).sequence, rep);
            }
            stml::write_report_csv(std::cout, rep);
        } else if (*report) {
            if (report_out.empty()) {
                stml::aggregate_reports(runs_dir, std::cout);
            } else {
                std::ofstream os(report_out);
                stml::aggregate_reports(runs_dir, os);
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
