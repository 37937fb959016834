// Command line front end.
//
//   olrl run           --config <file.json> [--out <dir>]
//   olrl eval-dynamics --config <file.json> [--out <dir>]
//   olrl report        --in <dir>
//   olrl dump-frames   --config <file.json> --steps <n> [--out <dir>]
//
// Exit codes: 0 success, 2 configuration error, 3 I/O error.

#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "olrl/bench.hpp"
#include "olrl/core.hpp"
#include "olrl/report.hpp"

namespace {

int cmd_run(const std::string& config_path, std::string out_dir) {
    olrl::ExperimentConfig cfg = olrl::load_experiment_config(config_path);
    if (out_dir.empty()) out_dir = cfg.output_dir;
    if (out_dir.empty())
        throw olrl::ConfigError("no output directory: pass --out or set output_dir");
    olrl::ExperimentSummary summary = olrl::run_experiment(cfg, out_dir);
    std::printf("%-14s %14s %14s\n", "variant", "final score", "std");
    for (const olrl::VariantResult& r : summary.variants)
        std::printf("%-14s %14.4f %14.4f\n", olrl::variant_name(r.variant).c_str(),
                    r.final_score_mean, r.final_score_std);
    std::printf("wrote metrics and summary CSVs to %s\n", out_dir.c_str());
    return 0;
}

int cmd_eval_dynamics(const std::string& config_path, const std::string& out_dir) {
    olrl::ExperimentConfig cfg = olrl::load_experiment_config(config_path);
    olrl::DynamicsEval eval = olrl::eval_dynamics(cfg);
    std::filesystem::create_directories(out_dir);
    std::string csv = out_dir + "/dynamics.csv";
    olrl::write_dynamics_csv(csv, eval);
    for (const olrl::HorizonErrorRow& r : eval.rows) {
        if (r.horizon != 10 && r.horizon != 100) continue;
        std::printf("horizon %3d: model %.3f px (agent %.3f), const-velocity %.3f px "
                    "(agent %.3f), n=%d\n",
                    r.horizon, r.model_all, r.model_agent, r.baseline_all, r.baseline_agent,
                    r.n_all);
    }
    std::printf("wrote %s\n", csv.c_str());
    return 0;
}

int cmd_report(const std::string& in_dir) {
    for (const std::string& path : olrl::render_report(in_dir))
        std::printf("wrote %s\n", path.c_str());
    return 0;
}

int cmd_dump_frames(const std::string& config_path, int steps, const std::string& out_dir) {
    std::ifstream in(config_path);
    if (!in) throw olrl::IoError("cannot open for reading: " + config_path);
    olrl::json j;
    try {
        in >> j;
    } catch (const olrl::json::exception& e) {
        throw olrl::ConfigError(config_path + ": invalid JSON: " + e.what());
    }
    // Accept either a bare environment config or a full experiment config.
    olrl::EnvConfig env_cfg = j.contains("env") ? olrl::env_config_from_json(j.at("env"))
                                                : olrl::env_config_from_json(j);
    std::vector<std::string> written = olrl::dump_frames(env_cfg, steps, out_dir);
    std::printf("wrote %zu files to %s\n", written.size(), out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"object-level model learning and planning benchmark"};
    app.require_subcommand(1);

    std::string run_config, run_out;
    CLI::App* run = app.add_subcommand("run", "run the benchmark variants");
    run->add_option("--config", run_config, "experiment config JSON")->required();
    run->add_option("--out", run_out, "output directory (defaults to config output_dir)");

    std::string eval_config, eval_out = ".";
    CLI::App* eval = app.add_subcommand("eval-dynamics", "open-loop prediction evaluation");
    eval->add_option("--config", eval_config, "experiment config JSON")->required();
    eval->add_option("--out", eval_out, "output directory (default: current directory)");

    std::string report_in;
    CLI::App* report = app.add_subcommand("report", "render SVG plots from CSV outputs");
    report->add_option("--in", report_in, "directory holding the benchmark CSVs")->required();

    std::string dump_config, dump_out = "frames";
    int dump_steps = 0;
    CLI::App* dump = app.add_subcommand("dump-frames", "write rendered frames as PNGs");
    dump->add_option("--config", dump_config, "environment or experiment config JSON")
        ->required();
    dump->add_option("--steps", dump_steps, "number of frames to write")->required();
    dump->add_option("--out", dump_out, "output directory (default: frames)");

    try {
        app.parse(argc, argv);
        if (run->parsed()) return cmd_run(run_config, run_out);
        if (eval->parsed()) return cmd_eval_dynamics(eval_config, eval_out);
        if (report->parsed()) return cmd_report(report_in);
        if (dump->parsed()) return cmd_dump_frames(dump_config, dump_steps, dump_out);
        return 0;
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const olrl::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const olrl::IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
