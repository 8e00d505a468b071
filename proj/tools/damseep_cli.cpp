// Command line front end: solve, sweep, calibrate, validate, screen.
// Exit codes: 0 success, 2 a scenario failed to converge, 1 configuration or input error.

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "damseep/calibration.hpp"
#include "damseep/config.hpp"
#include "damseep/error.hpp"
#include "damseep/instruments.hpp"
#include "damseep/mesh.hpp"
#include "damseep/study.hpp"

using namespace damseep;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kScenarioFailed = 2;

std::string read_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

int cmd_solve(const std::string& cfg_path, const std::string& scenario, const std::string& out,
              const std::string& mesh_dump) {
    const auto text = read_file(cfg_path);
    const RunConfig cfg = parse_config(text);
    const std::filesystem::path dir = out.empty() ? cfg.output_dir : std::filesystem::path(out);
    SweepOptions opt;
    opt.jobs = 1;
    opt.output_dir = dir;
    opt.only = {scenario.empty() ? cfg.baseline : scenario};
    if (!mesh_dump.empty()) {
        // same mesh the solve uses: meshing is deterministic
        MeshOptions mo;
        mo.min_angle_deg = cfg.mesh.min_angle;
        const auto sec = apply_scenario(cfg.build_section(), cfg.scenario(opt.only.front()));
        std::ofstream f(mesh_dump);
        if (!f) throw IoError("cannot write " + mesh_dump);
        write_mesh_text(triangulate(sec, cfg.mesh.target_size, {}, mo), f);
    }
    const auto res = run_sweep(cfg, opt);
    write_sweep_outputs(res, cfg, text, dir);
    std::ofstream(dir / "config.effective.json") << echo_config(cfg);
    write_report_text(res, std::cout);
    return res.all_converged() ? kOk : kScenarioFailed;
}

int cmd_sweep(const std::string& cfg_path, unsigned jobs, const std::string& out, bool no_export) {
    const auto text = read_file(cfg_path);
    const RunConfig cfg = parse_config(text);
    const std::filesystem::path dir = out.empty() ? cfg.output_dir : std::filesystem::path(out);
    SweepOptions opt;
    opt.jobs = jobs;
    if (!no_export) opt.output_dir = dir;
    const auto res = run_sweep(cfg, opt);
    write_sweep_outputs(res, cfg, text, dir);
    std::ofstream(dir / "config.effective.json") << echo_config(cfg);
    write_report_text(res, std::cout);
    if (!res.all_converged()) {
        std::size_t failed = 0;
        for (const auto& s : res.scenarios) failed += !s.converged;
        fmt::print(std::cerr, "{} of {} scenarios failed\n", failed, res.scenarios.size());
        return kScenarioFailed;
    }
    return kOk;
}

int cmd_validate(const std::string& cfg_path, const std::string& obs, const std::string& date) {
    const RunConfig cfg = load_config(cfg_path);
    const auto series = ingest_instrument_csv(obs);
    ValidationReport rep;
    try {
        rep = validate_against_instruments(cfg, series, date);
    } catch (const NotConvergedError& e) {
        fmt::print(std::cerr, "error: {}\n", e.what());
        return kScenarioFailed;
    }
    write_validation_report(rep, std::cout);
    return kOk;
}

int cmd_calibrate(const std::string& cfg_path, const std::string& obs, const std::string& date, int budget) {
    const RunConfig cfg = load_config(cfg_path);
    const auto series = ingest_instrument_csv(obs);
    const auto day = normalize_date(date);
    const auto res_it = series.find(std::string(kReservoirSeries));
    const auto level = res_it == series.end() ? std::nullopt : value_on(res_it->second, day);
    if (!level) throw ValidationError(fmt::format("no reservoir reading on {}", day));
    const auto screen = screen_piezometers(series, res_it->second, cfg.screening);

    CalibrationProblem pb;
    pb.section = cfg.build_section();
    pb.scenario = cfg.scenario(cfg.baseline);
    pb.scenario.reservoir_level = *level;
    pb.parameters = cfg.calibration.parameters;
    pb.fit_datum = cfg.calibration.fit_datum;
    pb.mesh_size = cfg.calibration.mesh_size;
    pb.settings = cfg.solver;
    for (auto rec : cfg.piezometer_records(pb.section)) {
        const auto it = series.find(rec.name);
        const auto v = it == series.end() ? std::nullopt : value_on(it->second, day);
        const bool bad = screen.count(rec.name) && screen.at(rec.name).status == PiezometerStatus::Defective;
        if (!v || bad) continue;
        rec.observed_level = *v;
        pb.observations.push_back(rec);
    }
    if (pb.observations.empty()) throw ValidationError("no healthy observations");
    const auto r = calibrate(pb, budget > 0 ? budget : cfg.calibration.budget);
    for (std::size_t i = 0; i < r.materials.size(); ++i)
        fmt::print("{:<30} log10 k = {:.4f}  (k = {:.4e} m/s)\n", r.materials[i], r.log10_k[i],
                   std::pow(10.0, r.log10_k[i]));
    fmt::print("datum offset {:.4f} m, rms {:.5f} m, {} evaluations, {}\n", r.datum_offset, r.rms_residual,
               r.evaluations, r.converged ? "converged" : "budget exhausted");
    return kOk;
}

int cmd_screen(const std::string& obs, double min_corr, double min_var, int min_samples) {
    const auto series = ingest_instrument_csv(obs);
    const auto res_it = series.find(std::string(kReservoirSeries));
    if (res_it == series.end()) throw ValidationError("instrument data has no RESERVOIR series");
    ScreeningThresholds th{min_corr, min_var, static_cast<std::size_t>(min_samples)};
    fmt::print("{:<14} {:>14} {:>12} {:>12} {:>8}\n", "instrument", "status", "correlation", "variance", "samples");
    for (const auto& [name, r] : screen_piezometers(series, res_it->second, th))
        fmt::print("{:<14} {:>14} {:>12.3f} {:>12.4g} {:>8}\n", name, to_string(r.status), r.correlation, r.variance,
                   r.samples);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"damseep: steady seepage through zoned embankment dams"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(DAMSEEP_VERSION));

    std::string cfg, scenario, out, obs, date;
    unsigned jobs = 0;
    int budget = 0;
    bool no_export = false;
    ScreeningThresholds th;
    int min_samples = static_cast<int>(th.min_samples);

    auto* solve = app.add_subcommand("solve", "Solve one scenario and export its flow net");
    solve->add_option("config", cfg, "Run configuration (JSON)")->required();
    solve->add_option("--scenario", scenario, "Scenario name (default: the baseline)");
    solve->add_option("--out", out, "Output directory (default: output_dir from the config)");
    std::string mesh_dump;
    solve->add_option("--mesh-dump", mesh_dump, "Also write the mesh as N/E text records");

    auto* sweep = app.add_subcommand("sweep", "Solve every scenario and write the report tables");
    sweep->add_option("config", cfg, "Run configuration (JSON)")->required();
    sweep->add_option("--jobs", jobs, "Worker threads (default: available parallelism)");
    sweep->add_option("--out", out, "Output directory (default: output_dir from the config)");
    sweep->add_flag("--no-export", no_export, "Skip VTK/SVG files");

    auto* cal = app.add_subcommand("calibrate", "Fit permeabilities to piezometer readings on one date");
    cal->add_option("config", cfg, "Run configuration (JSON)")->required();
    cal->add_option("--observations", obs, "Instrument CSV (date,instrument,level_m)")->required();
    cal->add_option("--date", date, "Reading date, YYYY-MM-DD")->required();
    cal->add_option("--budget", budget, "Objective evaluations (default: from the config)");

    auto* val = app.add_subcommand("validate", "Compare the model with instrument readings on one date");
    val->add_option("config", cfg, "Run configuration (JSON)")->required();
    val->add_option("--observations", obs, "Instrument CSV (date,instrument,level_m)")->required();
    val->add_option("--date", date, "Reading date, YYYY-MM-DD")->required();

    auto* scr = app.add_subcommand("screen", "Flag piezometers that do not follow the reservoir");
    scr->add_option("--observations", obs, "Instrument CSV (date,instrument,level_m)")->required();
    scr->add_option("--min-correlation", th.min_correlation, "Correlation threshold")->capture_default_str();
    scr->add_option("--min-variance", th.min_variance, "Level variance threshold, m^2")->capture_default_str();
    scr->add_option("--min-samples", min_samples, "Samples needed for a verdict")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    try {
        if (*solve) return cmd_solve(cfg, scenario, out, mesh_dump);
        if (*sweep) return cmd_sweep(cfg, jobs, out, no_export);
        if (*cal) return cmd_calibrate(cfg, obs, date, budget);
        if (*val) return cmd_validate(cfg, obs, date);
        if (*scr) return cmd_screen(obs, th.min_correlation, th.min_variance, min_samples);
    } catch (const Error& e) {
        fmt::print(std::cerr, "error: {}\n", e.what());
        return kConfigError;
    } catch (const std::exception& e) {
        fmt::print(std::cerr, "error: {}\n", e.what());
        return kConfigError;
    }
    return kConfigError;
}
