#include "damseep/study.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <thread>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include "damseep/error.hpp"
#include "damseep/log.hpp"

#ifndef DAMSEEP_VERSION
#define DAMSEEP_VERSION "dev"
#endif

namespace damseep {

namespace {

std::string file_stem(const std::string& name) {
    std::string s;
    for (char c : name) s += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    return s.empty() ? "scenario" : s;
}

std::string fmt_num(double v) { return std::isnan(v) ? "nan" : fmt::format("{:.9g}", v); }

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

}  // namespace

bool SweepResult::all_converged() const {
    return std::all_of(scenarios.begin(), scenarios.end(), [](const auto& s) { return s.converged; });
}

const ScenarioOutcome* SweepResult::find(const std::string& name) const {
    for (const auto& s : scenarios)
        if (s.name == name) return &s;
    return nullptr;
}

std::string discharge_alert(double q, const ReportSpec& spec) {
    if (q >= spec.red_lps) return "red";
    if (q >= spec.yellow_lps) return "yellow";
    return "green";
}

ScenarioOutcome run_scenario(const RunConfig& config, const Scenario& scenario,
                             const std::optional<std::filesystem::path>& export_dir, SeepageSolution* solution_out) {
    ScenarioOutcome out;
    out.name = scenario.name;
    out.exit_elevation = std::nan("");
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const DamSection sec = apply_scenario(config.build_section(), scenario);
        MeshOptions mo;
        mo.min_angle_deg = config.mesh.min_angle;
        auto mesh = std::make_shared<const Mesh>(triangulate(sec, config.mesh.target_size, {}, mo));
        out.nodes = mesh->nodes.size();
        out.elements = mesh->elements.size();
        SeepageSolution sol = solve_unconfined(mesh, sec, config.solver);
        out.converged = sol.converged;
        out.outer_iterations = sol.outer_iterations;
        out.inflow = sol.inflow();
        out.outflow = sol.outflow();
        out.mass_balance = out.inflow > 0 ? std::abs(out.inflow - out.outflow) / out.inflow : 0.0;
        if (sol.converged) {
            out.discharge = total_discharge(sol, sec, scenario.name);
            out.alert = discharge_alert(out.discharge.q_total_lps, config.report);
            out.max_exit_gradient = exit_gradient(sol, sec, gradient_field(sol)).magnitude;
            out.exit_elevation = exit_elevation(sol, sec);
            if (export_dir) {
                std::filesystem::create_directories(*export_dir);
                const auto stem = *export_dir / file_stem(scenario.name);
                export_flow_net(sol, sec, stem);
                out.files = {stem.string() + ".vtk", stem.string() + ".svg"};
            }
        } else {
            out.error = sol.diagnostic;
        }
        if (solution_out) *solution_out = std::move(sol);
    } catch (const std::exception& e) {
        out.converged = false;
        out.error = e.what();
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

SweepResult run_sweep(const RunConfig& config, const SweepOptions& opt) {
    std::vector<const Scenario*> todo;
    for (const auto& s : config.scenarios)
        if (opt.only.empty() || std::find(opt.only.begin(), opt.only.end(), s.name) != opt.only.end())
            todo.push_back(&s);
    for (const auto& n : opt.only) config.scenario(n);  // unknown names are a config error

    SweepResult res;
    res.baseline = config.baseline;
    res.scenarios.resize(todo.size());
    unsigned jobs = opt.jobs ? opt.jobs : std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(todo.size(), 1)));

    // each slot is written by exactly one worker; results land in config order
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < todo.size();)
            res.scenarios[i] = run_scenario(config, *todo[i], opt.output_dir);
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    }

    const ScenarioOutcome* base = res.find(config.baseline);
    if (!base) warn(fmt::format("baseline scenario '{}' was not run; ratios are left empty", config.baseline));
    for (auto& s : res.scenarios)
        if (base && base->converged && s.converged && base->discharge.q_total_lps > 0)
            s.ratio_to_baseline = s.discharge.q_total_lps / base->discharge.q_total_lps;
    return res;
}

void write_report_csv(const SweepResult& r, std::ostream& os) {
    os << "scenario,converged,q_per_meter_m3s,q_total_lps,ratio_to_baseline,max_exit_gradient,exit_elevation_m,"
          "mass_balance,outer_iterations,nodes,elements,alert,error\n";
    for (const auto& s : r.scenarios) {
        os << csv_field(s.name) << ',' << (s.converged ? "true" : "false") << ',';
        if (s.converged) {
            os << fmt_num(s.discharge.q_per_meter) << ',' << fmt_num(s.discharge.q_total_lps) << ','
               << (s.ratio_to_baseline ? fmt_num(*s.ratio_to_baseline) : "") << ',' << fmt_num(s.max_exit_gradient)
               << ',' << fmt_num(s.exit_elevation) << ',';
        } else {
            os << ",,,,,";
        }
        os << fmt_num(s.mass_balance) << ',' << s.outer_iterations << ',' << s.nodes << ',' << s.elements << ','
           << s.alert << ',' << csv_field(s.error) << '\n';
    }
}

void write_report_text(const SweepResult& r, std::ostream& os) {
    fmt::print(os, "{:<16} {:>5} {:>12} {:>9} {:>7} {:>9} {:>10} {:>9} {:>6} {:>8} {:>7}\n", "scenario", "conv",
               "q [m3/s/m]", "Q [L/s]", "ratio", "exit grad", "exit y [m]", "balance", "iters", "time [s]", "alert");
    for (const auto& s : r.scenarios) {
        if (s.converged) {
            fmt::print(os, "{:<16} {:>5} {:>12.4e} {:>9.3f} {:>7} {:>9.3f} {:>10.2f} {:>9.1e} {:>6} {:>8.2f} {:>7}\n",
                       s.name, "yes", s.discharge.q_per_meter, s.discharge.q_total_lps,
                       s.ratio_to_baseline ? fmt::format("{:.3f}", *s.ratio_to_baseline) : "-",
                       s.max_exit_gradient, s.exit_elevation, s.mass_balance, s.outer_iterations, s.seconds, s.alert);
        } else {
            fmt::print(os, "{:<16} {:>5} {}\n", s.name, "NO", s.error);
        }
    }
    fmt::print(os, "baseline: {}\n", r.baseline);
}

void write_sweep_outputs(const SweepResult& r, const RunConfig& config, std::string_view config_text,
                         const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream f(dir / name);
        if (!f) throw IoError(fmt::format("cannot write {}", (dir / name).string()));
        return f;
    };
    {
        auto f = open("report.csv");
        write_report_csv(r, f);
    }
    {
        auto f = open("report.txt");
        write_report_text(r, f);
    }
    nlohmann::json m;
    m["tool"] = "damseep";
    m["version"] = DAMSEEP_VERSION;
    m["config_hash"] = content_hash(config_text);
    m["effective_config_hash"] = content_hash(echo_config(config));
    m["baseline"] = r.baseline;
    m["report_csv"] = "report.csv";
    m["report_txt"] = "report.txt";
    auto& list = m["scenarios"] = nlohmann::json::array();
    for (const auto& s : r.scenarios) {
        nlohmann::json e{{"name", s.name}, {"converged", s.converged}};
        if (s.converged) e["q_total_lps"] = s.discharge.q_total_lps;
        if (!s.error.empty()) e["error"] = s.error;
        auto& files = e["files"] = nlohmann::json::array();
        for (const auto& p : s.files) files.push_back(std::filesystem::path(p).lexically_relative(dir).string());
        list.push_back(e);
    }
    auto f = open("manifest.json");
    f << m.dump(2) << '\n';
}

ValidationReport validate_against_instruments(const RunConfig& config, const SeriesMap& inst, const std::string& date_in) {
    ValidationReport rep;
    rep.date = normalize_date(date_in);
    const auto res_it = inst.find(std::string(kReservoirSeries));
    if (res_it == inst.end()) throw ValidationError("instrument data has no RESERVOIR series");
    const auto level = value_on(res_it->second, rep.date);
    if (!level) throw ValidationError(fmt::format("no reservoir reading on {}", rep.date));
    rep.reservoir_level = *level;

    const auto screen = screen_piezometers(inst, res_it->second, config.screening);
    const DamSection base = config.build_section();
    std::vector<PiezometerRecord> obs;
    for (const auto& rec : config.piezometer_records(base)) {
        const auto s_it = inst.find(rec.name);
        const auto reading = s_it == inst.end() ? std::nullopt : value_on(s_it->second, rep.date);
        const auto st = screen.count(rec.name) ? screen.at(rec.name).status : PiezometerStatus::Indeterminate;
        if (!reading || st == PiezometerStatus::Defective) {
            rep.excluded.push_back(rec.name);
            continue;
        }
        if (st == PiezometerStatus::Indeterminate)
            warn(fmt::format("{} has too few readings to screen; used as is", rec.name));
        auto r = rec;
        r.observed_level = *reading;
        obs.push_back(r);
        rep.piezometers.push_back({rec.name, 0, 0, 0, st});
    }
    if (obs.empty()) throw ValidationError("no healthy observations");

    Scenario sc = config.scenario(config.baseline);
    sc.name = "validation-" + rep.date;
    sc.reservoir_level = rep.reservoir_level;
    SeepageSolution sol;
    const auto outcome = run_scenario(config, sc, std::nullopt, &sol);
    rep.converged = outcome.converged;
    if (!outcome.converged) throw NotConvergedError(fmt::format("validation solve failed: {}", outcome.error));
    rep.model_q_lps = outcome.discharge.q_total_lps;

    const ElementLocator loc(*sol.mesh);
    std::vector<double> raw;
    for (const auto& o : obs) raw.push_back(probe_head(sol, loc, o.location) - (o.observed_level + o.datum_offset));
    auto sorted = raw;
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0;
    for (double v : sorted) sum += v;
    rep.datum_offset = sum / static_cast<double>(raw.size());
    if (obs.size() < 2) warn("a single piezometer cannot check the model once the datum is fitted");
    double ss = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        auto& pc = rep.piezometers[i];
        pc.model = probe_head(sol, loc, obs[i].location);
        pc.observed = obs[i].observed_level + obs[i].datum_offset + rep.datum_offset;
        pc.residual = pc.model - pc.observed;
        ss += pc.residual * pc.residual;
    }
    rep.rms = std::sqrt(ss / static_cast<double>(obs.size()));

    if (const auto d = inst.find(std::string(kDischargeSeries)); d != inst.end())
        rep.observed_q_lps = value_on(d->second, rep.date);
    rep.leakage_anomaly = rep.observed_q_lps && *rep.observed_q_lps > config.report.anomaly_ratio * rep.model_q_lps;
    return rep;
}

void write_validation_report(const ValidationReport& r, std::ostream& os) {
    fmt::print(os, "date {}  reservoir {:.2f} m\n", r.date, r.reservoir_level);
    fmt::print(os, "{:<14} {:>10} {:>10} {:>9} {:>14}\n", "piezometer", "observed", "model", "residual", "status");
    for (const auto& p : r.piezometers)
        fmt::print(os, "{:<14} {:>10.3f} {:>10.3f} {:>9.3f} {:>14}\n", p.name, p.observed, p.model, p.residual,
                   to_string(p.status));
    for (const auto& n : r.excluded) fmt::print(os, "{:<14} excluded (defective or no reading)\n", n);
    fmt::print(os, "datum offset {:.3f} m, rms {:.4f} m\n", r.datum_offset, r.rms);
    fmt::print(os, "model discharge {:.3f} L/s", r.model_q_lps);
    if (r.observed_q_lps) fmt::print(os, ", observed {:.3f} L/s", *r.observed_q_lps);
    fmt::print(os, "\n{}\n", r.leakage_anomaly ? "LEAKAGE ANOMALY: observed discharge exceeds the model" : "no leakage anomaly");
}

}  // namespace damseep
