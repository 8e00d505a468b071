// Acceptance suite: one PASS/FAIL line per criterion, tolerances fixed below.
// Exit status is the number of failed criteria.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "damseep/calibration.hpp"
#include "damseep/config.hpp"
#include "damseep/error.hpp"
#include "damseep/fem.hpp"
#include "damseep/log.hpp"
#include "damseep/postproc.hpp"
#include "damseep/study.hpp"
#include "fixtures.hpp"

using namespace damseep;
namespace fs = std::filesystem;

namespace tol {
constexpr double patch_abs = 1e-9;           // m
constexpr double patch_seconds = 1.0;
constexpr double element_abs = 1e-12;
constexpr int element_max_count = 8;
constexpr double dupuit_q = 0.10;            // relative
constexpr double dupuit_mid = 0.10;          // relative
constexpr double dupuit_level_change = 0.05; // relative, successive levels
constexpr double dupuit_seconds = 30.0;
constexpr double mass_balance = 0.01;
constexpr double published_q = 9.7e-6;           // m3/s per m at 1600.3
constexpr double published_q_factor = 3.0;
constexpr double no_change_band = 0.15;
constexpr double composite_ratio = 0.5;
constexpr double sweep_seconds = 300.0;
constexpr double twin_log10 = 0.3;
constexpr int twin_budget = 200;
constexpr double twin_start_offset = 2.0;    // decades
constexpr double anomaly_model_lps = 6.0;
constexpr double anomaly_observed_lps = 12.7;
}  // namespace tol

namespace {

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, bool ok, const std::string& what) {
    failures += !ok;
    fmt::print("criterion {} {}  {}\n", id, ok ? "PASS" : "FAIL", what);
    std::fflush(stdout);
}

void guarded(int id, const std::function<void()>& body) {
    try {
        body();
    } catch (const std::exception& e) {
        report(id, false, fmt::format("threw: {}", e.what()));
    }
}

// ---- 1 -------------------------------------------------------------------------------------

void patch_test() {
    const auto t0 = Clock::now();
    const DamSection sahand = apply_scenario(build_sahand_section({}), fixtures::sahand_scenario());
    const DamSection dupuit = fixtures::DupuitCase{}.section();
    const DamSection seams = section_from_zones({{"a", rectangle(0, 0, 5, 3), "m"},
                                                 {"seam", rectangle(5, 0, 5.3, 3), "m"},
                                                 {"b", rectangle(5.3, 0, 10, 3), "m"}});
    struct Case {
        const DamSection* s;
        double h;
    };
    const Case cases[] = {{&sahand, 12.0}, {&dupuit, 0.7}, {&seams, 0.5}};
    const double a = 1480.0, b = 0.013, c = -0.021;
    double worst = 0.0;
    std::size_t meshes = 0;
    for (const auto& cs : cases) {
        const Mesh m = triangulate(*cs.s, cs.h);
        ++meshes;
        // uniform K whatever the zones say
        const std::vector<double> k(m.elements.size(), 1e-5);
        DirichletValues fixed(m.nodes.size());
        for (const auto& be : m.boundary_edges)
            for (int v : be.nodes) fixed[v] = a + b * m.nodes[v].x + c * m.nodes[v].y;
        const auto h = solve_confined(m, k, fixed, 1e-14);
        for (std::size_t v = 0; v < m.nodes.size(); ++v)
            if (!fixed[v]) worst = std::max(worst, std::abs(h[v] - (a + b * m.nodes[v].x + c * m.nodes[v].y)));
    }
    const double secs = since(t0);
    report(1, worst <= tol::patch_abs && secs < tol::patch_seconds,
           fmt::format("patch test on {} meshes: max interior error {:.2e} m (tol {:.0e}), {:.2f} s (limit {} s)", meshes,
                       worst, tol::patch_abs, secs, tol::patch_seconds));
}

// ---- 2 -------------------------------------------------------------------------------------

void element_oracle() {
    // 3 x 3 node grid on [0, 2]^2, eight triangles with alternating diagonals
    Mesh m;
    for (int j = 0; j < 3; ++j)
        for (int i = 0; i < 3; ++i) m.nodes.push_back({1.0 * i, 1.0 * j});
    auto id = [](int i, int j) { return j * 3 + i; };
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i) {
            const int p = id(i, j), q = id(i + 1, j), r = id(i + 1, j + 1), s = id(i, j + 1);
            if ((i + j) % 2 == 0) {
                m.elements.push_back({{p, q, r}, 0});
                m.elements.push_back({{p, r, s}, 0});
            } else {
                m.elements.push_back({{p, q, s}, 0});
                m.elements.push_back({{q, r, s}, 0});
            }
        }
    // skew one interior node so the elements are not all alike
    m.nodes[4] = {1.13, 0.91};
    const std::vector<double> k{1.0, 2.5, 0.3, 4.0, 0.75, 1.6, 3.2, 0.05};
    const std::vector<double> kr{1.0, 0.5, 1.0, 0.2, 1.0, 1.0, 0.9, 1.0};

    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(9, 9);
    for (std::size_t e = 0; e < m.elements.size(); ++e) {
        const auto& n = m.elements[e].nodes;
        double x[3], y[3];
        for (int i = 0; i < 3; ++i) x[i] = m.nodes[n[i]].x, y[i] = m.nodes[n[i]].y;
        const double twice_area = (x[1] - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (y[1] - y[0]);
        const double bb[3] = {y[1] - y[2], y[2] - y[0], y[0] - y[1]};
        const double cc[3] = {x[2] - x[1], x[0] - x[2], x[1] - x[0]};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                dense(n[i], n[j]) += k[e] * kr[e] * (bb[i] * bb[j] + cc[i] * cc[j]) / (2.0 * twice_area);
    }
    const Eigen::MatrixXd assembled(assemble_matrix(m, k, kr));
    const double diff = (assembled - dense).cwiseAbs().maxCoeff();
    report(2, diff <= tol::element_abs && static_cast<int>(m.elements.size()) <= tol::element_max_count,
           fmt::format("global matrix vs brute-force sum on {} elements: max |diff| {:.2e} (tol {:.0e})",
                       m.elements.size(), diff, tol::element_abs));
}

// ---- 3 -------------------------------------------------------------------------------------

double surface_at(const PhreaticLine& pl, double x) {
    for (std::size_t i = 1; i < pl.points.size(); ++i) {
        const Point a = pl.points[i - 1], b = pl.points[i];
        if (a.x <= x && x <= b.x) return a.y + (b.y - a.y) * (x - a.x) / (b.x - a.x);
    }
    return std::nan("");
}

void dupuit_benchmark() {
    const auto t0 = Clock::now();
    const fixtures::DupuitCase dc;
    const DamSection s = dc.section();
    const double q_ref = dc.discharge();           // 2.4e-4
    const double mid_ref = dc.surface_at(0.5 * dc.length);  // 7.21
    std::vector<double> q, mid;
    bool converged = true;
    for (double h : {1.0, 0.5, 0.25}) {
        const auto sol = solve_unconfined(std::make_shared<const Mesh>(triangulate(s, h)), s);
        converged &= sol.converged;
        q.push_back(sol.converged ? sol.inflow() : std::nan(""));
        mid.push_back(sol.converged ? surface_at(phreatic_line(sol), 0.5 * dc.length) : std::nan(""));
    }
    const double secs = since(t0);
    const double q_err = std::abs(q.back() - q_ref) / q_ref;
    const double mid_err = std::abs(mid.back() - mid_ref) / mid_ref;
    const double change = std::max(std::abs(q[1] - q[0]) / q[0], std::abs(q[2] - q[1]) / q[1]);
    const bool ok = converged && q_err <= tol::dupuit_q && mid_err <= tol::dupuit_mid &&
                    change < tol::dupuit_level_change && secs < tol::dupuit_seconds;
    report(3, ok,
           fmt::format("Dupuit dam: q {:.4e} vs {:.4e} ({:.1f}%), mid-length surface {:.3f} vs {:.3f} m ({:.1f}%), "
                       "max level-to-level change {:.2f}%, {:.1f} s",
                       q.back(), q_ref, 100 * q_err, mid.back(), mid_ref, 100 * mid_err, 100 * change, secs));
}

// ---- 4, 6 ----------------------------------------------------------------------------------

struct SweepRun {
    SweepResult result;
    std::string csv;
    double seconds = 0.0;
};

SweepRun library_sweep(const RunConfig& cfg) {
    SweepRun r;
    const auto t0 = Clock::now();
    SweepOptions opt;
    opt.jobs = 1;
    r.result = run_sweep(cfg, opt);
    r.seconds = since(t0);
    std::ostringstream os;
    write_report_csv(r.result, os);
    r.csv = os.str();
    return r;
}

void mass_balance(const SweepRun& run) {
    double worst = 0.0;
    std::size_t converged = 0;
    for (const auto& s : run.result.scenarios)
        if (s.converged) {
            ++converged;
            worst = std::max(worst, s.mass_balance);
        }
    report(4, converged > 0 && worst <= tol::mass_balance,
           fmt::format("mass balance over {} converged scenarios: worst |in - out| / in {:.2e} (tol {})", converged,
                       worst, tol::mass_balance));
}

void trend_suite(const SweepRun& run) {
    const auto& r = run.result;
    auto q = [&](const char* name) -> double {
        const auto* s = r.find(name);
        if (!s || !s->converged) throw std::runtime_error(fmt::format("scenario {} missing or unconverged", name));
        return s->discharge.q_per_meter;
    };
    const double base = q("baseline");
    const bool a = base >= tol::published_q / tol::published_q_factor && base <= tol::published_q * tol::published_q_factor;
    const double d30 = q("depth-30"), d90 = q("depth-90"), d120 = q("depth-120");
    const bool b = d30 < base && base < d90 && d90 < d120;
    const double core = q("cutoff-core"), heel = q("cutoff-heel");
    const bool c = core <= heel && heel <= base;
    const double blanket = q("clay-blanket") / base, cover = q("cover") / base;
    const bool d = std::abs(blanket - 1.0) <= tol::no_change_band && std::abs(cover - 1.0) <= tol::no_change_band;
    const double comp = q("composite") / base;
    const bool e = comp <= tol::composite_ratio;
    const bool t = run.seconds < tol::sweep_seconds;
    report(6, a && b && c && d && e && t,
           fmt::format("trends: (a) baseline {:.3e} m3/s/m, {:.2f}x published [{}] (b) depth 30/60/90/120 "
                       "{:.3e} < {:.3e} < {:.3e} < {:.3e} [{}] (c) core {:.3f} <= heel {:.3f} <= 1 [{}] "
                       "(d) blanket {:.3f}, cover {:.3f} [{}] (e) composite {:.3f} [{}] sweep {:.0f} s [{}]",
                       base, base / tol::published_q, a ? "ok" : "x", d30, base, d90, d120, b ? "ok" : "x", core / base,
                       heel / base, c ? "ok" : "x", blanket, cover, d ? "ok" : "x", comp, e ? "ok" : "x", run.seconds,
                       t ? "ok" : "x"));
}

// ---- 5 -------------------------------------------------------------------------------------

void unit_identities() {
    const auto normal = make_discharge_report(9.7e-6, 450.0);
    const auto observed = make_discharge_report(5.5e-6, 450.0);
    const bool ok = normal.q_total_lps == 4.365 && observed.q_total_lps == 2.475;
    report(5, ok,
           fmt::format("9.7e-6 x 450 m = {:.17g} L/s, 5.5e-6 x 450 m = {:.17g} L/s (exact equality)", normal.q_total_lps,
                       observed.q_total_lps));
}

// ---- 7 -------------------------------------------------------------------------------------

void synthetic_twin(const RunConfig& cfg) {
    const auto t0 = Clock::now();
    CalibrationProblem pb;
    pb.section = cfg.build_section();
    pb.scenario = cfg.scenario(cfg.baseline);
    pb.scenario.reservoir_level = 1582.8;
    pb.parameters = cfg.calibration.parameters;
    pb.mesh_size = cfg.calibration.mesh_size;
    pb.settings = cfg.solver;
    pb.observations = cfg.piezometer_records(pb.section);
    const double truth = std::log10(pb.section.find_material(pb.parameters[0].material)->k_sat());

    // heads at the true permeability, read against an arbitrary instrument datum
    auto gen = pb;
    gen.fit_datum = false;
    for (auto& o : gen.observations) o.observed_level = 0.0;
    const auto heads = Objective(gen).evaluate(std::vector<double>{truth});
    if (!heads.solved) throw std::runtime_error("twin generation did not converge");
    const double datum = 1487.25;
    for (std::size_t i = 0; i < pb.observations.size(); ++i) pb.observations[i].observed_level = heads.residuals[i] - datum;

    std::string detail;
    bool ok = true;
    for (double sign : {-1.0, 1.0}) {
        const double start = truth + sign * tol::twin_start_offset;
        const auto r = calibrate(pb, tol::twin_budget, {start});
        const double err = std::abs(r.log10_k[0] - truth);
        ok &= err <= tol::twin_log10 && r.evaluations <= tol::twin_budget;
        detail += fmt::format("start {:+.1f}: fit {:.3f} (err {:.3f}) in {} evaluations; ", start, r.log10_k[0], err,
                              r.evaluations);
    }
    report(7, ok,
           fmt::format("twin, true log10 k {:.2f}: {}tol {} decades, budget {}, {:.0f} s", truth, detail, tol::twin_log10,
                       tol::twin_budget, since(t0)));
}

// ---- 8 -------------------------------------------------------------------------------------

void anomaly_flag(const RunConfig& cfg) {
    const auto series = ingest_instrument_csv(fixtures::source_path("data/sahand_instruments.csv"));
    const auto rep = validate_against_instruments(cfg, series, "2007-05-07");
    const bool ok = rep.converged && rep.observed_q_lps && *rep.observed_q_lps == tol::anomaly_observed_lps &&
                    rep.model_q_lps <= tol::anomaly_model_lps && rep.leakage_anomaly;
    report(8, ok,
           fmt::format("2007-05-07 at {:.1f} m: observed {:.1f} L/s vs model {:.2f} L/s (<= {}), anomaly flag {}",
                       rep.reservoir_level, rep.observed_q_lps.value_or(std::nan("")), rep.model_q_lps,
                       tol::anomaly_model_lps, rep.leakage_anomaly ? "raised" : "not raised"));
}

// ---- 9 -------------------------------------------------------------------------------------

void determinism(const RunConfig& cfg, const SweepRun& first) {
    std::vector<std::pair<std::string, std::string>> csvs{{"library jobs=1", first.csv}};
#ifdef DAMSEEP_CLI
    const fs::path cfg_path = fixtures::source_path("configs/sahand_sweep.json");
    const auto tmp = fixtures::scratch_dir("acceptance_determinism");
    for (unsigned jobs : {1u, 4u}) {
        const fs::path out = tmp / fmt::format("jobs{}", jobs);
        const std::string cmd = fmt::format("\"{}\" sweep \"{}\" --jobs {} --no-export --out \"{}\" > \"{}\" 2>&1",
                                            DAMSEEP_CLI, cfg_path.string(), jobs, out.string(),
                                            (tmp / fmt::format("log{}.txt", jobs)).string());
        const int status = std::system(cmd.c_str());
        if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
            throw std::runtime_error(fmt::format("damseep sweep --jobs {} failed", jobs));
        csvs.push_back({fmt::format("cli jobs={}", jobs), fixtures::slurp(out / "report.csv")});
    }
#else
    SweepOptions par;
    par.jobs = 4;
    std::ostringstream os;
    write_report_csv(run_sweep(cfg, par), os);
    csvs.push_back({"library jobs=4", os.str()});
#endif
    (void)cfg;
    bool same = true;
    for (const auto& [name, csv] : csvs) same &= csv == csvs.front().second && !csv.empty();
    std::string names;
    for (const auto& [name, csv] : csvs) names += (names.empty() ? "" : ", ") + name;
    report(9, same,
           fmt::format("report.csv from {} runs ({}): {}", csvs.size(), names,
                       same ? "byte-identical" : "differ"));
}

}  // namespace

int main() {
    // keep the per-line report readable; library warnings go to stderr with a prefix
    set_warning_handler([](std::string_view m) { std::cerr << "[warning] " << m << '\n'; });

    guarded(1, patch_test);
    guarded(2, element_oracle);
    guarded(3, dupuit_benchmark);

    const RunConfig sweep_cfg = load_config(fixtures::source_path("configs/sahand_sweep.json"));
    std::optional<SweepRun> sweep;
    try {
        sweep = library_sweep(sweep_cfg);
    } catch (const std::exception& e) {
        report(4, false, fmt::format("sweep threw: {}", e.what()));
    }
    if (sweep) guarded(4, [&] { mass_balance(*sweep); });
    guarded(5, unit_identities);
    if (sweep) guarded(6, [&] { trend_suite(*sweep); });
    else report(6, false, "no sweep result");

    const RunConfig base_cfg = load_config(fixtures::source_path("configs/sahand_baseline.json"));
    guarded(7, [&] { synthetic_twin(base_cfg); });
    guarded(8, [&] { anomaly_flag(base_cfg); });
    if (sweep) guarded(9, [&] { determinism(sweep_cfg, *sweep); });
    else report(9, false, "no sweep result");

    fmt::print("{} of 9 criteria passed\n", 9 - failures);
    return failures;
}
