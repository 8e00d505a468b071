#include "damseep/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "damseep/error.hpp"
#include "damseep/log.hpp"
#include "damseep/postproc.hpp"

namespace damseep {

void CalibrationProblem::validate() const {
    if (parameters.empty()) throw ValidationError("calibration needs at least one free parameter");
    for (const auto& p : parameters) {
        if (!std::isfinite(p.lower) || !std::isfinite(p.upper) || !(p.lower < p.upper))
            throw ValidationError(fmt::format("bounds of '{}' must be finite with lower < upper", p.material));
        if (!section.find_material(p.material))
            throw ValidationError(fmt::format("free parameter names unknown material '{}'", p.material));
    }
    if (observations.empty()) throw ValidationError("calibration needs at least one observation");
    if (fit_datum && observations.size() < 2)
        throw ValidationError("fitting the datum needs at least two observations");
    if (!(mesh_size > 0.0)) throw ValidationError("calibration mesh size must be > 0");
    settings.validate();
}

Objective::Objective(const CalibrationProblem& problem) : problem_(problem) {
    for (const auto& p : problem_.parameters)
        if (!problem_.section.find_material(p.material))
            throw ValidationError(fmt::format("free parameter names unknown material '{}'", p.material));
    if (problem_.fit_datum && problem_.observations.size() < 2)
        warn("a single observation with a fitted datum is under-determined; the misfit is always zero");

    scenario_section_ = apply_scenario(problem_.section, problem_.scenario);
    mesh_ = std::make_shared<const Mesh>(triangulate(scenario_section_, problem_.mesh_size));
    conditions_ = node_conditions(*mesh_, scenario_section_);
    base_k_ = element_conductivities(*mesh_, scenario_section_);
    param_elements_.resize(problem_.parameters.size());
    for (std::size_t e = 0; e < mesh_->elements.size(); ++e) {
        const auto& mat = scenario_section_.zones[static_cast<std::size_t>(mesh_->elements[e].zone)].material;
        for (std::size_t i = 0; i < problem_.parameters.size(); ++i)
            if (problem_.parameters[i].material == mat) param_elements_[i].push_back(e);
    }
}

std::vector<double> Objective::initial_point() const {
    std::vector<double> x;
    for (const auto& p : problem_.parameters)
        x.push_back(std::clamp(std::log10(problem_.section.find_material(p.material)->k_sat()), p.lower, p.upper));
    return x;
}

ObjectiveValue Objective::evaluate(std::span<const double> log10_k) const {
    if (log10_k.size() != problem_.parameters.size())
        throw ValidationError(fmt::format("expected {} parameters, got {}", problem_.parameters.size(), log10_k.size()));
    auto k = base_k_;
    for (std::size_t i = 0; i < log10_k.size(); ++i) {
        const auto& p = problem_.parameters[i];
        if (!(log10_k[i] >= p.lower && log10_k[i] <= p.upper))
            throw ValidationError(fmt::format("log10 k of '{}' = {} is outside [{}, {}]", p.material, log10_k[i],
                                              p.lower, p.upper));
        const double ki = std::pow(10.0, log10_k[i]);
        for (std::size_t e : param_elements_[i]) k[e] = ki;
    }

    ObjectiveValue out;
    const auto sol = solve_unconfined(mesh_, std::move(k), conditions_, problem_.settings);
    if (!sol.converged) {
        warn(fmt::format("calibration solve did not converge ({}); penalised", sol.diagnostic));
        out.rms = kPenalty;
        return out;
    }
    out.solved = true;
    const ElementLocator locator(*mesh_);
    const auto& obs = problem_.observations;
    out.residuals.resize(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i)
        out.residuals[i] = probe_head(sol, locator, obs[i].location) - (obs[i].observed_level + obs[i].datum_offset);
    if (problem_.fit_datum) {
        // sorted summation keeps the value independent of observation order
        auto r = out.residuals;
        std::sort(r.begin(), r.end());
        out.datum_offset = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
        for (double& v : out.residuals) v -= out.datum_offset;
    }
    auto sq = out.residuals;
    for (double& v : sq) v *= v;
    std::sort(sq.begin(), sq.end());
    out.rms = std::sqrt(std::accumulate(sq.begin(), sq.end(), 0.0) / static_cast<double>(sq.size()));
    return out;
}

double objective(const CalibrationProblem& problem, std::span<const double> log10_k) {
    return Objective(problem)(log10_k);
}

NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f, std::vector<double> x0,
                             std::span<const double> lo, std::span<const double> hi, const NelderMeadOptions& opt) {
    const std::size_t n = x0.size();
    if (n == 0) throw ValidationError("nelder_mead needs at least one variable");
    if (lo.size() != n || hi.size() != n) throw ValidationError("bounds do not match the start point");
    if (opt.budget < static_cast<int>(n) + 1) throw ValidationError("budget too small for the initial simplex");

    auto clip = [&](std::vector<double>& x) {
        for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
    };
    NelderMeadResult res;
    auto eval = [&](const std::vector<double>& x) {
        ++res.evaluations;
        const double v = f(x);
        return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
    };

    clip(x0);
    std::vector<std::vector<double>> pts{x0};
    for (std::size_t i = 0; i < n; ++i) {
        auto x = x0;
        x[i] += x[i] + opt.initial_step <= hi[i] ? opt.initial_step : -opt.initial_step;
        clip(x);
        pts.push_back(std::move(x));
    }
    std::vector<double> fv;
    for (const auto& p : pts) fv.push_back(eval(p));

    std::vector<std::size_t> order(n + 1);
    auto sort_simplex = [&] {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        std::vector<std::vector<double>> p2;
        std::vector<double> f2;
        for (auto i : order) p2.push_back(pts[i]), f2.push_back(fv[i]);
        pts = std::move(p2);
        fv = std::move(f2);
    };
    auto done = [&] {
        double diam = 0.0;
        for (std::size_t j = 1; j <= n; ++j)
            for (std::size_t i = 0; i < n; ++i) diam = std::max(diam, std::abs(pts[j][i] - pts[0][i]));
        return diam <= opt.x_tol || fv[n] - fv[0] <= opt.f_tol;
    };
    auto along = [&](const std::vector<double>& c, double t) {
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = c[i] + t * (pts[n][i] - c[i]);
        clip(x);
        return x;
    };

    sort_simplex();
    res.history.push_back(fv[0]);
    while (!(res.converged = done()) && res.evaluations < opt.budget) {
        std::vector<double> c(n, 0.0);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < n; ++i) c[i] += pts[j][i] / static_cast<double>(n);

        const auto xr = along(c, -1.0);
        const double fr = eval(xr);
        if (fr < fv[0]) {
            if (res.evaluations < opt.budget) {
                const auto xe = along(c, -2.0);
                const double fe = eval(xe);
                if (fe < fr) pts[n] = xe, fv[n] = fe;
                else pts[n] = xr, fv[n] = fr;
            } else {
                pts[n] = xr, fv[n] = fr;
            }
        } else if (fr < fv[n - 1]) {
            pts[n] = xr, fv[n] = fr;
        } else if (res.evaluations < opt.budget) {
            const bool outside = fr < fv[n];
            const auto xc = along(c, outside ? -0.5 : 0.5);
            const double fc = eval(xc);
            if (fc < (outside ? fr : fv[n])) {
                pts[n] = xc, fv[n] = fc;
            } else {
                for (std::size_t j = 1; j <= n && res.evaluations < opt.budget; ++j) {
                    for (std::size_t i = 0; i < n; ++i) pts[j][i] = pts[0][i] + 0.5 * (pts[j][i] - pts[0][i]);
                    fv[j] = eval(pts[j]);
                }
            }
        }
        sort_simplex();
        res.history.push_back(fv[0]);
    }
    res.x = pts[0];
    res.fx = fv[0];
    return res;
}

CalibrationResult calibrate(const CalibrationProblem& problem, int budget, std::vector<double> start) {
    problem.validate();
    const auto n = problem.parameters.size();
    if (budget < 10 * static_cast<int>(n))
        throw ValidationError(fmt::format("budget {} is below 10 x {} parameters", budget, n));
    const Objective obj(problem);
    if (start.empty()) start = obj.initial_point();
    if (start.size() != n) throw ValidationError("start point does not match the parameter count");

    std::vector<double> lo, hi;
    for (const auto& p : problem.parameters) lo.push_back(p.lower), hi.push_back(p.upper);
    NelderMeadOptions opt;
    opt.budget = budget;
    opt.f_tol = 0.1 * problem.settings.tol_head;
    const auto nm = nelder_mead([&](std::span<const double> x) { return obj(x); }, start, lo, hi, opt);

    CalibrationResult r;
    for (const auto& p : problem.parameters) r.materials.push_back(p.material);
    r.log10_k = nm.x;
    r.objective_history = nm.history;
    r.evaluations = nm.evaluations;
    r.converged = nm.converged;
    // one more solve at the optimum for the offset and residuals; not counted against the budget
    const auto best = obj.evaluate(nm.x);
    r.datum_offset = best.datum_offset;
    r.rms_residual = best.rms;
    r.residuals = best.residuals;
    return r;
}

std::string to_string(PiezometerStatus s) {
    switch (s) {
        case PiezometerStatus::Healthy: return "healthy";
        case PiezometerStatus::Defective: return "defective";
        case PiezometerStatus::Indeterminate: return "indeterminate";
    }
    return "?";
}

std::map<std::string, ScreeningResult> screen_piezometers(const SeriesMap& series, const std::vector<Sample>& reservoir,
                                                          const ScreeningThresholds& th) {
    std::map<std::string, ScreeningResult> out;
    for (const auto& [name, s] : series) {
        if (name == kReservoirSeries || name == kDischargeSeries) continue;
        std::vector<double> lv, rv;
        for (const auto& smp : s)
            if (const auto r = value_on(reservoir, smp.date)) lv.push_back(smp.level), rv.push_back(*r);

        ScreeningResult res;
        res.samples = lv.size();
        if (lv.size() < std::max<std::size_t>(th.min_samples, 2)) {
            out[name] = res;
            continue;
        }
        const double n = static_cast<double>(lv.size());
        const double mean = std::accumulate(lv.begin(), lv.end(), 0.0) / n;
        for (double v : lv) res.variance += (v - mean) * (v - mean) / n;

        std::vector<double> dl, dr;
        for (std::size_t i = 1; i < lv.size(); ++i) dl.push_back(lv[i] - lv[i - 1]), dr.push_back(rv[i] - rv[i - 1]);
        const double m = static_cast<double>(dl.size());
        const double ml = std::accumulate(dl.begin(), dl.end(), 0.0) / m;
        const double mr = std::accumulate(dr.begin(), dr.end(), 0.0) / m;
        double sll = 0, srr = 0, slr = 0;
        for (std::size_t i = 0; i < dl.size(); ++i) {
            sll += (dl[i] - ml) * (dl[i] - ml);
            srr += (dr[i] - mr) * (dr[i] - mr);
            slr += (dl[i] - ml) * (dr[i] - mr);
        }
        res.correlation = sll > 0 && srr > 0 ? slr / std::sqrt(sll * srr) : 0.0;

        if (res.variance < th.min_variance) res.status = PiezometerStatus::Defective;
        else if (!(srr > 0)) res.status = PiezometerStatus::Indeterminate;  // reservoir never moved
        else res.status = res.correlation < th.min_correlation ? PiezometerStatus::Defective : PiezometerStatus::Healthy;
        out[name] = res;
    }
    return out;
}

}  // namespace damseep
