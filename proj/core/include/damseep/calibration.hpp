#pragma once

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "damseep/fem.hpp"
#include "damseep/instruments.hpp"
#include "damseep/section.hpp"

namespace damseep {

/// Named observation point. The level is in the instrument's own datum; adding
/// `datum_offset` converts it to m a.s.l.
struct PiezometerRecord {
    std::string name;
    Point location;
    double observed_level = 0.0;
    double datum_offset = 0.0;

    friend bool operator==(const PiezometerRecord&, const PiezometerRecord&) = default;
};

/// A material whose log10 k (m/s) is searched within [lower, upper].
struct FreeParameter {
    std::string material;
    double lower = -9.0;
    double upper = -2.0;
};

struct CalibrationProblem {
    DamSection section;  // before the scenario is applied
    Scenario scenario;
    std::vector<FreeParameter> parameters;
    std::vector<PiezometerRecord> observations;
    bool fit_datum = true;
    double mesh_size = 8.0;
    SolverSettings settings;

    /// Throws ValidationError on an empty parameter set, bad bounds, or too few observations.
    void validate() const;
};

struct ObjectiveValue {
    double rms = 0.0;           // m
    double datum_offset = 0.0;  // shared offset added to every (observed + record offset)
    bool solved = false;
    std::vector<double> residuals;  // model - observed, aligned with the observations
};

/// Misfit between probed model heads and observations. Meshes the scenario once;
/// each evaluation only swaps the free materials' conductivities.
class Objective {
public:
    explicit Objective(const CalibrationProblem& problem);

    ObjectiveValue evaluate(std::span<const double> log10_k) const;
    double operator()(std::span<const double> log10_k) const { return evaluate(log10_k).rms; }

    /// Current log10 k of each free material, clipped into its bounds.
    std::vector<double> initial_point() const;
    std::size_t dimension() const { return problem_.parameters.size(); }
    const CalibrationProblem& problem() const { return problem_; }

    static constexpr double kPenalty = 1e6;  // returned when the inner solve fails, m

private:
    CalibrationProblem problem_;
    DamSection scenario_section_;
    std::shared_ptr<const Mesh> mesh_;
    NodeConditions conditions_;
    std::vector<double> base_k_;
    std::vector<std::vector<std::size_t>> param_elements_;
};

double objective(const CalibrationProblem& problem, std::span<const double> log10_k);

struct NelderMeadOptions {
    int budget = 200;            // objective evaluations
    double initial_step = 0.5;   // per-axis simplex offset
    double x_tol = 1e-3;         // simplex diameter
    double f_tol = 1e-9;         // spread of simplex values
};

struct NelderMeadResult {
    std::vector<double> x;
    double fx = 0.0;
    int evaluations = 0;
    std::vector<double> history;  // best value after each iteration
    bool converged = false;
};

/// Bound-clipped Nelder-Mead simplex search. Deterministic: the initial simplex
/// offsets each axis by +initial_step (or -initial_step when that leaves the box).
NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f, std::vector<double> x0,
                             std::span<const double> lower, std::span<const double> upper,
                             const NelderMeadOptions& options = {});

struct CalibrationResult {
    std::vector<std::string> materials;
    std::vector<double> log10_k;
    double datum_offset = 0.0;
    double rms_residual = 0.0;
    std::vector<double> residuals;
    std::vector<double> objective_history;
    int evaluations = 0;
    bool converged = false;
};

/// Throws ValidationError when budget < 10 x parameter count.
CalibrationResult calibrate(const CalibrationProblem& problem, int budget, std::vector<double> start = {});

enum class PiezometerStatus { Healthy, Defective, Indeterminate };
std::string to_string(PiezometerStatus status);

struct ScreeningThresholds {
    double min_correlation = 0.3;
    double min_variance = 1e-4;  // m^2
    std::size_t min_samples = 8;
};

struct ScreeningResult {
    PiezometerStatus status = PiezometerStatus::Indeterminate;
    double correlation = 0.0;  // of level changes against reservoir changes
    double variance = 0.0;
    std::size_t samples = 0;   // dates shared with the reservoir series
};

/// Flags instruments that do not follow the reservoir. Reserved series are skipped.
std::map<std::string, ScreeningResult> screen_piezometers(const SeriesMap& series, const std::vector<Sample>& reservoir,
                                                          const ScreeningThresholds& thresholds = {});

}  // namespace damseep
