#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "damseep/config.hpp"
#include "damseep/instruments.hpp"
#include "damseep/postproc.hpp"

namespace damseep {

struct ScenarioOutcome {
    std::string name;
    bool converged = false;
    std::string error;  // geometry, mesh or solver failure; empty otherwise
    DischargeReport discharge;
    double inflow = 0.0;   // m^3/s per m
    double outflow = 0.0;
    double mass_balance = 0.0;  // |inflow - outflow| / inflow
    double max_exit_gradient = 0.0;
    double exit_elevation = 0.0;  // NaN when nothing leaves downstream
    std::optional<double> ratio_to_baseline;
    int outer_iterations = 0;
    std::size_t nodes = 0;
    std::size_t elements = 0;
    double seconds = 0.0;
    std::string alert;  // green / yellow / red discharge band
    std::vector<std::filesystem::path> files;
};

struct SweepResult {
    std::vector<ScenarioOutcome> scenarios;  // config order
    std::string baseline;

    bool all_converged() const;
    const ScenarioOutcome* find(const std::string& name) const;
};

struct SweepOptions {
    unsigned jobs = 0;  // 0 = hardware concurrency
    std::optional<std::filesystem::path> output_dir;  // flow-net exports; none = no files
    std::vector<std::string> only;  // restrict to these scenario names
};

/// Meshes and solves one scenario. Failures are captured in the outcome, never thrown.
ScenarioOutcome run_scenario(const RunConfig& config, const Scenario& scenario,
                             const std::optional<std::filesystem::path>& export_dir = std::nullopt,
                             SeepageSolution* solution_out = nullptr);

/// Solves every scenario on a worker pool. Results do not depend on the worker count.
SweepResult run_sweep(const RunConfig& config, const SweepOptions& options = {});

/// Deterministic table (no timings) for diffing between runs.
void write_report_csv(const SweepResult& result, std::ostream& os);
/// Aligned human-readable table, including wall-clock seconds.
void write_report_text(const SweepResult& result, std::ostream& os);

/// Writes report.csv, report.txt and manifest.json under `dir`.
void write_sweep_outputs(const SweepResult& result, const RunConfig& config, std::string_view config_text,
                         const std::filesystem::path& dir);

std::string discharge_alert(double q_total_lps, const ReportSpec& spec);

struct PiezometerComparison {
    std::string name;
    double observed = 0.0;  // instrument level + record offset + fitted datum
    double model = 0.0;
    double residual = 0.0;  // model - observed
    PiezometerStatus status = PiezometerStatus::Indeterminate;
};

struct ValidationReport {
    std::string date;
    double reservoir_level = 0.0;
    std::vector<PiezometerComparison> piezometers;  // healthy ones only
    std::vector<std::string> excluded;              // screened out or missing that day
    double datum_offset = 0.0;
    double rms = 0.0;
    bool converged = false;
    double model_q_lps = 0.0;
    std::optional<double> observed_q_lps;
    bool leakage_anomaly = false;
};

/// Solves the baseline scenario at the reservoir level recorded on `date` and compares
/// with the healthy piezometers. Throws ValidationError when the date has no reservoir
/// reading or no healthy observation remains.
ValidationReport validate_against_instruments(const RunConfig& config, const SeriesMap& instruments,
                                              const std::string& date);

void write_validation_report(const ValidationReport& report, std::ostream& os);

}  // namespace damseep
