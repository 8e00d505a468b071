#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "damseep/fem.hpp"

namespace damseep {

/// Point location on a mesh through a uniform bucket grid.
class ElementLocator {
public:
    explicit ElementLocator(const Mesh& mesh);
    /// Index of an element containing p (closed, with a small tolerance), or -1.
    int find(Point p) const;

private:
    const Mesh* mesh_;
    double x0_ = 0.0, y0_ = 0.0, cell_ = 1.0;
    int nx_ = 1, ny_ = 1;
    std::vector<std::vector<int>> buckets_;
};

/// Linear interpolation of the head at p. Throws OutOfDomainError outside the mesh.
double probe_head(const SeepageSolution& solution, Point p);
double probe_head(const SeepageSolution& solution, const ElementLocator& locator, Point p);

struct DischargeReport {
    double q_per_meter = 0.0;  // m^3/s per m
    double crest_length = 0.0; // m
    double q_total_lps = 0.0;  // L/s
    std::string scenario_id;
};

DischargeReport make_discharge_report(double q_per_meter, double crest_length, std::string scenario_id = {});

/// Total Dirichlet inflow, scaled by the crest length. Throws NotConvergedError on unconverged input.
DischargeReport total_discharge(const SeepageSolution& solution, const DamSection& section,
                                std::string scenario_id = {});

struct PhreaticLine {
    std::vector<Point> points;  // upstream to downstream, x strictly increasing
    bool confined = false;      // no free surface in the domain
};

PhreaticLine phreatic_line(const SeepageSolution& solution);

struct GradientField {
    std::vector<Point> gradient;    // per element
    std::vector<double> magnitude;
};

GradientField gradient_field(const SeepageSolution& solution);

struct ExitGradient {
    double magnitude = 0.0;
    int element = -1;
};

/// Largest gradient over elements with an edge on a downstream boundary segment.
ExitGradient exit_gradient(const SeepageSolution& solution, const DamSection& section, const GradientField& field);

/// Highest elevation at which water leaves through the downstream boundary; NaN when nothing does.
double exit_elevation(const SeepageSolution& solution, const DamSection& section);

/// Horizontal Darcy flux integrated over the vertical line x = x_cut, m^3/s per m (positive = +x).
double cut_line_discharge(const SeepageSolution& solution, double x_cut);

// ---- exports -----------------------------------------------------------------------------

struct FlowNetOptions {
    int contour_count = 15;
    bool velocity_glyphs = true;
    double width_px = 1400.0;
    std::vector<std::string> palette = {"#e8d8b0", "#c9b27c", "#b0c4de", "#a0522d", "#f4e3a1",
                                        "#87ceeb", "#d2b48c", "#9acd32", "#cccccc", "#ffb6c1"};
};

/// Legacy ASCII VTK 3.0 unstructured grid: point head/pressure, cell velocity, k_r and zone.
void write_vtk(const SeepageSolution& solution, std::ostream& os);

struct VtkData {
    std::vector<Point> points;
    std::vector<std::array<int, 3>> cells;
    std::vector<double> head;
    std::vector<double> pressure_head;
    std::vector<Point> velocity;
    std::vector<double> saturation;
};

/// Reads back what write_vtk produced. Throws IoError on malformed input.
VtkData read_vtk(std::istream& is);

/// Zones, equipotentials, phreatic line and velocity glyphs.
void write_svg(const SeepageSolution& solution, const DamSection& section, std::ostream& os,
               const FlowNetOptions& options = {});

/// Writes `<stem>.vtk` and `<stem>.svg`. Throws IoError when the files cannot be written.
void export_flow_net(const SeepageSolution& solution, const DamSection& section, const std::filesystem::path& stem,
                     const FlowNetOptions& options = {});

}  // namespace damseep
