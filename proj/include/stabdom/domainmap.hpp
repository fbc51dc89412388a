#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "stabdom/bifurcation.hpp"
#include "stabdom/cdpr.hpp"
#include "stabdom/codim2.hpp"
#include "stabdom/continuation.hpp"

namespace stabdom {

using Point2 = std::array<double, 2>;
using Polyline = std::vector<Point2>;

enum class Plane { Reference, State };
const char* to_string(Plane p);
Plane plane_from_string(const std::string& s);

enum class CurveStatus { Closed, Open, NoBoundary, Failed };
const char* to_string(CurveStatus s);

struct PipelineSettings {
  ContinuationSettings equilibrium = ContinuationSettings::equilibrium_defaults();
  ContinuationSettings curve = ContinuationSettings::curve_defaults();

  /// The integrator states of the PID loop are large, so equilibrium runs on the robot use
  /// a longer step and more points than the generic defaults to reach the triangle edge.
  static PipelineSettings cdpr_defaults();
};

/// Equilibrium branch from the origin along +x_r, its first H (PID) or LP (PD) and the
/// codim-2 curve grown from it.
struct BoundaryRun {
  double omega = 0.0;
  cdpr::Controller controller = cdpr::Controller::PID;
  CurveStatus status = CurveStatus::Failed;
  std::string detail;
  Branch equilibrium;
  std::optional<Event> seed;
  Codim2Problem problem;
  Branch curve;
};

BoundaryRun stability_boundary(const cdpr::CdprConfig& cfg, double omega,
                               const PipelineSettings& settings);

/// The closed-loop equilibrium problem with x_r active, for a given omega0.
EquilibriumProblem cdpr_equilibrium_problem(const cdpr::CdprConfig& cfg, double omega, int active);

/// Curve points projected on the (x_r, y_r) plane or the (x, y) plane.
Polyline project(const Codim2Problem& problem, const Branch& curve, Plane plane);

struct CurveRecord {
  double omega = 0.0;
  CurveStatus status = CurveStatus::Failed;
  std::string detail;
  CurveKind kind = CurveKind::Hopf;
  Polyline points;
  std::vector<PointLabel> flags;  // HH / CP events found along the curve
  double seed_parameter = 0.0;
};

struct DomainSurface {
  Plane plane = Plane::Reference;
  cdpr::Controller controller = cdpr::Controller::PID;
  std::vector<double> omega_values;
  std::vector<CurveRecord> curves;  // same order as omega_values
};

/// Worker count for sweeps: STABDOM_THREADS if set, else hardware concurrency.
int sweep_threads();

DomainSurface sweep(const cdpr::CdprConfig& base, std::vector<double> omegas, Plane plane,
                    const PipelineSettings& settings, int threads = 0);

struct CylindricalGrid {
  std::vector<double> phi;
  std::vector<double> omega;
  Mat radius;  // rows: omega, cols: phi; NaN marks a missing cell
  std::vector<std::string> warnings;
};

/// Radius where the ray at angle phi from the origin meets the closed polyline; the
/// nearest crossing is used. Nothing when the ray misses.
std::optional<double> ray_radius(const Polyline& curve, double phi, int* crossings = nullptr);

CylindricalGrid to_cylindrical_grid(const DomainSurface& surface, int n_phi);

struct AreaResult {
  double area = 0.0;
  double signed_area = 0.0;
  bool self_intersecting = false;
};

AreaResult compute_area(const Polyline& curve);

/// Symmetric Hausdorff distance between closed polylines, using point-to-segment distances.
double hausdorff_distance(const Polyline& a, const Polyline& b);
Polyline mirror_x(const Polyline& c);

struct FloorSettings {
  PipelineSettings pipeline = PipelineSettings::cdpr_defaults();
  double seed_omega = 0.5;
  double r_floor = 1e-5;
  double flag_tol = 1e-3;
  int fit_points = 6;
};

struct FloorTrace {
  CurveKind kind = CurveKind::Hopf;
  Branch branch;
  Polyline r_omega;  // (r, omega) along the curve
  double r_min = 0.0;
  double omega_at_r_min = 0.0;
  bool reached_floor = false;
  /// Extrapolated end of the curve and the monitor value there.
  double vertex_r = 0.0;
  double vertex_omega = 0.0;
  double vertex_monitor = 0.0;
  bool flagged = false;
  PointLabel flag = PointLabel::Regular;
  std::string detail;
};

/// Curve of the boundary crossing along the ray at angle phi in the (r, omega) plane,
/// followed toward decreasing omega until r drops below r_floor.
FloorTrace omega_floor_trace(const cdpr::CdprConfig& cfg, double phi, const FloorSettings& settings);

}  // namespace stabdom
