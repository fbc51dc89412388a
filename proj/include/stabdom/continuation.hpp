#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stabdom/dynsys.hpp"
#include "stabdom/linalg.hpp"

namespace stabdom {

struct ContinuationSettings {
  int max_points = 800;
  double init_step = 1e-3;
  double max_step = 1e-3;
  double min_step = 1e-12;
  double newton_tol = 1e-6;
  int newton_max_iters = 10;
  double test_tol = 1e-5;
  /// Relative step of the finite-difference Jacobian of the extended system.
  double fd_step = kDefaultFdStep;
  /// Stop with Termination::Closed when the branch returns near its start.
  bool detect_closure = false;
  int closure_min_steps = 10;

  /// Equilibrium column of the reference parameter table.
  static ContinuationSettings equilibrium_defaults();
  /// Bifurcation-curve column: 300 points, steps 0.01 / 0.1.
  static ContinuationSettings curve_defaults();

  void validate() const;
};

enum class PointLabel { Regular, LP, H, BP, HH, CP, UserStop };
const char* to_string(PointLabel l);

enum class Termination { MaxPoints, Boundary, StepUnderflow, Diverged, Closed, UserStop };
const char* to_string(Termination t);

/// F : R^{N+1} -> R^N. The unknown vector X holds the state and the active parameters.
struct ExtendedSystem {
  int equations = 0;
  std::function<Vec(const Vec&)> residual;
  /// Optional N x (N+1) Jacobian; central differences are used when empty.
  std::function<Mat(const Vec&)> jacobian;
  /// Number of leading coordinates that are checked for branch closure (state + parameters
  /// are usually placed there by the caller through `closure_coords`).
  std::vector<int> closure_coords;

  int unknowns() const { return equations + 1; }
  Mat jacobian_at(const Vec& x, double fd_step) const;
};

struct BranchPoint {
  Vec x;
  Vec tangent;
  Spectrum spectrum;
  PointLabel label = PointLabel::Regular;
  std::map<std::string, double> tests;
  double arclength = 0.0;
  double residual = 0.0;
};

struct Event {
  PointLabel label = PointLabel::Regular;
  std::size_t arc_index = 0;  // index of the event point inside Branch::points
  BranchPoint point;
  std::string test;
  double omega_h = 0.0;
  bool degenerate = false;
  std::string note;
};

struct Branch {
  std::vector<BranchPoint> points;
  std::vector<Event> events;
  Termination termination = Termination::MaxPoints;
  std::vector<std::string> warnings;
  std::string termination_detail;
};

/// Unit tangent of F_X (N x (N+1)), oriented so that V . v_prev > 0.
Vec tangent(const Mat& fx, const Vec& v_prev);

/// Newton on {F(X) = 0, v_fixed^T (X - x_pred) = 0}.
Vec newton_correct(const ExtendedSystem& f, const Vec& x_pred, const Vec& v_fixed,
                   const ContinuationSettings& settings);

/// Hooks that give a branch its meaning: per-point annotation (spectrum, test
/// functions), the watched test functions, and how a sign change is localized.
struct BranchObserver {
  std::function<void(BranchPoint&, const Mat& fx)> annotate;
  std::vector<std::string> watched;
  /// Called on a sign change of `test` between consecutive accepted points. Returns the
  /// localized event or nothing when the flip is spurious.
  std::function<std::optional<Event>(const ExtendedSystem&, const BranchPoint&, const BranchPoint&,
                                     const std::string& test, const ContinuationSettings&)>
      localize;
  /// Optional stop request, checked after each accepted point.
  std::function<bool(const BranchPoint&)> stop;
};

/// Fills tangent, annotation and residual for an already-converged point.
BranchPoint make_point(const ExtendedSystem& f, const Vec& x, const Vec& v_prev,
                       const BranchObserver& obs, const ContinuationSettings& settings);

/// Pseudo-arc-length predictor-corrector tracing of F(X) = 0 from x0.
/// `initial_direction` orients the first tangent (its sign is what matters).
Branch continue_branch(const ExtendedSystem& f, const Vec& x0, const Vec& initial_direction,
                       const ContinuationSettings& settings, const BranchObserver& obs);

/// Generic zero-finder for a test function between two accepted points a and b: an
/// Illinois-type secant/bisection along the chord, re-correcting onto the branch at
/// each trial point. `tolerance` applies to |test|.
std::optional<BranchPoint> localize_zero(const ExtendedSystem& f, const BranchPoint& a,
                                         const BranchPoint& b, const std::string& test,
                                         double tolerance, const BranchObserver& obs,
                                         const ContinuationSettings& settings);

}  // namespace stabdom
