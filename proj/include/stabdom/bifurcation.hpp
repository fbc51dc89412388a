#pragma once

#include <functional>
#include <optional>
#include <string>

#include "stabdom/continuation.hpp"
#include "stabdom/dynsys.hpp"

namespace stabdom {

inline const std::string kTestBp = "bp_det";
inline const std::string kTestLp = "lp_tangent";
inline const std::string kTestHopf = "hopf_re";

struct TestFunctionSet {
  double bp_det = 0.0;
  double lp_tangent = 0.0;
  /// Real part of the complex pair closest to the imaginary axis; NaN when there is none.
  double hopf_re = 0.0;
};

/// `fx` is the N x (N+1) extended Jacobian, `param_col` the column of the active parameter.
TestFunctionSet evaluate_tests(const Mat& fx, const Vec& tangent, const Spectrum& spectrum,
                               int param_col);

/// Equilibria of `sys` with one free parameter: X = (state, lambda).
struct EquilibriumProblem {
  SystemDef sys;
  Vec base_params;
  int active = 0;
  double tol_eig = kDefaultEigTol;
  /// Marks localized events as degenerate (e.g. a Hopf point sitting on a winder).
  std::function<bool(const Vec& state)> degenerate;
  /// Physical domain of the state; leaving it ends the branch with Termination::Boundary.
  std::function<bool(const Vec& state)> inside;

  int n() const { return sys.dim_state; }
  Vec params_at(const Vec& x) const;
  ExtendedSystem extended(double fd_step = kDefaultFdStep) const;
  Vec pack(const Vec& state, double lambda) const;
};

BranchObserver equilibrium_observer(const EquilibriumProblem& problem);

/// Localizes a sign change of `test` between a and b and labels the result.
/// Returns nothing for spurious flips.
std::optional<Event> localize_event(const EquilibriumProblem& problem, const ExtendedSystem& f,
                                    const BranchPoint& a, const BranchPoint& b,
                                    const std::string& test, const ContinuationSettings& settings);

/// One-parameter equilibrium branch from (state0, params0[active]) with monitors.
Branch trace_equilibria(const EquilibriumProblem& problem, const Vec& state0, int direction,
                        const ContinuationSettings& settings);

/// Eigenvalue with positive imaginary part closest to the imaginary axis, skipping
/// `exclude` (within 1e-9) when given.
std::optional<Complex> critical_pair(const Spectrum& s, std::optional<Complex> exclude = {});
std::optional<Complex> nearest_upper(const Spectrum& s, const Complex& target,
                                     std::optional<Complex> exclude = {});

struct TrackedCrossing {
  BranchPoint point;
  Complex eigenvalue;
};

/// Localizes the point between a and b where the eigenvalue that moves from `za` (at a)
/// to `zb` (at b) crosses the imaginary axis. The pair is followed by nearest-neighbour
/// matching against the linear interpolation of za and zb along the chord.
std::optional<TrackedCrossing> localize_pair_crossing(const ExtendedSystem& f, const BranchPoint& a,
                                                      const BranchPoint& b, Complex za, Complex zb,
                                                      BranchObserver obs,
                                                      const ContinuationSettings& settings);

struct StableSegment {
  double start = 0.0;
  double end = 0.0;
  std::size_t end_index = 0;
  bool ended_by_event = false;
  PointLabel end_label = PointLabel::Regular;
  std::string consistency_warning;  // empty when flags and events agree
};

/// Maximal stable prefix of a branch; `param_coord` is the X index of the active parameter.
StableSegment stable_segment(const Branch& branch, int param_coord, double test_tol);

}  // namespace stabdom
