#pragma once

#include <array>
#include <functional>
#include <string>

#include "stabdom/bifurcation.hpp"
#include "stabdom/continuation.hpp"
#include "stabdom/dynsys.hpp"

namespace stabdom {

enum class CurveKind { Fold, Hopf };
const char* to_string(CurveKind k);

/// Which null vector the fold system carries: f_x * z = 0 (default) or f_x^T * z = 0.
enum class FoldForm { RightNull, Transposed };

inline const std::string kTestSigmaMin = "sigma_min";
inline const std::string kTestOmega = "omega_h";
inline const std::string kTestPairRe = "pair_re";
inline const std::string kTestHH = "hh_re";
inline const std::string kTestCp1 = "cp_dir1";
inline const std::string kTestCp2 = "cp_dir2";

/// Curves of folds or Hopf points in two parameters.
///
/// Unknown layout:
///   fold  X = (state, null vector, p1, p2)               size 2n+2
///   hopf  X = (state, u, v, omega, p1, p2)               size 3n+3
struct Codim2Problem {
  SystemDef sys;
  Vec base_params;
  std::array<int, 2> active{0, 1};
  CurveKind kind = CurveKind::Fold;
  FoldForm fold_form = FoldForm::RightNull;
  double tol_eig = kDefaultEigTol;
  double fd_step = kDefaultFdStep;
  /// Step of the mixed differences used for second-derivative blocks.
  double second_step = 1e-4;

  int n() const { return sys.dim_state; }
  int unknowns() const;
  int param_coord(int k) const { return unknowns() - 2 + k; }
  int omega_coord() const { return 3 * n(); }
  Vec state(const Vec& x) const { return x.head(n()); }
  Vec params_at(const Vec& x) const;
  ExtendedSystem extended() const;
};

/// Starting point of a fold curve at an LP with the given state and full parameter vector.
/// The null vector comes from the SVD of the state Jacobian; the point is then polished
/// with p2 held fixed.
Vec init_fold_curve(const Codim2Problem& problem, const Vec& state, const Vec& params,
                    const ContinuationSettings& settings);

/// Starting point of a Hopf curve at an H point. (u, v) are the real and imaginary parts
/// of the crossing eigenvector, rotated so that u.v = 0 and scaled to unit norm.
Vec init_hopf_curve(const Codim2Problem& problem, const Vec& state, const Vec& params,
                    const ContinuationSettings& settings);

/// Dispatches on the problem kind using an event from an equilibrium branch.
Vec init_from_event(const Codim2Problem& problem, const EquilibriumProblem& seed,
                    const Event& event, const ContinuationSettings& settings);

BranchObserver codim2_observer(const Codim2Problem& problem);

/// Traces the curve from x0. `param_direction` orients the first step in the (p1, p2) plane.
Branch continue_codim2(const Codim2Problem& problem, const Vec& x0,
                       const std::array<double, 2>& param_direction,
                       const ContinuationSettings& settings,
                       std::function<bool(const BranchPoint&)> stop = {});

/// Residual norm of every block of the extended system at x.
double codim2_residual(const Codim2Problem& problem, const Vec& x);

}  // namespace stabdom
