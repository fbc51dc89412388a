#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "stabdom/linalg.hpp"

namespace stabdom {

inline constexpr double kDefaultFdStep = 1e-6;
inline constexpr double kDefaultEigTol = 1e-8;

/// A parameterized vector field chi' = f(chi, alpha).
///
/// `eval` must be deterministic and free of side effects. When
/// `state_jacobian` is empty the Jacobian is obtained by central differences.
struct SystemDef {
  int dim_state = 0;
  int dim_params = 0;
  std::function<Vec(const Vec& state, const Vec& params)> eval;
  std::function<Mat(const Vec& state, const Vec& params)> state_jacobian;
  std::vector<std::string> param_names;
  std::vector<std::string> state_names;

  /// Evaluates f and throws NonFiniteEvaluation on NaN/Inf output.
  Vec operator()(const Vec& state, const Vec& params) const;

  /// Index of a named parameter; throws std::out_of_range when unknown.
  int param_index(const std::string& name) const;
  void validate() const;
};

Mat jacobian_state(const SystemDef& sys, const Vec& state, const Vec& params,
                   double fd_step = kDefaultFdStep);

/// Columns of df/dalpha for the parameter indices in `which`.
Mat jacobian_params(const SystemDef& sys, const Vec& state, const Vec& params,
                    std::span<const int> which, double fd_step = kDefaultFdStep);

enum class Stability { Stable, Marginal, Unstable };

const char* to_string(Stability s);

struct Spectrum {
  std::vector<Complex> eigenvalues;  // descending real part, then descending imaginary part
  double max_real = 0.0;
  Stability stability = Stability::Stable;
};

/// Eigenvalues of an arbitrary real square matrix, classified with tolerance `tol_eig`.
Spectrum spectrum_of(const Mat& jac, double tol_eig = kDefaultEigTol);

Spectrum classify(const SystemDef& sys, const Vec& state, const Vec& params,
                  double tol_eig = kDefaultEigTol, double fd_step = kDefaultFdStep);

double smallest_singular_value(const Mat& m);

/// Wraps `base` so that its parameters are computed from a new parameter vector.
SystemDef reparameterize(const SystemDef& base, int dim_params, std::vector<std::string> names,
                         std::function<Vec(const Vec&)> to_base_params);

}  // namespace stabdom
