#include "stabdom/dynsys.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "stabdom/errors.hpp"

namespace stabdom {

Vec SystemDef::operator()(const Vec& state, const Vec& params) const {
  Vec out = eval(state, params);
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (!std::isfinite(out[i])) {
      throw NonFiniteEvaluation(static_cast<int>(i),
                                "non-finite vector field component " + std::to_string(i));
    }
  }
  return out;
}

int SystemDef::param_index(const std::string& name) const {
  auto it = std::find(param_names.begin(), param_names.end(), name);
  if (it == param_names.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return static_cast<int>(it - param_names.begin());
}

void SystemDef::validate() const {
  if (dim_state < 1 || dim_params < 1) throw PreconditionViolation("system needs n >= 1 and p >= 1");
  if (!eval) throw PreconditionViolation("system has no vector field");
  if (!param_names.empty() && static_cast<int>(param_names.size()) != dim_params) {
    throw PreconditionViolation("parameter name count differs from dim_params");
  }
}

Mat jacobian_state(const SystemDef& sys, const Vec& state, const Vec& params, double fd_step) {
  if (sys.state_jacobian) return sys.state_jacobian(state, params);
  const int n = sys.dim_state;
  Mat jac(n, n);
  Vec xp = state;
  Vec xm = state;
  for (int i = 0; i < n; ++i) {
    const double h = fd_step * std::max(1.0, std::abs(state[i]));
    xp[i] = state[i] + h;
    xm[i] = state[i] - h;
    jac.col(i) = (sys(xp, params) - sys(xm, params)) / (xp[i] - xm[i]);
    xp[i] = state[i];
    xm[i] = state[i];
  }
  return jac;
}

Mat jacobian_params(const SystemDef& sys, const Vec& state, const Vec& params,
                    std::span<const int> which, double fd_step) {
  Mat jac(sys.dim_state, static_cast<Eigen::Index>(which.size()));
  Vec ap = params;
  Vec am = params;
  for (std::size_t c = 0; c < which.size(); ++c) {
    const int k = which[c];
    const double h = fd_step * std::max(1.0, std::abs(params[k]));
    ap[k] = params[k] + h;
    am[k] = params[k] - h;
    jac.col(static_cast<Eigen::Index>(c)) = (sys(state, ap) - sys(state, am)) / (ap[k] - am[k]);
    ap[k] = params[k];
    am[k] = params[k];
  }
  return jac;
}

const char* to_string(Stability s) {
  switch (s) {
    case Stability::Stable: return "stable";
    case Stability::Marginal: return "marginal";
    case Stability::Unstable: return "unstable";
  }
  return "?";
}

Spectrum spectrum_of(const Mat& jac, double tol_eig) {
  if (jac.rows() != jac.cols()) throw EigenFailure("spectrum of a non-square matrix");
  Eigen::EigenSolver<Mat> solver(jac, false);
  if (solver.info() != Eigen::Success) throw EigenFailure("eigenvalue iteration did not converge");

  Spectrum s;
  const auto& ev = solver.eigenvalues();
  s.eigenvalues.assign(ev.data(), ev.data() + ev.size());
  // Real input: snap conjugate pairs so the pair property holds bitwise.
  for (auto& z : s.eigenvalues) {
    if (z.imag() == 0.0) z = Complex(z.real(), 0.0);
  }
  std::sort(s.eigenvalues.begin(), s.eigenvalues.end(), [](const Complex& a, const Complex& b) {
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() > b.imag();
  });
  s.max_real = s.eigenvalues.empty() ? 0.0 : s.eigenvalues.front().real();
  if (s.max_real < -tol_eig) {
    s.stability = Stability::Stable;
  } else if (s.max_real > tol_eig) {
    s.stability = Stability::Unstable;
  } else {
    s.stability = Stability::Marginal;
  }
  return s;
}

Spectrum classify(const SystemDef& sys, const Vec& state, const Vec& params, double tol_eig,
                  double fd_step) {
  return spectrum_of(jacobian_state(sys, state, params, fd_step), tol_eig);
}

double smallest_singular_value(const Mat& m) {
  Eigen::JacobiSVD<Mat> svd(m);
  const auto& sv = svd.singularValues();
  return sv.size() == 0 ? 0.0 : sv[sv.size() - 1];
}

SystemDef reparameterize(const SystemDef& base, int dim_params, std::vector<std::string> names,
                         std::function<Vec(const Vec&)> to_base_params) {
  SystemDef out;
  out.dim_state = base.dim_state;
  out.dim_params = dim_params;
  out.param_names = std::move(names);
  out.state_names = base.state_names;
  out.eval = [base, to_base_params](const Vec& x, const Vec& p) {
    return base.eval(x, to_base_params(p));
  };
  if (base.state_jacobian) {
    out.state_jacobian = [base, to_base_params](const Vec& x, const Vec& p) {
      return base.state_jacobian(x, to_base_params(p));
    };
  }
  return out;
}

}  // namespace stabdom
