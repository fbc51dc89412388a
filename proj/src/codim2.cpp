#include "stabdom/codim2.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "stabdom/errors.hpp"

namespace stabdom {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kSingularGap = 1e-8;
// Relative size of sigma_min (resp. |Re| of the pair) accepted as "on the bifurcation set"
// before polishing.
constexpr double kInitNullTol = 1e-3;
constexpr double kInitAxisTol = 1e-3;
// Fraction of the neighbouring parameter speed below which a tangent reversal is a cusp.
constexpr double kCuspSpeedRatio = 0.2;

double step_for(double v, double h) { return h * std::max(1.0, std::abs(v)); }

// d/de [ f_x(x + e*dx, p + e*dp) * w ] at e = 0, from a four-point mixed difference.
Vec mixed_second(const SystemDef& sys, const Vec& x, const Vec& p, const Vec& w, const Vec& dx,
                 const Vec& dp, double h) {
  const double wn = w.norm();
  if (wn == 0.0) return Vec::Zero(sys.dim_state);
  const double t = h / wn;
  const Vec xp = x + h * dx;
  const Vec xm = x - h * dx;
  const Vec pp = p + h * dp;
  const Vec pm = p - h * dp;
  const Vec fpp = sys(xp + t * w, pp);
  const Vec fpm = sys(xp - t * w, pp);
  const Vec fmp = sys(xm + t * w, pm);
  const Vec fmm = sys(xm - t * w, pm);
  return (fpp - fpm - fmp + fmm) / (4.0 * h * t);
}

// Columns d(f_x w)/d(state_j) and d(f_x w)/d(p_active_k).
Mat second_block(const Codim2Problem& pr, const Vec& x, const Vec& p, const Vec& w) {
  const int n = pr.n();
  Mat out(n, n + 2);
  Vec dx = Vec::Zero(n);
  Vec dp = Vec::Zero(p.size());
  for (int j = 0; j < n; ++j) {
    const double h = step_for(x[j], pr.second_step);
    dx[j] = 1.0;
    out.col(j) = mixed_second(pr.sys, x, p, w, dx, dp, h);
    dx[j] = 0.0;
  }
  for (int k = 0; k < 2; ++k) {
    const int idx = pr.active[k];
    const double h = step_for(p[idx], pr.second_step);
    dp[idx] = 1.0;
    out.col(n + k) = mixed_second(pr.sys, x, p, w, dx, dp, h);
    dp[idx] = 0.0;
  }
  return out;
}

Vec fold_residual(const Codim2Problem& pr, const Vec& x) {
  const int n = pr.n();
  const Vec s = x.head(n);
  const Vec z = x.segment(n, n);
  const Vec p = pr.params_at(x);
  const Mat a = jacobian_state(pr.sys, s, p, pr.fd_step);
  Vec r(2 * n + 1);
  r.head(n) = pr.sys(s, p);
  r.segment(n, n) = pr.fold_form == FoldForm::RightNull ? Vec(a * z) : Vec(a.transpose() * z);
  r[2 * n] = z.squaredNorm() - 1.0;
  return r;
}

Vec hopf_residual(const Codim2Problem& pr, const Vec& x) {
  const int n = pr.n();
  const Vec s = x.head(n);
  const Vec u = x.segment(n, n);
  const Vec v = x.segment(2 * n, n);
  const double w = x[3 * n];
  const Vec p = pr.params_at(x);
  const Mat a = jacobian_state(pr.sys, s, p, pr.fd_step);
  Vec r(3 * n + 2);
  r.head(n) = pr.sys(s, p);
  r.segment(n, n) = a * u + w * v;
  r.segment(2 * n, n) = a * v - w * u;
  r[3 * n] = u.squaredNorm() + v.squaredNorm() - 1.0;
  r[3 * n + 1] = u.dot(v);
  return r;
}

Mat base_blocks(const Codim2Problem& pr, const Vec& s, const Vec& p, Mat* a_out) {
  *a_out = jacobian_state(pr.sys, s, p, pr.fd_step);
  return jacobian_params(pr.sys, s, p, pr.active, pr.fd_step);
}

Mat fold_jacobian(const Codim2Problem& pr, const Vec& x) {
  const int n = pr.n();
  const Vec s = x.head(n);
  const Vec z = x.segment(n, n);
  const Vec p = pr.params_at(x);
  Mat a;
  const Mat fp = base_blocks(pr, s, p, &a);
  const Mat d = second_block(pr, s, p, z);
  Mat j = Mat::Zero(2 * n + 1, 2 * n + 2);
  j.block(0, 0, n, n) = a;
  j.block(0, 2 * n, n, 2) = fp;
  j.block(n, 0, n, n) = d.leftCols(n);
  j.block(n, n, n, n) = a;
  j.block(n, 2 * n, n, 2) = d.rightCols(2);
  j.block(2 * n, n, 1, n) = 2.0 * z.transpose();
  return j;
}

Mat hopf_jacobian(const Codim2Problem& pr, const Vec& x) {
  const int n = pr.n();
  const Vec s = x.head(n);
  const Vec u = x.segment(n, n);
  const Vec v = x.segment(2 * n, n);
  const double w = x[3 * n];
  const Vec p = pr.params_at(x);
  Mat a;
  const Mat fp = base_blocks(pr, s, p, &a);
  const Mat du = second_block(pr, s, p, u);
  const Mat dv = second_block(pr, s, p, v);
  const Mat eye = Mat::Identity(n, n);
  const int pc = 3 * n + 1;
  Mat j = Mat::Zero(3 * n + 2, 3 * n + 3);
  j.block(0, 0, n, n) = a;
  j.block(0, pc, n, 2) = fp;

  j.block(n, 0, n, n) = du.leftCols(n);
  j.block(n, n, n, n) = a;
  j.block(n, 2 * n, n, n) = w * eye;
  j.block(n, 3 * n, n, 1) = v;
  j.block(n, pc, n, 2) = du.rightCols(2);

  j.block(2 * n, 0, n, n) = dv.leftCols(n);
  j.block(2 * n, n, n, n) = -w * eye;
  j.block(2 * n, 2 * n, n, n) = a;
  j.block(2 * n, 3 * n, n, 1) = -u;
  j.block(2 * n, pc, n, 2) = dv.rightCols(2);

  j.block(3 * n, n, 1, n) = 2.0 * u.transpose();
  j.block(3 * n, 2 * n, 1, n) = 2.0 * v.transpose();
  j.block(3 * n + 1, n, 1, n) = v.transpose();
  j.block(3 * n + 1, 2 * n, 1, n) = u.transpose();
  return j;
}

// Central differences of the whole residual; used for the transposed fold form.
Mat residual_fd(const Codim2Problem& pr, const Vec& x) {
  const Vec r0 = fold_residual(pr, x);
  Mat j(r0.size(), x.size());
  Vec xp = x;
  for (int i = 0; i < x.size(); ++i) {
    const double h = step_for(x[i], pr.second_step);
    xp[i] = x[i] + h;
    const Vec rp = fold_residual(pr, xp);
    xp[i] = x[i] - h;
    const Vec rm = fold_residual(pr, xp);
    xp[i] = x[i];
    j.col(i) = (rp - rm) / (2.0 * h);
  }
  return j;
}

Vec polish(const ExtendedSystem& f, const Vec& guess, int fixed_coord,
           const ContinuationSettings& settings) {
  Vec fixed = Vec::Zero(guess.size());
  fixed[fixed_coord] = 1.0;
  ContinuationSettings tight = settings;
  tight.newton_tol = std::min(settings.newton_tol, 1e-10);
  tight.newton_max_iters = std::max(settings.newton_max_iters, 20);
  try {
    return newton_correct(f, guess, fixed, tight);
  } catch (const Error&) {
  }
  try {
    return newton_correct(f, guess, fixed, settings);
  } catch (const Error& e) {
    throw InitFailure(std::string("Newton polish of the curve start failed: ") + e.what());
  }
}

std::array<double, 2> param_speed(const Codim2Problem& pr, const BranchPoint& p) {
  return {p.tangent[pr.param_coord(0)], p.tangent[pr.param_coord(1)]};
}

std::optional<Complex> primary_pair(const Spectrum& s, double omega) {
  return nearest_upper(s, Complex(0.0, omega));
}

std::optional<Event> localize_hh(const Codim2Problem& pr, const ExtendedSystem& f,
                                 const BranchPoint& a, const BranchPoint& b, BranchObserver obs,
                                 const ContinuationSettings& settings) {
  const int oc = pr.omega_coord();
  const auto pa = primary_pair(a.spectrum, a.x[oc]);
  const auto pb = primary_pair(b.spectrum, b.x[oc]);
  const auto za = critical_pair(a.spectrum, pa);
  if (!za) return std::nullopt;
  const auto zb = nearest_upper(b.spectrum, *za, pb);
  if (!zb) return std::nullopt;
  auto crossing = localize_pair_crossing(f, a, b, *za, *zb, obs, settings);
  if (!crossing || !(crossing->eigenvalue.imag() > settings.test_tol)) return std::nullopt;
  Event ev;
  ev.label = PointLabel::HH;
  ev.test = kTestHH;
  ev.omega_h = crossing->point.x[oc];
  ev.point = std::move(crossing->point);
  std::ostringstream os;
  os << "second pair frequency " << crossing->eigenvalue.imag();
  ev.note = os.str();
  return ev;
}

std::optional<Event> localize_cp(const Codim2Problem& pr, const ExtendedSystem& f,
                                 const BranchPoint& a, const BranchPoint& b,
                                 const std::string& test, BranchObserver obs,
                                 const ContinuationSettings& settings) {
  const auto da = param_speed(pr, a);
  const auto db = param_speed(pr, b);
  if (da[0] * db[0] + da[1] * db[1] >= 0.0) return std::nullopt;  // ordinary turn
  // Both components flip at a reversal; handle it once.
  if (test == kTestCp2 && da[0] * db[0] < 0.0) return std::nullopt;
  const double na = std::hypot(da[0], da[1]);
  const double nb = std::hypot(db[0], db[1]);
  if (na == 0.0 || nb == 0.0) return std::nullopt;
  const std::array<double, 2> ref{da[0] / na, da[1] / na};
  const int c0 = pr.param_coord(0);
  const int c1 = pr.param_coord(1);
  auto base = obs.annotate;
  obs.annotate = [=](BranchPoint& p, const Mat& fx) {
    if (base) base(p, fx);
    p.tests["cp_g"] = p.tangent[c0] * ref[0] + p.tangent[c1] * ref[1];
  };
  obs.localize = nullptr;
  BranchPoint pa = a;
  BranchPoint pb = b;
  pa.tests["cp_g"] = na;
  pb.tests["cp_g"] = db[0] * ref[0] + db[1] * ref[1];
  auto found = localize_zero(f, pa, pb, "cp_g", settings.test_tol, obs, settings);
  if (!found) return std::nullopt;
  const auto ds = param_speed(pr, *found);
  if (std::hypot(ds[0], ds[1]) > kCuspSpeedRatio * std::max(na, nb)) return std::nullopt;
  found->tests.erase("cp_g");
  Event ev;
  ev.label = PointLabel::CP;
  ev.test = test;
  ev.point = std::move(*found);
  return ev;
}

}  // namespace

const char* to_string(CurveKind k) { return k == CurveKind::Fold ? "fold" : "hopf"; }

int Codim2Problem::unknowns() const {
  return kind == CurveKind::Fold ? 2 * n() + 2 : 3 * n() + 3;
}

Vec Codim2Problem::params_at(const Vec& x) const {
  Vec p = base_params;
  p[active[0]] = x[param_coord(0)];
  p[active[1]] = x[param_coord(1)];
  return p;
}

ExtendedSystem Codim2Problem::extended() const {
  ExtendedSystem f;
  const Codim2Problem self = *this;
  f.equations = unknowns() - 1;
  if (kind == CurveKind::Fold) {
    f.residual = [self](const Vec& x) { return fold_residual(self, x); };
    if (fold_form == FoldForm::RightNull) {
      f.jacobian = [self](const Vec& x) { return fold_jacobian(self, x); };
    } else {
      f.jacobian = [self](const Vec& x) { return residual_fd(self, x); };
    }
  } else {
    f.residual = [self](const Vec& x) { return hopf_residual(self, x); };
    f.jacobian = [self](const Vec& x) { return hopf_jacobian(self, x); };
  }
  for (int i = 0; i < n(); ++i) f.closure_coords.push_back(i);
  f.closure_coords.push_back(param_coord(0));
  f.closure_coords.push_back(param_coord(1));
  return f;
}

double codim2_residual(const Codim2Problem& problem, const Vec& x) {
  const Vec r = problem.kind == CurveKind::Fold ? fold_residual(problem, x) : hopf_residual(problem, x);
  return r.cwiseAbs().maxCoeff();
}

Vec init_fold_curve(const Codim2Problem& problem, const Vec& state, const Vec& params,
                    const ContinuationSettings& settings) {
  if (problem.kind != CurveKind::Fold) throw InitFailure("init_fold_curve needs a fold problem");
  const int n = problem.n();
  const Mat a = jacobian_state(problem.sys, state, params, problem.fd_step);
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec sv = svd.singularValues();
  const double smin = sv[n - 1];
  if (smin > kInitNullTol * std::max(1.0, sv[0])) {
    std::ostringstream os;
    os << "state Jacobian has no null vector (smallest singular value " << smin << ")";
    throw InitFailure(os.str());
  }
  if (n >= 2 && sv[n - 2] - smin < kSingularGap) {
    throw InitFailure("smallest singular value of the state Jacobian is not isolated");
  }
  const Vec z = problem.fold_form == FoldForm::RightNull ? Vec(svd.matrixV().col(n - 1))
                                                          : Vec(svd.matrixU().col(n - 1));
  Vec x(problem.unknowns());
  x << state, z.normalized(), params[problem.active[0]], params[problem.active[1]];
  return polish(problem.extended(), x, problem.param_coord(1), settings);
}

Vec init_hopf_curve(const Codim2Problem& problem, const Vec& state, const Vec& params,
                    const ContinuationSettings& settings) {
  if (problem.kind != CurveKind::Hopf) throw InitFailure("init_hopf_curve needs a Hopf problem");
  const int n = problem.n();
  const Mat a = jacobian_state(problem.sys, state, params, problem.fd_step);
  Eigen::EigenSolver<Mat> es(a, true);
  if (es.info() != Eigen::Success) throw InitFailure("eigen decomposition failed");
  const auto& vals = es.eigenvalues();
  int pick = -1;
  for (int i = 0; i < n; ++i) {
    if (vals[i].imag() <= settings.test_tol) continue;
    if (pick < 0 || std::abs(vals[i].real()) < std::abs(vals[pick].real())) pick = i;
  }
  if (pick < 0) throw InitFailure("no complex pair with positive frequency at the seed point");
  const Complex z = vals[pick];
  if (std::abs(z.real()) > kInitAxisTol * std::max(1.0, std::abs(z))) {
    std::ostringstream os;
    os << "no eigenvalue pair on the imaginary axis (closest " << z << ")";
    throw InitFailure(os.str());
  }
  for (int i = 0; i < n; ++i) {
    if (i != pick && std::abs(vals[i] - z) < kSingularGap * std::max(1.0, std::abs(z))) {
      throw InitFailure("crossing pair is repeated (possibly defective)");
    }
  }
  Eigen::VectorXcd w = es.eigenvectors().col(pick);
  const Mat ac = a;
  if ((ac.cast<Complex>() * w - z * w).norm() > 1e-6 * std::max(1.0, w.norm())) {
    throw InitFailure("eigenvector of the crossing pair is inaccurate (defective pair)");
  }
  Vec u = w.real();
  Vec v = w.imag();
  const double theta = 0.5 * std::atan2(-2.0 * u.dot(v), u.squaredNorm() - v.squaredNorm());
  const Vec ur = std::cos(theta) * u - std::sin(theta) * v;
  const Vec vr = std::sin(theta) * u + std::cos(theta) * v;
  const double scale = std::sqrt(ur.squaredNorm() + vr.squaredNorm());
  if (vr.norm() < 1e-8 * scale || ur.norm() < 1e-8 * scale) {
    throw InitFailure("crossing eigenvector is real (defective pair)");
  }
  Vec x(problem.unknowns());
  x << state, ur / scale, vr / scale, z.imag(), params[problem.active[0]],
      params[problem.active[1]];
  Vec out = polish(problem.extended(), x, problem.param_coord(1), settings);
  if (!(out[problem.omega_coord()] > settings.test_tol)) {
    throw InitFailure("Hopf frequency collapsed to zero during polish");
  }
  return out;
}

Vec init_from_event(const Codim2Problem& problem, const EquilibriumProblem& seed,
                    const Event& event, const ContinuationSettings& settings) {
  const Vec state = event.point.x.head(seed.n());
  const Vec params = seed.params_at(event.point.x);
  if (problem.kind == CurveKind::Fold) {
    if (event.label != PointLabel::LP) throw InitFailure("fold curve needs an LP seed");
    return init_fold_curve(problem, state, params, settings);
  }
  if (event.label != PointLabel::H) throw InitFailure("Hopf curve needs an H seed");
  return init_hopf_curve(problem, state, params, settings);
}

BranchObserver codim2_observer(const Codim2Problem& problem) {
  BranchObserver obs;
  const Codim2Problem pr = problem;
  obs.annotate = [pr](BranchPoint& p, const Mat&) {
    const int n = pr.n();
    const Mat a = jacobian_state(pr.sys, p.x.head(n), pr.params_at(p.x), pr.fd_step);
    p.spectrum = spectrum_of(a, pr.tol_eig);
    p.tests[kTestCp1] = p.tangent[pr.param_coord(0)];
    p.tests[kTestCp2] = p.tangent[pr.param_coord(1)];
    if (pr.kind == CurveKind::Fold) {
      p.tests[kTestSigmaMin] = smallest_singular_value(a);
    } else {
      const double w = p.x[pr.omega_coord()];
      p.tests[kTestOmega] = w;
      const auto primary = primary_pair(p.spectrum, w);
      p.tests[kTestPairRe] = primary ? primary->real() : kNaN;
      const auto second = critical_pair(p.spectrum, primary);
      p.tests[kTestHH] = second ? second->real() : kNaN;
    }
  };
  if (problem.kind == CurveKind::Fold) {
    obs.watched = {kTestCp1, kTestCp2};
  } else {
    obs.watched = {kTestHH};
  }
  obs.localize = [pr](const ExtendedSystem& f, const BranchPoint& a, const BranchPoint& b,
                      const std::string& test, const ContinuationSettings& settings) {
    BranchObserver inner = codim2_observer(pr);
    inner.localize = nullptr;
    if (test == kTestHH) return localize_hh(pr, f, a, b, inner, settings);
    return localize_cp(pr, f, a, b, test, inner, settings);
  };
  return obs;
}

Branch continue_codim2(const Codim2Problem& problem, const Vec& x0,
                       const std::array<double, 2>& param_direction,
                       const ContinuationSettings& settings,
                       std::function<bool(const BranchPoint&)> stop) {
  if (x0.size() != problem.unknowns()) {
    throw PreconditionViolation("continue_codim2: start point has the wrong size");
  }
  const ExtendedSystem f = problem.extended();
  Vec dir = Vec::Zero(x0.size());
  dir[problem.param_coord(0)] = param_direction[0];
  dir[problem.param_coord(1)] = param_direction[1];
  BranchObserver obs = codim2_observer(problem);
  obs.stop = std::move(stop);
  return continue_branch(f, x0, dir, settings, obs);
}

}  // namespace stabdom
