#include "stabdom/bifurcation.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "stabdom/errors.hpp"

namespace stabdom {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_complex(const Complex& z) { return std::abs(z.imag()) > 1e-12 * std::max(1.0, std::abs(z)); }

bool excluded(const Complex& z, const std::optional<Complex>& exclude) {
  return exclude && std::abs(z - *exclude) <= 1e-9 * std::max(1.0, std::abs(z));
}

}  // namespace

std::optional<Complex> critical_pair(const Spectrum& s, std::optional<Complex> exclude) {
  std::optional<Complex> best;
  for (const auto& z : s.eigenvalues) {
    if (!is_complex(z) || z.imag() < 0.0 || excluded(z, exclude)) continue;
    if (!best || std::abs(z.real()) < std::abs(best->real())) best = z;
  }
  return best;
}

std::optional<Complex> nearest_upper(const Spectrum& s, const Complex& target,
                                     std::optional<Complex> exclude) {
  std::optional<Complex> best;
  for (const auto& z : s.eigenvalues) {
    if (!is_complex(z) || z.imag() < 0.0 || excluded(z, exclude)) continue;
    if (!best || std::abs(z - target) < std::abs(*best - target)) best = z;
  }
  return best;
}

std::optional<TrackedCrossing> localize_pair_crossing(const ExtendedSystem& f, const BranchPoint& a,
                                                      const BranchPoint& b, Complex za, Complex zb,
                                                      BranchObserver obs,
                                                      const ContinuationSettings& settings) {
  if (!(za.real() * zb.real() < 0.0)) return std::nullopt;
  const Vec ax = a.x;
  const Vec chord = b.x - a.x;
  const double len2 = chord.squaredNorm();
  if (len2 == 0.0) return std::nullopt;
  auto base = obs.annotate;
  obs.annotate = [=](BranchPoint& p, const Mat& fx) {
    if (base) base(p, fx);
    const double s = std::clamp((p.x - ax).dot(chord) / len2, 0.0, 1.0);
    const auto z = nearest_upper(p.spectrum, za + s * (zb - za));
    p.tests["pair_re"] = z ? z->real() : kNaN;
    p.tests["pair_im"] = z ? z->imag() : kNaN;
  };
  obs.localize = nullptr;
  BranchPoint pa = a;
  BranchPoint pb = b;
  pa.tests["pair_re"] = za.real();
  pb.tests["pair_re"] = zb.real();
  auto found = localize_zero(f, pa, pb, "pair_re", settings.test_tol, obs, settings);
  if (!found) return std::nullopt;
  TrackedCrossing out;
  out.eigenvalue = Complex(found->tests["pair_re"], found->tests["pair_im"]);
  found->tests.erase("pair_re");
  found->tests.erase("pair_im");
  out.point = std::move(*found);
  return out;
}

TestFunctionSet evaluate_tests(const Mat& fx, const Vec& tangent, const Spectrum& spectrum,
                               int param_col) {
  TestFunctionSet t;
  Mat sq(fx.rows() + 1, fx.cols());
  sq.topRows(fx.rows()) = fx;
  sq.row(fx.rows()) = tangent.transpose();
  t.bp_det = sq.determinant();
  t.lp_tangent = tangent[param_col];
  const auto pair = critical_pair(spectrum);
  t.hopf_re = pair ? pair->real() : kNaN;
  return t;
}

Vec EquilibriumProblem::params_at(const Vec& x) const {
  Vec p = base_params;
  p[active] = x[n()];
  return p;
}

Vec EquilibriumProblem::pack(const Vec& state, double lambda) const {
  Vec x(n() + 1);
  x << state, lambda;
  return x;
}

ExtendedSystem EquilibriumProblem::extended(double fd_step) const {
  ExtendedSystem f;
  f.equations = n();
  const EquilibriumProblem self = *this;
  f.residual = [self](const Vec& x) { return self.sys(x.head(self.n()), self.params_at(x)); };
  f.jacobian = [self, fd_step](const Vec& x) {
    const Vec state = x.head(self.n());
    const Vec p = self.params_at(x);
    Mat jac(self.n(), self.n() + 1);
    jac.leftCols(self.n()) = jacobian_state(self.sys, state, p, fd_step);
    const std::array<int, 1> which{self.active};
    jac.col(self.n()) = jacobian_params(self.sys, state, p, which, fd_step);
    return jac;
  };
  return f;
}

BranchObserver equilibrium_observer(const EquilibriumProblem& problem) {
  BranchObserver obs;
  const int n = problem.n();
  const double tol_eig = problem.tol_eig;
  obs.annotate = [n, tol_eig](BranchPoint& p, const Mat& fx) {
    p.spectrum = spectrum_of(fx.leftCols(n), tol_eig);
    const TestFunctionSet t = evaluate_tests(fx, p.tangent, p.spectrum, n);
    p.tests[kTestBp] = t.bp_det;
    p.tests[kTestLp] = t.lp_tangent;
    p.tests[kTestHopf] = t.hopf_re;
  };
  obs.watched = {kTestBp, kTestLp, kTestHopf};
  const EquilibriumProblem copy = problem;
  obs.localize = [copy](const ExtendedSystem& f, const BranchPoint& a, const BranchPoint& b,
                        const std::string& test, const ContinuationSettings& settings) {
    return localize_event(copy, f, a, b, test, settings);
  };
  return obs;
}

std::optional<Event> localize_event(const EquilibriumProblem& problem, const ExtendedSystem& f,
                                    const BranchPoint& a, const BranchPoint& b,
                                    const std::string& test, const ContinuationSettings& settings) {
  BranchObserver obs = equilibrium_observer(problem);
  obs.localize = nullptr;
  const int n = problem.n();

  Event ev;
  ev.test = test;
  std::optional<BranchPoint> found;

  if (test == kTestHopf) {
    const auto za = critical_pair(a.spectrum);
    if (!za) return std::nullopt;
    const auto zb = nearest_upper(b.spectrum, *za);
    if (!zb) return std::nullopt;
    auto crossing = localize_pair_crossing(f, a, b, *za, *zb, obs, settings);
    if (!crossing) return std::nullopt;
    ev.omega_h = crossing->eigenvalue.imag();
    if (!(ev.omega_h > settings.test_tol)) return std::nullopt;  // neutral saddle
    found = std::move(crossing->point);
    ev.label = PointLabel::H;
  } else if (test == kTestBp) {
    const double scale = std::sqrt(std::abs(a.tests.at(kTestBp)) * std::abs(b.tests.at(kTestBp)));
    found = localize_zero(f, a, b, kTestBp, settings.test_tol * scale, obs, settings);
    if (!found) return std::nullopt;
    ev.label = PointLabel::BP;
  } else if (test == kTestLp) {
    found = localize_zero(f, a, b, kTestLp, settings.test_tol, obs, settings);
    if (!found) return std::nullopt;
    const double scale = std::sqrt(std::abs(a.tests.at(kTestBp)) * std::abs(b.tests.at(kTestBp)));
    if (std::abs(found->tests[kTestBp]) <= settings.test_tol * scale) return std::nullopt;
    ev.label = PointLabel::LP;
  } else {
    return std::nullopt;
  }

  ev.point = *found;
  if (problem.degenerate && problem.degenerate(found->x.head(n))) {
    ev.degenerate = true;
    ev.note = "localized at a singular configuration; no codim-2 processing";
  }
  return ev;
}

Branch trace_equilibria(const EquilibriumProblem& problem, const Vec& state0, int direction,
                        const ContinuationSettings& settings) {
  const ExtendedSystem f = problem.extended(settings.fd_step);
  const Vec x0 = problem.pack(state0, problem.base_params[problem.active]);
  Vec dir = Vec::Zero(x0.size());
  dir[problem.n()] = direction >= 0 ? 1.0 : -1.0;
  BranchObserver obs = equilibrium_observer(problem);
  if (problem.inside) {
    const int n = problem.n();
    auto inside = problem.inside;
    obs.stop = [inside, n](const BranchPoint& p) { return !inside(p.x.head(n)); };
  }
  Branch b = continue_branch(f, x0, dir, settings, obs);
  if (b.termination == Termination::UserStop) {
    b.termination = Termination::Boundary;
    b.termination_detail = "state left its domain";
  }
  return b;
}

StableSegment stable_segment(const Branch& branch, int param_coord, double test_tol) {
  if (branch.points.empty()) throw PreconditionViolation("stable_segment: empty branch");
  if (branch.points.front().spectrum.stability != Stability::Stable) {
    throw PreconditionViolation("stable_segment: branch does not start at a stable point");
  }
  StableSegment seg;
  seg.start = branch.points.front().x[param_coord];
  seg.end = seg.start;
  std::optional<std::size_t> first_unstable;
  for (std::size_t i = 1; i < branch.points.size(); ++i) {
    const BranchPoint& p = branch.points[i];
    if (p.label != PointLabel::Regular && p.label != PointLabel::UserStop) {
      seg.end = p.x[param_coord];
      seg.end_index = i;
      seg.ended_by_event = true;
      seg.end_label = p.label;
      break;
    }
    if (p.spectrum.stability != Stability::Stable) {
      if (!first_unstable) first_unstable = i;
      continue;
    }
    if (!first_unstable) {
      seg.end = p.x[param_coord];
      seg.end_index = i;
    }
  }
  if (first_unstable) {
    const double where = branch.points[*first_unstable].x[param_coord];
    const double limit = seg.ended_by_event ? seg.end : where;
    if (!seg.ended_by_event || std::abs(where - limit) > test_tol) {
      std::ostringstream os;
      os << "stability flag changes at parameter " << where
         << (seg.ended_by_event ? " before the first event" : " without a detected event");
      seg.consistency_warning = os.str();
    }
    if (!seg.ended_by_event) {
      seg.end_index = *first_unstable - 1;
      seg.end = branch.points[seg.end_index].x[param_coord];
    }
  }
  return seg;
}

}  // namespace stabdom
