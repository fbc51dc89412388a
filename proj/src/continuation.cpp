#include "stabdom/continuation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "stabdom/errors.hpp"

namespace stabdom {

namespace {

constexpr double kMinRcond = 1e-15;
constexpr double kDivergenceBound = 1e8;
constexpr double kClosureFraction = 0.05;

double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

bool all_finite(const Vec& v) { return v.allFinite(); }

Mat bordered(const Mat& fx, const Vec& row) {
  Mat a(fx.rows() + 1, fx.cols());
  a.topRows(fx.rows()) = fx;
  a.row(fx.rows()) = row.transpose();
  return a;
}

Vec closure_part(const ExtendedSystem& f, const Vec& x) {
  if (f.closure_coords.empty()) return x;
  Vec out(static_cast<Eigen::Index>(f.closure_coords.size()));
  for (std::size_t k = 0; k < f.closure_coords.size(); ++k) {
    out[static_cast<Eigen::Index>(k)] = x[f.closure_coords[k]];
  }
  return out;
}

// Distance from p to the segment [a, b].
double segment_distance(const Vec& p, const Vec& a, const Vec& b) {
  const Vec d = b - a;
  const double len2 = d.squaredNorm();
  const double s = len2 > 0.0 ? std::clamp((p - a).dot(d) / len2, 0.0, 1.0) : 0.0;
  return (p - a - s * d).norm();
}

}  // namespace

ContinuationSettings ContinuationSettings::equilibrium_defaults() { return {}; }

ContinuationSettings ContinuationSettings::curve_defaults() {
  ContinuationSettings s;
  s.max_points = 300;
  s.init_step = 0.01;
  s.max_step = 0.1;
  s.detect_closure = true;
  return s;
}

void ContinuationSettings::validate() const {
  if (max_points < 1) throw ConfigError("max_points must be >= 1");
  if (!(min_step > 0.0 && min_step <= init_step && init_step <= max_step)) {
    throw ConfigError("step sizes must satisfy 0 < min_step <= init_step <= max_step");
  }
  if (!(newton_tol > 0.0) || !(test_tol > 0.0)) throw ConfigError("tolerances must be > 0");
  if (newton_max_iters < 1) throw ConfigError("newton_max_iters must be >= 1");
  if (!(fd_step > 0.0)) throw ConfigError("fd_step must be > 0");
}

const char* to_string(PointLabel l) {
  switch (l) {
    case PointLabel::Regular: return "Regular";
    case PointLabel::LP: return "LP";
    case PointLabel::H: return "H";
    case PointLabel::BP: return "BP";
    case PointLabel::HH: return "HH";
    case PointLabel::CP: return "CP";
    case PointLabel::UserStop: return "UserStop";
  }
  return "?";
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::MaxPoints: return "MaxPoints";
    case Termination::Boundary: return "Boundary";
    case Termination::StepUnderflow: return "StepUnderflow";
    case Termination::Diverged: return "Diverged";
    case Termination::Closed: return "Closed";
    case Termination::UserStop: return "UserStop";
  }
  return "?";
}

Mat ExtendedSystem::jacobian_at(const Vec& x, double fd_step) const {
  if (jacobian) return jacobian(x);
  const auto m = static_cast<Eigen::Index>(x.size());
  Mat jac(equations, m);
  Vec xp = x;
  Vec xm = x;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double h = fd_step * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    jac.col(i) = (residual(xp) - residual(xm)) / (xp[i] - xm[i]);
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return jac;
}

Vec tangent(const Mat& fx, const Vec& v_prev) {
  if (fx.cols() != fx.rows() + 1 || v_prev.size() != fx.cols()) {
    throw PreconditionViolation("tangent: F_X must be N x (N+1) and match v_prev");
  }
  Eigen::PartialPivLU<Mat> lu(bordered(fx, v_prev));
  if (!(lu.rcond() > kMinRcond)) throw TangentFailure("bordered tangent system is singular");
  Vec rhs = Vec::Zero(fx.cols());
  rhs[fx.rows()] = 1.0;
  Vec v = lu.solve(rhs);
  const double nv = v.norm();
  if (!std::isfinite(nv) || nv == 0.0) throw TangentFailure("tangent has no direction");
  v /= nv;
  if (v.dot(v_prev) < 0.0) v = -v;
  return v;
}

Vec newton_correct(const ExtendedSystem& f, const Vec& x_pred, const Vec& v_fixed,
                   const ContinuationSettings& settings) {
  Vec x = x_pred;
  for (int it = 0; it <= settings.newton_max_iters; ++it) {
    const Vec r = f.residual(x);
    if (!all_finite(r)) throw CorrectorFailure("residual became non-finite");
    if (inf_norm(r) <= settings.newton_tol) return x;
    if (it == settings.newton_max_iters) break;

    Vec full(r.size() + 1);
    full << r, v_fixed.dot(x - x_pred);
    Eigen::PartialPivLU<Mat> lu(bordered(f.jacobian_at(x, settings.fd_step), v_fixed));
    if (!(lu.rcond() > kMinRcond)) throw TangentFailure("corrector Jacobian is singular");
    x -= lu.solve(full);
    if (!all_finite(x)) throw CorrectorFailure("Newton iterate became non-finite");
  }
  throw CorrectorFailure("Newton did not converge");
}

BranchPoint make_point(const ExtendedSystem& f, const Vec& x, const Vec& v_prev,
                       const BranchObserver& obs, const ContinuationSettings& settings) {
  BranchPoint p;
  p.x = x;
  const Mat fx = f.jacobian_at(x, settings.fd_step);
  p.tangent = tangent(fx, v_prev);
  p.residual = inf_norm(f.residual(x));
  if (obs.annotate) obs.annotate(p, fx);
  return p;
}

std::optional<BranchPoint> localize_zero(const ExtendedSystem& f, const BranchPoint& a,
                                         const BranchPoint& b, const std::string& test,
                                         double tolerance, const BranchObserver& obs,
                                         const ContinuationSettings& settings) {
  const auto ita = a.tests.find(test);
  const auto itb = b.tests.find(test);
  if (ita == a.tests.end() || itb == b.tests.end()) return std::nullopt;
  double ta = ita->second;
  double tb = itb->second;
  if (!(ta * tb < 0.0)) return std::nullopt;

  const Vec chord = b.x - a.x;
  const double len = chord.norm();
  if (len == 0.0) return std::nullopt;
  const Vec dir = chord / len;

  double sa = 0.0;
  double sb = len;
  int side = 0;

  for (int iter = 0; iter < 80; ++iter) {
    double s = (sa * tb - sb * ta) / (tb - ta);
    const double margin = 1e-3 * (sb - sa);
    if (!std::isfinite(s) || s <= sa + margin || s >= sb - margin) s = 0.5 * (sa + sb);

    BranchPoint p;
    try {
      const Vec x = newton_correct(f, a.x + s * dir, dir, settings);
      p = make_point(f, x, a.tangent, obs, settings);
    } catch (const Error&) {
      // the secant can land exactly on a singular point (a BP); step just off it
      s += 1e-3 * (sb - sa);
      try {
        const Vec x = newton_correct(f, a.x + s * dir, dir, settings);
        p = make_point(f, x, a.tangent, obs, settings);
      } catch (const Error&) {
        return std::nullopt;
      }
    }
    p.arclength = a.arclength + (p.x - a.x).norm();
    const auto it = p.tests.find(test);
    if (it == p.tests.end() || !std::isfinite(it->second)) return std::nullopt;
    const double t = it->second;
    if (std::abs(t) <= tolerance) return p;

    if (t * ta < 0.0) {
      sb = s;
      tb = t;
      if (side == -1) ta *= 0.5;
      side = -1;
    } else {
      sa = s;
      ta = t;
      if (side == +1) tb *= 0.5;
      side = +1;
    }
    if (sb - sa <= 1e-13 * std::max(1.0, len)) break;
  }
  return std::nullopt;
}

Branch continue_branch(const ExtendedSystem& f, const Vec& x0, const Vec& initial_direction,
                       const ContinuationSettings& settings, const BranchObserver& obs) {
  settings.validate();
  if (x0.size() != f.unknowns() || initial_direction.size() != f.unknowns()) {
    throw PreconditionViolation("continue_branch: dimension mismatch");
  }
  const double r0 = inf_norm(f.residual(x0));
  if (!(r0 <= settings.newton_tol)) {
    std::ostringstream os;
    os << "starting point residual " << r0 << " exceeds newton_tol";
    throw PreconditionViolation(os.str());
  }

  Branch branch;
  branch.points.push_back(make_point(f, x0, initial_direction.normalized(), obs, settings));

  double h = settings.init_step;
  int successes = 0;
  int stepped = 1;
  const Vec start = closure_part(f, x0);
  Vec last_proj = start;
  double path_length = 0.0;  // in closure coordinates

  while (stepped < settings.max_points) {
    const BranchPoint& prev = branch.points.back();
    BranchPoint next;
    double dist = 0.0;
    try {
      const Vec x = newton_correct(f, prev.x + h * prev.tangent, prev.tangent, settings);
      dist = (x - prev.x).norm();
      if (dist > 1.05 * h) throw CorrectorFailure("corrected point left the step ball");
      next = make_point(f, x, prev.tangent, obs, settings);
    } catch (const DegenerateConfiguration& e) {
      branch.termination = Termination::Boundary;
      branch.termination_detail = e.what();
      return branch;
    } catch (const Error& e) {
      h *= 0.5;
      successes = 0;
      if (h < settings.min_step) {
        branch.termination = Termination::StepUnderflow;
        branch.termination_detail = e.what();
        return branch;
      }
      continue;
    }
    next.arclength = prev.arclength + dist;
    if (inf_norm(next.x) > kDivergenceBound) {
      branch.termination = Termination::Diverged;
      return branch;
    }

    std::vector<Event> found;
    if (obs.localize) {
      for (const auto& name : obs.watched) {
        const auto ia = prev.tests.find(name);
        const auto ib = next.tests.find(name);
        if (ia == prev.tests.end() || ib == next.tests.end()) continue;
        if (!(std::isfinite(ia->second) && std::isfinite(ib->second))) continue;
        if (!(ia->second * ib->second < 0.0)) continue;
        try {
          if (auto ev = obs.localize(f, prev, next, name, settings)) {
            found.push_back(std::move(*ev));
          } else {
            branch.warnings.push_back("spurious sign change of " + name + " discarded near arclength " +
                                      std::to_string(next.arclength));
          }
        } catch (const DegenerateConfiguration&) {
          branch.warnings.push_back("event " + name + " could not be localized (winder reached)");
        }
      }
    }
    std::sort(found.begin(), found.end(), [](const Event& x, const Event& y) {
      return x.point.arclength < y.point.arclength;
    });
    for (auto& ev : found) {
      ev.point.label = ev.label;
      ev.arc_index = branch.points.size();
      branch.points.push_back(ev.point);
      branch.events.push_back(std::move(ev));
    }

    branch.points.push_back(std::move(next));
    ++stepped;
    const BranchPoint& cur = branch.points.back();

    if (settings.detect_closure) {
      // The projected curve passes through its start, so the last chord comes close to it;
      // the relative bound keeps small curves from closing right after they leave.
      const Vec b = closure_part(f, cur.x);
      path_length += (b - last_proj).norm();
      const double d0 = segment_distance(start, last_proj, b);
      last_proj = b;
      if (stepped > settings.closure_min_steps &&
          d0 <= std::min(settings.max_step, kClosureFraction * path_length)) {
        branch.termination = Termination::Closed;
        return branch;
      }
    }
    if (obs.stop && obs.stop(cur)) {
      branch.points.back().label = PointLabel::UserStop;
      branch.termination = Termination::UserStop;
      return branch;
    }

    if (++successes >= 2) {
      h = std::min(h * 1.3, settings.max_step);
      successes = 0;
    }
  }
  branch.termination = Termination::MaxPoints;
  return branch;
}

}  // namespace stabdom
