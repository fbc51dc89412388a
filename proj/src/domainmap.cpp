#include "stabdom/domainmap.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

#include <Eigen/QR>

#include "stabdom/errors.hpp"

namespace stabdom {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// A platform closer than this to a winder makes a localized event degenerate.
constexpr double kWinderProximity = 1e-6;

double segment_distance(const Point2& p, const Point2& a, const Point2& b) {
  const double dx = b[0] - a[0];
  const double dy = b[1] - a[1];
  const double len2 = dx * dx + dy * dy;
  double s = 0.0;
  if (len2 > 0.0) s = std::clamp(((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2, 0.0, 1.0);
  return std::hypot(p[0] - a[0] - s * dx, p[1] - a[1] - s * dy);
}

double polyline_distance(const Point2& p, const Polyline& c) {
  if (c.size() == 1) return std::hypot(p[0] - c[0][0], p[1] - c[0][1]);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < c.size(); ++i) {
    best = std::min(best, segment_distance(p, c[i], c[(i + 1) % c.size()]));
  }
  return best;
}

// Proper crossing of segments (p1, p2) and (p3, p4), endpoints excluded.
bool segments_cross(const Point2& p1, const Point2& p2, const Point2& p3, const Point2& p4) {
  auto orient = [](const Point2& a, const Point2& b, const Point2& c) {
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
  };
  const double d1 = orient(p3, p4, p1);
  const double d2 = orient(p3, p4, p2);
  const double d3 = orient(p1, p2, p3);
  const double d4 = orient(p1, p2, p4);
  return d1 * d2 < 0.0 && d3 * d4 < 0.0;
}

const Event* first_boundary_event(const Branch& b, cdpr::Controller c) {
  const PointLabel want = c == cdpr::Controller::PID ? PointLabel::H : PointLabel::LP;
  for (const auto& ev : b.events) {
    if (ev.label == want && !ev.degenerate) return &ev;
  }
  return nullptr;
}

// Least-squares polynomial of the given degree through (x_i, y_i).
Vec polyfit(const std::vector<double>& x, const std::vector<double>& y, int degree) {
  Mat a(static_cast<Eigen::Index>(x.size()), degree + 1);
  Vec rhs(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    double pw = 1.0;
    for (int d = 0; d <= degree; ++d) {
      a(static_cast<Eigen::Index>(i), d) = pw;
      pw *= x[i];
    }
    rhs[static_cast<Eigen::Index>(i)] = y[i];
  }
  return a.colPivHouseholderQr().solve(rhs);
}

double polyval(const Vec& c, double x) {
  double v = 0.0;
  for (Eigen::Index d = c.size() - 1; d >= 0; --d) v = v * x + c[d];
  return v;
}

// Distance of the floor monitor from zero: the second pair's real part on Hopf curves,
// the second-smallest eigenvalue modulus on fold curves.
double floor_monitor(const BranchPoint& p, CurveKind kind) {
  if (kind == CurveKind::Hopf) {
    const auto it = p.tests.find(kTestHH);
    return it == p.tests.end() ? kNaN : it->second;
  }
  std::vector<double> mods;
  for (const auto& z : p.spectrum.eigenvalues) mods.push_back(std::abs(z));
  std::sort(mods.begin(), mods.end());
  return mods.size() >= 2 ? mods[1] : kNaN;
}

}  // namespace

PipelineSettings PipelineSettings::cdpr_defaults() {
  PipelineSettings s;
  s.equilibrium.max_step = 0.01;
  s.equilibrium.max_points = 2000;
  return s;
}

const char* to_string(Plane p) { return p == Plane::Reference ? "reference" : "state"; }

Plane plane_from_string(const std::string& s) {
  if (s == "reference") return Plane::Reference;
  if (s == "state") return Plane::State;
  throw ConfigError("plane must be 'reference' or 'state', got '" + s + "'");
}

const char* to_string(CurveStatus s) {
  switch (s) {
    case CurveStatus::Closed: return "Closed";
    case CurveStatus::Open: return "Open";
    case CurveStatus::NoBoundary: return "NoBoundary";
    case CurveStatus::Failed: return "Failed";
  }
  return "?";
}

EquilibriumProblem cdpr_equilibrium_problem(const cdpr::CdprConfig& cfg, double omega,
                                            int active) {
  cdpr::CdprConfig c = cfg;
  c.omega0 = omega;
  EquilibriumProblem pr;
  pr.sys = cdpr::closed_loop_system(c);
  pr.base_params = Vec(3);
  pr.base_params << 0.0, 0.0, omega;
  pr.active = active;
  pr.degenerate = [c](const Vec& state) {
    return cdpr::nearest_winder_distance(c, state.head<2>()) <= kWinderProximity;
  };
  pr.inside = [c](const Vec& state) {
    return cdpr::triangle_signed_distance(c, state.head<2>()) >= 0.0;
  };
  return pr;
}

BoundaryRun stability_boundary(const cdpr::CdprConfig& cfg, double omega,
                               const PipelineSettings& settings) {
  BoundaryRun run;
  run.omega = omega;
  run.controller = cfg.controller;
  try {
    const EquilibriumProblem eq = cdpr_equilibrium_problem(cfg, omega, 0);
    const Vec origin = Vec::Zero(eq.n());
    const Spectrum s0 = classify(eq.sys, origin, eq.base_params, eq.tol_eig, cfg.fd_step);
    if (s0.stability != Stability::Stable) {
      run.status = CurveStatus::Failed;
      run.detail = "origin is not a stable equilibrium";
      return run;
    }
    run.equilibrium = trace_equilibria(eq, origin, +1, settings.equilibrium);
    const Event* seed = first_boundary_event(run.equilibrium, cfg.controller);
    if (!seed) {
      run.status = CurveStatus::NoBoundary;
      run.detail = std::string("no ") + (cfg.controller == cdpr::Controller::PID ? "H" : "LP") +
                   " point before " + to_string(run.equilibrium.termination);
      return run;
    }
    run.seed = *seed;

    Codim2Problem& pr = run.problem;
    pr.sys = eq.sys;
    pr.base_params = eq.base_params;
    pr.active = {0, 1};
    pr.kind = cfg.controller == cdpr::Controller::PID ? CurveKind::Hopf : CurveKind::Fold;
    pr.fd_step = cfg.fd_step;
    const Vec x0 = init_from_event(pr, eq, *seed, settings.curve);
    run.curve = continue_codim2(pr, x0, {0.0, 1.0}, settings.curve);
    run.status = run.curve.termination == Termination::Closed ? CurveStatus::Closed
                                                               : CurveStatus::Open;
    run.detail = to_string(run.curve.termination);
    if (!run.curve.termination_detail.empty()) run.detail += ": " + run.curve.termination_detail;
  } catch (const Error& e) {
    run.status = CurveStatus::Failed;
    run.detail = e.what();
  }
  return run;
}

Polyline project(const Codim2Problem& problem, const Branch& curve, Plane plane) {
  Polyline out;
  for (const auto& p : curve.points) {
    if (plane == Plane::Reference) {
      out.push_back({p.x[problem.param_coord(0)], p.x[problem.param_coord(1)]});
    } else {
      out.push_back({p.x[0], p.x[1]});
    }
  }
  return out;
}

int sweep_threads() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  if (const char* env = std::getenv("STABDOM_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return hw;
}

DomainSurface sweep(const cdpr::CdprConfig& base, std::vector<double> omegas, Plane plane,
                    const PipelineSettings& settings, int threads) {
  if (omegas.empty()) throw ConfigError("omega list is empty");
  std::sort(omegas.begin(), omegas.end());
  omegas.erase(std::unique(omegas.begin(), omegas.end()), omegas.end());

  DomainSurface surf;
  surf.plane = plane;
  surf.controller = base.controller;
  surf.omega_values = omegas;
  surf.curves.resize(omegas.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < omegas.size(); i = next++) {
      const BoundaryRun run = stability_boundary(base, omegas[i], settings);
      CurveRecord& rec = surf.curves[i];
      rec.omega = omegas[i];
      rec.status = run.status;
      rec.detail = run.detail;
      rec.kind = run.problem.kind;
      if (run.seed) rec.seed_parameter = run.seed->point.x[run.seed->point.x.size() - 1];
      if (run.status == CurveStatus::Closed || run.status == CurveStatus::Open) {
        rec.points = project(run.problem, run.curve, plane);
        for (const auto& ev : run.curve.events) rec.flags.push_back(ev.label);
      }
    }
  };
  const int n = std::clamp(threads > 0 ? threads : sweep_threads(), 1,
                           static_cast<int>(omegas.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return surf;
}

std::optional<double> ray_radius(const Polyline& curve, double phi, int* crossings) {
  const double cx = std::cos(phi);
  const double cy = std::sin(phi);
  std::optional<double> best;
  std::vector<double> hits;
  const std::size_t n = curve.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = curve[i];
    const Point2& b = curve[(i + 1) % n];
    // Solve r*(cx, cy) = a + s*(b - a).
    const double ex = b[0] - a[0];
    const double ey = b[1] - a[1];
    const double det = cx * (-ey) - cy * (-ex);
    if (std::abs(det) < 1e-300) continue;
    const double r = (a[0] * (-ey) - a[1] * (-ex)) / det;
    const double s = (cx * a[1] - cy * a[0]) / det;
    if (s < 0.0 || s >= 1.0 || r <= 0.0) continue;
    hits.push_back(r);
    if (!best || r < *best) best = r;
  }
  if (crossings) {
    // a ray through a vertex meets both adjacent segments
    std::sort(hits.begin(), hits.end());
    int count = 0;
    for (std::size_t k = 0; k < hits.size(); ++k) {
      if (k == 0 || hits[k] - hits[k - 1] > 1e-9 * std::max(1.0, hits[k])) ++count;
    }
    *crossings = count;
  }
  return best;
}

CylindricalGrid to_cylindrical_grid(const DomainSurface& surface, int n_phi) {
  if (n_phi < 1) throw PreconditionViolation("n_phi must be >= 1");
  CylindricalGrid g;
  for (int j = 0; j < n_phi; ++j) g.phi.push_back(2.0 * std::numbers::pi * j / n_phi);
  g.omega = surface.omega_values;
  g.radius = Mat::Constant(static_cast<Eigen::Index>(g.omega.size()), n_phi, kNaN);
  for (std::size_t i = 0; i < surface.curves.size(); ++i) {
    const CurveRecord& rec = surface.curves[i];
    if (rec.status != CurveStatus::Closed) {
      std::ostringstream os;
      os << "omega " << rec.omega << ": no closed curve (" << to_string(rec.status) << ")";
      g.warnings.push_back(os.str());
      continue;
    }
    for (int j = 0; j < n_phi; ++j) {
      int crossings = 0;
      const auto r = ray_radius(rec.points, g.phi[static_cast<std::size_t>(j)], &crossings);
      if (!r) {
        std::ostringstream os;
        os << "omega " << rec.omega << ", phi " << g.phi[static_cast<std::size_t>(j)]
           << ": ray does not meet the curve";
        g.warnings.push_back(os.str());
        continue;
      }
      if (crossings > 1) {
        std::ostringstream os;
        os << "omega " << rec.omega << ", phi " << g.phi[static_cast<std::size_t>(j)] << ": "
           << crossings << " crossings, curve is not star-shaped about the origin";
        g.warnings.push_back(os.str());
      }
      g.radius(static_cast<Eigen::Index>(i), j) = *r;
    }
  }
  return g;
}

AreaResult compute_area(const Polyline& curve) {
  AreaResult out;
  const std::size_t n = curve.size();
  if (n < 3) return out;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = curve[i];
    const Point2& b = curve[(i + 1) % n];
    s += a[0] * b[1] - b[0] * a[1];
  }
  out.signed_area = 0.5 * s;
  out.area = std::abs(out.signed_area);
  for (std::size_t i = 0; i < n && !out.self_intersecting; ++i) {
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;  // adjacent through the closing edge
      if (segments_cross(curve[i], curve[(i + 1) % n], curve[j], curve[(j + 1) % n])) {
        out.self_intersecting = true;
        break;
      }
    }
  }
  return out;
}

double hausdorff_distance(const Polyline& a, const Polyline& b) {
  double h = 0.0;
  for (const auto& p : a) h = std::max(h, polyline_distance(p, b));
  for (const auto& p : b) h = std::max(h, polyline_distance(p, a));
  return h;
}

Polyline mirror_x(const Polyline& c) {
  Polyline out;
  out.reserve(c.size());
  for (const auto& p : c) out.push_back({-p[0], p[1]});
  return out;
}

FloorTrace omega_floor_trace(const cdpr::CdprConfig& cfg, double phi,
                             const FloorSettings& settings) {
  FloorTrace out;
  cdpr::CdprConfig c = cfg;
  c.omega0 = settings.seed_omega;
  const SystemDef base = cdpr::closed_loop_system(c);
  const double cphi = std::cos(phi);
  const double sphi = std::sin(phi);
  const SystemDef ray = reparameterize(base, 2, {"r", "omega0"}, [cphi, sphi](const Vec& p) {
    Vec q(3);
    q << p[0] * cphi, p[0] * sphi, p[1];
    return q;
  });

  EquilibriumProblem eq;
  eq.sys = ray;
  eq.base_params = Vec(2);
  eq.base_params << 0.0, settings.seed_omega;
  eq.active = 0;
  eq.degenerate = [c](const Vec& state) {
    return cdpr::nearest_winder_distance(c, state.head<2>()) <= kWinderProximity;
  };
  eq.inside = [c](const Vec& state) {
    return cdpr::triangle_signed_distance(c, state.head<2>()) >= 0.0;
  };
  const Branch eqb = trace_equilibria(eq, Vec::Zero(eq.n()), +1, settings.pipeline.equilibrium);
  const Event* seed = first_boundary_event(eqb, cfg.controller);
  if (!seed) throw InitFailure("no boundary point along the ray at the seed omega");

  Codim2Problem pr;
  pr.sys = ray;
  pr.base_params = eq.base_params;
  pr.active = {0, 1};
  pr.kind = cfg.controller == cdpr::Controller::PID ? CurveKind::Hopf : CurveKind::Fold;
  pr.fd_step = cfg.fd_step;
  out.kind = pr.kind;
  const Vec x0 = init_from_event(pr, eq, *seed, settings.pipeline.curve);

  ContinuationSettings cs = settings.pipeline.curve;
  cs.detect_closure = false;
  const int rc = pr.param_coord(0);
  const double r_floor = settings.r_floor;
  out.branch = continue_codim2(pr, x0, {0.0, -1.0}, cs,
                               [rc, r_floor](const BranchPoint& p) { return p.x[rc] <= r_floor; });

  const int wc = pr.param_coord(1);
  out.r_min = std::numeric_limits<double>::infinity();
  for (const auto& p : out.branch.points) {
    out.r_omega.push_back({p.x[rc], p.x[wc]});
    if (p.x[rc] < out.r_min) {
      out.r_min = p.x[rc];
      out.omega_at_r_min = p.x[wc];
    }
  }
  out.reached_floor = out.r_min <= r_floor;

  const PointLabel want = pr.kind == CurveKind::Hopf ? PointLabel::HH : PointLabel::CP;
  for (const auto& ev : out.branch.events) {
    if (ev.label == want) {
      out.flagged = true;
      out.flag = want;
      out.vertex_r = ev.point.x[rc];
      out.vertex_omega = ev.point.x[wc];
      out.vertex_monitor = 0.0;
      out.detail = "localized on the curve";
      return out;
    }
  }
  if (!out.reached_floor) {
    out.detail = std::string("curve stopped before the floor: ") + to_string(out.branch.termination);
    return out;
  }

  // The floor is a degenerate end point where continuation cannot pass; fit the last
  // points and extrapolate the curve and the monitor to its vertex.
  const auto& pts = out.branch.points;
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(settings.fit_points), pts.size());
  std::vector<double> w, r, m;
  for (std::size_t i = pts.size() - k; i < pts.size(); ++i) {
    const double mon = floor_monitor(pts[i], pr.kind);
    if (!std::isfinite(mon)) continue;
    w.push_back(pts[i].x[wc]);
    r.push_back(pts[i].x[rc]);
    m.push_back(mon);
  }
  if (w.size() < 3) {
    out.detail = "too few monitored points near the floor";
    return out;
  }
  const Vec rc2 = polyfit(w, r, 2);
  double wv = w.back();
  if (rc2[2] > 0.0) {
    wv = -rc2[1] / (2.0 * rc2[2]);
  } else if (rc2[1] != 0.0) {
    wv = -rc2[0] / rc2[1];
  }
  const Vec mc = polyfit(w, m, 1);
  out.vertex_omega = wv;
  out.vertex_r = polyval(rc2, wv);
  out.vertex_monitor = polyval(mc, wv);
  out.flagged = std::abs(out.vertex_r) <= settings.flag_tol &&
                std::abs(out.vertex_monitor) <= settings.flag_tol;
  if (out.flagged) out.flag = want;
  std::ostringstream os;
  os << "extrapolated vertex (r, omega) = (" << out.vertex_r << ", " << out.vertex_omega
     << "), monitor " << out.vertex_monitor;
  out.detail = os.str();
  return out;
}

}  // namespace stabdom
