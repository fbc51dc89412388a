#include "stabdom/cdpr.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "stabdom/errors.hpp"

namespace stabdom::cdpr {

namespace {

constexpr double kMinCableLength = 1e-12;

Vec2 offset(const CdprConfig& cfg, const Vec2& q, int k) {
  Vec2 d = q - cfg.winders[static_cast<std::size_t>(k)];
  if (d.norm() <= kMinCableLength) {
    std::ostringstream os;
    os << "platform at winder A" << (k + 1) << " (zero cable length)";
    throw DegenerateConfiguration(k, os.str());
  }
  return d;
}

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

}  // namespace

const char* to_string(Controller c) { return c == Controller::PD ? "PD" : "PID"; }

Controller controller_from_string(const std::string& s) {
  if (s == "PD" || s == "pd") return Controller::PD;
  if (s == "PID" || s == "pid") return Controller::PID;
  throw ConfigError("controller must be PD or PID, got '" + s + "'");
}

std::array<Vec2, 3> CdprConfig::default_winders() {
  const double h = std::sqrt(3.0) / 2.0;
  return {Vec2(h, 0.5), Vec2(-h, 0.5), Vec2(0.0, -1.0)};
}

CdprConfig CdprConfig::defaults(Controller c, double omega0) {
  CdprConfig cfg;
  cfg.controller = c;
  cfg.omega0 = omega0;
  return cfg;
}

void CdprConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (!(mass > 0.0)) fail("mass must be > 0");
  if (!(roller_inertia > 0.0)) fail("roller_inertia must be > 0");
  if (!(roller_radius > 0.0)) fail("roller_radius must be > 0");
  if (!(mean_torque > 0.0)) fail("mean_torque (C_moy) must be > 0");
  if (!(friction >= 0.0)) fail("friction must be >= 0");
  if (!(damping > 0.0 && damping < 1.0)) fail("damping xi must satisfy 0 < xi < 1");
  if (!(omega0 > 0.0)) fail("omega0 must be > 0");
  if (!(fd_step > 0.0)) fail("fd_step must be > 0");
  const double area2 = cross(winders[1] - winders[0], winders[2] - winders[0]);
  if (std::abs(area2) <= 1e-12) fail("winders are collinear (triangle has zero area)");
}

Vec3 inverse_kinematics(const CdprConfig& cfg, const Vec2& q) {
  Vec3 theta;
  for (int k = 0; k < 3; ++k) theta[k] = offset(cfg, q, k).norm() / cfg.roller_radius;
  return theta;
}

Mat32 differential_kinematics(const CdprConfig& cfg, const Vec2& q) {
  Mat32 j;
  for (int k = 0; k < 3; ++k) {
    const Vec2 d = offset(cfg, q, k);
    j.row(k) = d.transpose() / (cfg.roller_radius * d.norm());
  }
  return j;
}

Mat2 mass_matrix(const CdprConfig& cfg, const Vec2& q) {
  const Mat32 j = differential_kinematics(cfg, q);
  return cfg.mass * Mat2::Identity() + cfg.roller_inertia * j.transpose() * j;
}

Mat2 christoffel(const CdprConfig& cfg, const Vec2& q, const Vec2& qdot) {
  std::array<Mat2, 2> dm;
  for (int k = 0; k < 2; ++k) {
    Vec2 e = Vec2::Zero();
    e[k] = cfg.fd_step;
    dm[k] = (mass_matrix(cfg, q + e) - mass_matrix(cfg, q - e)) / (2.0 * cfg.fd_step);
  }
  Mat2 c = Mat2::Zero();
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      for (int k = 0; k < 2; ++k) {
        c(i, j) += 0.5 * (dm[k](i, j) + dm[j](i, k) - dm[i](j, k)) * qdot[k];
      }
    }
  }
  return c;
}

Mat2 coriolis_and_friction(const CdprConfig& cfg, const Vec2& q, const Vec2& qdot) {
  return christoffel(cfg, q, qdot) + cfg.friction * Mat2::Identity();
}

double kinetic_energy(const CdprConfig& cfg, const Vec2& q, const Vec2& qdot) {
  return 0.5 * qdot.dot(mass_matrix(cfg, q) * qdot);
}

LinearizedPlant linearize_at_center(const CdprConfig& cfg) {
  if (triangle_signed_distance(cfg, Vec2::Zero()) <= 0.0) {
    throw PreconditionViolation("workspace center is not strictly inside the winder triangle");
  }
  LinearizedPlant p;
  p.m0 = mass_matrix(cfg, Vec2::Zero());
  p.c0 = cfg.friction * Mat2::Identity();
  p.j0 = differential_kinematics(cfg, Vec2::Zero());
  // Geometric stiffness of the pretension: K0 = d(J^T Gamma0)/dq at the center.
  const Vec3 gamma0 = Vec3::Constant(cfg.mean_torque);
  const double h = cfg.fd_step;
  for (int k = 0; k < 2; ++k) {
    Vec2 e = Vec2::Zero();
    e[k] = h;
    p.k0.col(k) = (differential_kinematics(cfg, e).transpose() * gamma0 -
                   differential_kinematics(cfg, -e).transpose() * gamma0) /
                  (2.0 * h);
  }
  return p;
}

std::array<double, 3> target_coefficients(Controller c, double damping, double omega0) {
  if (c == Controller::PD) return {omega0 * omega0, 2.0 * damping * omega0, 0.0};
  // (s + gamma)(s^2 + 2 xi w s + w^2) with gamma = xi w
  const double gamma = damping * omega0;
  return {gamma * omega0 * omega0, omega0 * omega0 + 2.0 * damping * gamma * omega0,
          gamma + 2.0 * damping * omega0};
}

Gains synthesize_gains(const CdprConfig& cfg) {
  return synthesize_gains(cfg, linearize_at_center(cfg), cfg.omega0);
}

Gains synthesize_gains(const CdprConfig& cfg, const LinearizedPlant& plant, double omega0) {
  // Input matrix of the linear model M0 q'' + C0 q' + K0 q = B0 Gamma.
  const Eigen::Matrix<double, 2, 3> b0 = -plant.j0.transpose();
  const Mat2 gram = b0 * b0.transpose();
  Eigen::SelfAdjointEigenSolver<Mat2> es(gram);
  if (es.eigenvalues()[0] <= 1e-12 * std::max(1.0, es.eigenvalues()[1])) {
    throw SynthesisFailure("J0^T is rank deficient");
  }
  const Mat32 pinv = b0.transpose() * gram.inverse();

  const auto a = target_coefficients(cfg.controller, cfg.damping, omega0);
  Gains g;
  if (cfg.controller == Controller::PD) {
    g.kd = pinv * (plant.c0 - a[1] * plant.m0);
    g.kp = pinv * (plant.k0 - a[0] * plant.m0);
    g.kr = pinv * (a[0] * plant.m0);
  } else {
    g.kd = pinv * (plant.c0 - a[2] * plant.m0);
    g.kp = pinv * (plant.k0 - a[1] * plant.m0);
    g.ki = pinv * (-a[0] * plant.m0);
    g.kr = cfg.pid_reference_gain.value_or(Mat32::Zero());
  }
  g.internal_tension = Vec3::Constant(cfg.mean_torque);
  const double leak = (plant.j0.transpose() * g.internal_tension).norm();
  if (leak > 1e-9 * plant.j0.norm() * cfg.mean_torque) {
    throw SynthesisFailure("uniform tension is not in the kernel of J0^T for this winder layout");
  }
  return g;
}

int state_dim(Controller c) { return c == Controller::PD ? 4 : 6; }

namespace {

Vec3 control_torque(const CdprConfig& cfg, const Gains& g, const Vec& x, const Vec& params) {
  const Vec2 q = x.segment<2>(0);
  const Vec2 qd = x.segment<2>(2);
  const Vec2 qr(params[0], params[1]);
  Vec3 torque = g.kd * qd + g.kp * q + g.kr * qr + g.internal_tension;
  if (cfg.controller == Controller::PID) torque += g.ki * x.segment<2>(4);
  return torque;
}

}  // namespace

SystemDef closed_loop_system(const CdprConfig& cfg) {
  cfg.validate();
  const LinearizedPlant plant = linearize_at_center(cfg);
  synthesize_gains(cfg, plant, cfg.omega0);  // fail early on bad geometry

  SystemDef sys;
  sys.dim_state = state_dim(cfg.controller);
  sys.dim_params = 3;
  sys.param_names = {"x_r", "y_r", "omega0"};
  sys.state_names = {"x", "y", "xd", "yd"};
  if (cfg.controller == Controller::PID) {
    sys.state_names.push_back("Ix");
    sys.state_names.push_back("Iy");
  }
  sys.eval = [cfg, plant](const Vec& x, const Vec& params) {
    const Gains g = synthesize_gains(cfg, plant, params[2]);
    const Vec2 q = x.segment<2>(0);
    const Vec2 qd = x.segment<2>(2);
    const Vec3 torque = control_torque(cfg, g, x, params);
    const Vec2 force = -differential_kinematics(cfg, q).transpose() * torque;
    const Vec2 rhs = force - coriolis_and_friction(cfg, q, qd) * qd;
    const Vec2 acc = mass_matrix(cfg, q).ldlt().solve(rhs);

    Vec out(x.size());
    out.segment<2>(0) = qd;
    out.segment<2>(2) = acc;
    if (cfg.controller == Controller::PID) {
      out[4] = q[0] - params[0];
      out[5] = q[1] - params[1];
    }
    return out;
  };
  return sys;
}

SystemDef free_plant_system(const CdprConfig& cfg) {
  SystemDef sys;
  sys.dim_state = 4;
  sys.dim_params = 1;
  sys.param_names = {"unused"};
  sys.state_names = {"x", "y", "xd", "yd"};
  sys.eval = [cfg](const Vec& x, const Vec&) {
    const Vec2 q = x.segment<2>(0);
    const Vec2 qd = x.segment<2>(2);
    const Vec2 acc = mass_matrix(cfg, q).ldlt().solve(-coriolis_and_friction(cfg, q, qd) * qd);
    Vec out(4);
    out << qd, acc;
    return out;
  };
  return sys;
}

TensionReport cable_tensions(const CdprConfig& cfg, const Vec& state, const Vec& params) {
  const Gains g = synthesize_gains(cfg, linearize_at_center(cfg), params[2]);
  TensionReport r;
  r.torque = control_torque(cfg, g, state, params);
  for (int k = 0; k < 3; ++k) {
    r.negative[static_cast<std::size_t>(k)] = r.torque[k] < 0.0;
    r.any_negative = r.any_negative || r.torque[k] < 0.0;
  }
  return r;
}

double triangle_signed_distance(const CdprConfig& cfg, const Vec2& q) {
  const auto& w = cfg.winders;
  const double orient = cross(w[1] - w[0], w[2] - w[0]) > 0.0 ? 1.0 : -1.0;
  double dist = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    const Vec2& a = w[static_cast<std::size_t>(k)];
    const Vec2& b = w[static_cast<std::size_t>((k + 1) % 3)];
    const Vec2 edge = b - a;
    dist = std::min(dist, orient * cross(edge, q - a) / edge.norm());
  }
  return dist;
}

double nearest_winder_distance(const CdprConfig& cfg, const Vec2& q) {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& a : cfg.winders) d = std::min(d, (q - a).norm());
  return d;
}

}  // namespace stabdom::cdpr
