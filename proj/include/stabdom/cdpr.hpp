#pragma once

#include <array>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "stabdom/dynsys.hpp"

/// Planar three-cable parallel robot: kinematics, Euler-Lagrange dynamics,
/// pole-placement PD/PID synthesis and the resulting closed loop.
///
/// Sign convention: a positive roller torque winds its cable and pulls the
/// platform toward the winder, so the generalized force is -J(q)^T Gamma.
namespace stabdom::cdpr {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat32 = Eigen::Matrix<double, 3, 2>;

enum class Controller { PD, PID };

const char* to_string(Controller c);
Controller controller_from_string(const std::string& s);

struct CdprConfig {
  double mass = 1.0;               // kg
  double roller_inertia = 50e-6;   // kg m^2
  double roller_radius = 0.05;     // m
  double friction = 0.7;           // N/(m/s), acts on platform velocity
  double damping = 0.7;            // xi
  double omega0 = 0.5;             // rad/s
  double mean_torque = 0.05;       // N m, C_moy
  std::array<Vec2, 3> winders = default_winders();
  Controller controller = Controller::PID;
  /// PID reference gain override; zero by default (reference enters through the integrator).
  std::optional<Mat32> pid_reference_gain;
  double fd_step = kDefaultFdStep;

  static std::array<Vec2, 3> default_winders();
  static CdprConfig defaults(Controller c, double omega0);

  /// Throws ConfigError naming the first violated invariant.
  void validate() const;
};

struct Gains {
  Mat32 kd = Mat32::Zero();
  Mat32 kp = Mat32::Zero();
  Mat32 kr = Mat32::Zero();
  Mat32 ki = Mat32::Zero();
  Vec3 internal_tension = Vec3::Zero();
};

struct LinearizedPlant {
  Mat2 m0;
  Mat2 c0;
  Mat2 k0;
  Mat32 j0;
};

Vec3 inverse_kinematics(const CdprConfig& cfg, const Vec2& q);
Mat32 differential_kinematics(const CdprConfig& cfg, const Vec2& q);
Mat2 mass_matrix(const CdprConfig& cfg, const Vec2& q);
/// Christoffel (Coriolis/centrifugal) matrix alone, from finite differences of M(q).
Mat2 christoffel(const CdprConfig& cfg, const Vec2& q, const Vec2& qdot);
Mat2 coriolis_and_friction(const CdprConfig& cfg, const Vec2& q, const Vec2& qdot);
double kinetic_energy(const CdprConfig& cfg, const Vec2& q, const Vec2& qdot);

LinearizedPlant linearize_at_center(const CdprConfig& cfg);

/// Target polynomial coefficients (a0, a1[, a2]) for the configured controller at `omega0`.
std::array<double, 3> target_coefficients(Controller c, double damping, double omega0);

Gains synthesize_gains(const CdprConfig& cfg);
Gains synthesize_gains(const CdprConfig& cfg, const LinearizedPlant& plant, double omega0);

/// Closed loop with state (x, y, xd, yd[, Ix, Iy]) and parameters (x_r, y_r, omega0).
/// Gains are recomputed from omega0 at each evaluation.
SystemDef closed_loop_system(const CdprConfig& cfg);

/// Unforced plant (Gamma = 0) with state (x, y, xd, yd); its single parameter is unused.
SystemDef free_plant_system(const CdprConfig& cfg);

int state_dim(Controller c);

struct TensionReport {
  Vec3 torque = Vec3::Zero();
  std::array<bool, 3> negative{};
  bool any_negative = false;
};

/// Roller torques commanded by the control law at (state, params). Negative values are flagged.
TensionReport cable_tensions(const CdprConfig& cfg, const Vec& state, const Vec& params);

/// Signed distance to the winder triangle boundary (positive inside).
double triangle_signed_distance(const CdprConfig& cfg, const Vec2& q);
double nearest_winder_distance(const CdprConfig& cfg, const Vec2& q);

}  // namespace stabdom::cdpr
