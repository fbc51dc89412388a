#include <doctest.h>

#include <cmath>
#include <random>

#include "stabdom/cdpr.hpp"
#include "stabdom/errors.hpp"
#include "stabdom/timedomain.hpp"

using namespace stabdom;
using namespace stabdom::cdpr;

namespace {

Vec params(double xr, double yr, double omega) {
  Vec p(3);
  p << xr, yr, omega;
  return p;
}

}  // namespace

TEST_CASE("default winders form an equilateral triangle of circumradius 1") {
  const auto w = CdprConfig::default_winders();
  for (const auto& p : w) CHECK(p.norm() == doctest::Approx(1.0));
  CHECK((w[0] - w[1]).norm() == doctest::Approx(std::sqrt(3.0)));
  CHECK((w[1] - w[2]).norm() == doctest::Approx(std::sqrt(3.0)));
}

TEST_CASE("roller angles") {
  const CdprConfig cfg;
  const Vec3 center = inverse_kinematics(cfg, Vec2::Zero());
  for (int k = 0; k < 3; ++k) CHECK(center[k] == doctest::Approx(20.0).epsilon(1e-14));
  const Vec3 mid = inverse_kinematics(cfg, Vec2(0.0, 0.5));
  CHECK(mid[0] == doctest::Approx(17.320508075688770).epsilon(1e-12));
  CHECK(mid[1] == doctest::Approx(17.320508075688770).epsilon(1e-12));
  CHECK(mid[2] == doctest::Approx(30.0).epsilon(1e-12));
  CHECK_THROWS_AS(inverse_kinematics(cfg, cfg.winders[0]), DegenerateConfiguration);
}

TEST_CASE("differential kinematics") {
  const CdprConfig cfg;
  const Mat32 j0 = differential_kinematics(cfg, Vec2::Zero());
  CHECK((j0.transpose() * Vec3::Ones()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(((j0.transpose() * j0) - 600.0 * Mat2::Identity()).cwiseAbs().maxCoeff() < 1e-9);

  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-0.4, 0.4);
  const double h = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    const Vec2 q(u(rng), u(rng));
    if (triangle_signed_distance(cfg, q) <= 0.02) continue;
    const Mat32 j = differential_kinematics(cfg, q);
    for (int k = 0; k < 2; ++k) {
      Vec2 dq = Vec2::Zero();
      dq[k] = h;
      const Vec3 col = (inverse_kinematics(cfg, q + dq) - inverse_kinematics(cfg, q - dq)) / (2 * h);
      CHECK((col - j.col(k)).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("mass matrix at the center") {
  const CdprConfig cfg;
  const Mat2 m = mass_matrix(cfg, Vec2::Zero());
  // m + (I/rho^2) * 1.5 = 1 + 0.02 * 1.5
  CHECK(m(0, 0) == doctest::Approx(1.03));
  CHECK(m(1, 1) == doctest::Approx(1.03));
  CHECK(std::abs(m(0, 1)) < 1e-12);
}

TEST_CASE("mass matrix is symmetric with eigenvalues at least m") {
  const CdprConfig cfg;
  for (double x : {-0.3, 0.0, 0.2})
    for (double y : {-0.2, 0.1, 0.3}) {
      const Mat2 m = mass_matrix(cfg, Vec2(x, y));
      CHECK(std::abs(m(0, 1) - m(1, 0)) < 1e-14);
      Eigen::SelfAdjointEigenSolver<Mat2> es(m);
      CHECK(es.eigenvalues().minCoeff() >= cfg.mass - 1e-12);
    }
}

TEST_CASE("kinetic energy: quadratic form vs sum over cables") {
  const CdprConfig cfg;
  const Vec2 q(0.3, 0.1);
  const Vec2 qd(0.2, -0.5);
  const Vec3 thetadot = differential_kinematics(cfg, q) * qd;
  const double direct = 0.5 * cfg.mass * qd.squaredNorm() + 0.5 * cfg.roller_inertia * thetadot.squaredNorm();
  CHECK(std::abs(kinetic_energy(cfg, q, qd) - direct) < 1e-10);
  CHECK(std::abs(0.5 * qd.dot(mass_matrix(cfg, q) * qd) - direct) < 1e-10);
}

TEST_CASE("friction only at rest") {
  const CdprConfig cfg;
  const Mat2 c = coriolis_and_friction(cfg, Vec2(0.2, -0.1), Vec2::Zero());
  CHECK((c - 0.7 * Mat2::Identity()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Mdot - 2C is skew-symmetric") {
  const CdprConfig cfg;
  const Vec2 q(0.11, 0.05);
  const Vec2 qd(0.3, -0.2);
  const double h = 1e-6;
  const Mat2 mdot = (mass_matrix(cfg, q + h * qd) - mass_matrix(cfg, q - h * qd)) / (2 * h);
  const Mat2 s = mdot - 2.0 * christoffel(cfg, q, qd);
  CHECK(std::abs(qd.dot(s * qd)) < 1e-6);
}

TEST_CASE("linearization at the center") {
  const CdprConfig cfg;
  const LinearizedPlant lp = linearize_at_center(cfg);
  CHECK((lp.m0 - 1.03 * Mat2::Identity()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((lp.c0 - 0.7 * Mat2::Identity()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((lp.k0 - 1.5 * Mat2::Identity()).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(std::abs(lp.k0(0, 1) - lp.k0(1, 0)) < 1e-8);
}

TEST_CASE("target polynomials") {
  const auto pd = target_coefficients(Controller::PD, 0.7, 0.5);
  CHECK(pd[0] == doctest::Approx(0.25));
  CHECK(pd[1] == doctest::Approx(0.7));
  const auto pid = target_coefficients(Controller::PID, 0.7, 0.5);
  // (s + xi w)(s^2 + 2 xi w s + w^2)
  CHECK(pid[0] == doctest::Approx(0.7 * 0.5 * 0.25));
  CHECK(pid[1] == doctest::Approx(0.25 + 2 * 0.49 * 0.25));
  CHECK(pid[2] == doctest::Approx(3 * 0.7 * 0.5));
}

TEST_CASE("closed-loop poles at the center match the design") {
  struct Case {
    double omega, re, im;
  };
  const Case cases[] = {{0.2, -0.14, 0.14282856857085701},
                        {0.5, -0.35, 0.35707142142714249},
                        {0.8, -0.56, 0.57131427428342801},
                        {1.0, -0.7, 0.71414284285428498}};
  for (const Controller c : {Controller::PD, Controller::PID}) {
    for (const auto& k : cases) {
      CAPTURE(to_string(c));
      CAPTURE(k.omega);
      const CdprConfig cfg = CdprConfig::defaults(c, k.omega);
      const SystemDef sys = closed_loop_system(cfg);
      const Spectrum s = classify(sys, Vec::Zero(state_dim(c)), params(0, 0, k.omega));
      CHECK(s.stability == Stability::Stable);
      int pairs = 0, reals = 0;
      for (const auto& z : s.eigenvalues) {
        if (std::abs(z.imag()) > 1e-6) {
          CHECK(std::abs(z.real() - k.re) < 1e-8);
          CHECK(std::abs(std::abs(z.imag()) - k.im) < 1e-8);
          ++pairs;
        } else {
          CHECK(std::abs(z.real() + 0.7 * k.omega) < 1e-8);
          ++reals;
        }
      }
      CHECK(pairs == 4);
      CHECK(reals == (c == Controller::PID ? 2 : 0));
    }
  }
}

TEST_CASE("PD jacobian at the origin") {
  const double w = 0.8;
  const CdprConfig cfg = CdprConfig::defaults(Controller::PD, w);
  const Mat j = jacobian_state(closed_loop_system(cfg), Vec::Zero(4), params(0, 0, w));
  Mat expect = Mat::Zero(4, 4);
  expect.block(0, 2, 2, 2) = Mat::Identity(2, 2);
  expect.block(2, 0, 2, 2) = -w * w * Mat::Identity(2, 2);
  expect.block(2, 2, 2, 2) = -2 * 0.7 * w * Mat::Identity(2, 2);
  CHECK((j - expect).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("PD reference gain moves the origin acceleration along x") {
  const double w = 0.5;
  const CdprConfig cfg = CdprConfig::defaults(Controller::PD, w);
  const SystemDef sys = closed_loop_system(cfg);
  const std::array<int, 1> which{0};
  const Mat col = jacobian_params(sys, Vec::Zero(4), params(0, 0, w), which);
  CHECK(col(2, 0) == doctest::Approx(w * w).epsilon(1e-6));
  CHECK(std::abs(col(3, 0)) < 1e-8);
}

TEST_CASE("origin is an equilibrium for zero reference") {
  for (const Controller c : {Controller::PD, Controller::PID}) {
    const CdprConfig cfg = CdprConfig::defaults(c, 0.5);
    const Vec f = closed_loop_system(cfg)(Vec::Zero(state_dim(c)), params(0, 0, 0.5));
    CHECK(f.cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("mirror symmetry about the y axis") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for (const Controller c : {Controller::PD, Controller::PID}) {
    const CdprConfig cfg = CdprConfig::defaults(c, 0.8);
    const SystemDef sys = closed_loop_system(cfg);
    const int n = state_dim(c);
    // x-like coordinates flip: x, xdot, I_x
    std::vector<int> odd = {0, 2};
    if (n == 6) odd.push_back(4);
    for (int trial = 0; trial < 10; ++trial) {
      Vec x(n);
      for (int i = 0; i < n; ++i) x[i] = u(rng);
      const double xr = u(rng), yr = u(rng);
      Vec xm = x;
      for (int i : odd) xm[i] = -x[i];
      Vec f = sys(x, params(xr, yr, 0.8));
      const Vec fm = sys(xm, params(-xr, yr, 0.8));
      for (int i : odd) f[i] = -f[i];
      CHECK((f - fm).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("energy is conserved without friction or torque") {
  CdprConfig cfg;
  cfg.friction = 0.0;
  const SystemDef plant = free_plant_system(cfg);
  Vec x0(4);
  x0 << 0.05, -0.02, 0.03, 0.02;
  IntegratorSettings is;
  is.rtol = 1e-10;
  is.atol = 1e-12;
  const Trajectory tr = simulate(plant, x0, Vec::Zero(1), 10.0, is, {0.0, 10.0});
  REQUIRE(tr.states.size() == 2);
  const auto energy = [&](const Vec& s) {
    return kinetic_energy(cfg, s.head<2>(), s.segment<2>(2));
  };
  const double e0 = energy(tr.states.front());
  CHECK(std::abs(energy(tr.states.back()) - e0) / e0 < 1e-6);
}

TEST_CASE("configuration validation") {
  CdprConfig cfg;
  cfg.damping = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = CdprConfig{};
  cfg.omega0 = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = CdprConfig{};
  cfg.winders[1] = cfg.winders[0];
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_NOTHROW(CdprConfig{}.validate());
}

TEST_CASE("state at a winder is degenerate") {
  const CdprConfig cfg = CdprConfig::defaults(Controller::PD, 0.5);
  const SystemDef sys = closed_loop_system(cfg);
  Vec x = Vec::Zero(4);
  x.head<2>() = cfg.winders[2];
  CHECK_THROWS_AS(sys(x, params(0, 0, 0.5)), DegenerateConfiguration);
}

TEST_CASE("triangle distance") {
  const CdprConfig cfg;
  CHECK(triangle_signed_distance(cfg, Vec2::Zero()) == doctest::Approx(0.5));
  CHECK(triangle_signed_distance(cfg, Vec2(0, 0.6)) < 0.0);
  CHECK(nearest_winder_distance(cfg, Vec2::Zero()) == doctest::Approx(1.0));
}

TEST_CASE("torques at the origin are the internal tension") {
  for (const Controller c : {Controller::PD, Controller::PID}) {
    const CdprConfig cfg = CdprConfig::defaults(c, 0.5);
    const TensionReport t = cable_tensions(cfg, Vec::Zero(state_dim(c)), params(0, 0, 0.5));
    CHECK_FALSE(t.any_negative);
    CHECK((t.torque - Vec3::Constant(0.05)).cwiseAbs().maxCoeff() < 1e-12);
    const Gains g = synthesize_gains(cfg);
    const Mat32 j0 = differential_kinematics(cfg, Vec2::Zero());
    CHECK((j0.transpose() * g.internal_tension).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("large negative feedback is flagged, not clamped") {
  const CdprConfig cfg = CdprConfig::defaults(Controller::PD, 1.0);
  Vec x = Vec::Zero(4);
  x[2] = 10.0;
  const TensionReport t = cable_tensions(cfg, x, params(0, 0, 1.0));
  CHECK(t.any_negative);
  CHECK(t.torque.minCoeff() < 0.0);
}
