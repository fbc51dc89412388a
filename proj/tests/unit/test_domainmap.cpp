#include <doctest.h>

#include <cmath>
#include <numbers>

#include "stabdom/domainmap.hpp"
#include "stabdom/errors.hpp"

using namespace stabdom;

namespace {

constexpr double kPi = std::numbers::pi;

Polyline circle(int n, double r = 1.0) {
  Polyline c;
  for (int i = 0; i < n; ++i) c.push_back({r * std::cos(2 * kPi * i / n), r * std::sin(2 * kPi * i / n)});
  return c;
}

Polyline winder_triangle() {
  Polyline t;
  for (const auto& w : cdpr::CdprConfig::default_winders()) t.push_back({w.x(), w.y()});
  return t;
}

// polar radius of the default winder triangle (inradius 1/2, edge normals at 90, 210, 330 deg)
double triangle_radius(double phi) {
  double r = 1e9;
  for (double n : {kPi / 2, 7 * kPi / 6, 11 * kPi / 6}) {
    const double c = std::cos(phi - n);
    if (c > 1e-12) r = std::min(r, 0.5 / c);
  }
  return r;
}

DomainSurface synthetic(const std::vector<Polyline>& curves) {
  DomainSurface s;
  for (std::size_t i = 0; i < curves.size(); ++i) {
    s.omega_values.push_back(0.1 * static_cast<double>(i + 1));
    CurveRecord rec;
    rec.omega = s.omega_values.back();
    rec.status = CurveStatus::Closed;
    rec.points = curves[i];
    s.curves.push_back(rec);
  }
  return s;
}

}  // namespace

TEST_CASE("areas") {
  CHECK(compute_area({{0, 0}, {1, 0}, {1, 1}, {0, 1}}).area == doctest::Approx(1.0));
  CHECK(std::abs(compute_area(circle(1000)).area - kPi) < 1e-4);
  CHECK(compute_area(winder_triangle()).area == doctest::Approx(1.299038105676658).epsilon(1e-12));
  const AreaResult cw = compute_area({{0, 0}, {0, 1}, {1, 1}, {1, 0}});
  CHECK(cw.signed_area == doctest::Approx(-1.0));
  CHECK_FALSE(cw.self_intersecting);
  const AreaResult bow = compute_area({{0, 0}, {1, 1}, {1, 0}, {0, 1}});
  CHECK(bow.self_intersecting);
}

TEST_CASE("ray radius") {
  const Polyline c = circle(400);
  for (double phi : {0.0, 0.3, 2.0, 4.5}) {
    const auto r = ray_radius(c, phi);
    REQUIRE(r);
    CHECK(*r == doctest::Approx(1.0).epsilon(2e-4));  // chord sag of a 400-gon
  }
  const Polyline t = winder_triangle();
  for (double phi : {0.0, kPi / 6, kPi / 2, 1.0, 3.0, 5.0}) {
    const auto r = ray_radius(t, phi);
    REQUIRE(r);
    CHECK(std::abs(*r - triangle_radius(phi)) < 1e-6);
  }
  CHECK(triangle_radius(0.0) == doctest::Approx(0.577350269189626));
  CHECK(triangle_radius(1.0) == doctest::Approx(0.5941975528890606));
  // curve not around the origin
  const Polyline off = {{2, 2}, {3, 2}, {3, 3}, {2, 3}};
  CHECK_FALSE(ray_radius(off, kPi).has_value());
}

TEST_CASE("cylindrical grid on synthetic curves") {
  SUBCASE("unit circles") {
    Polyline exact;
    for (int i = 0; i < 2000; ++i) exact.push_back({std::cos(2 * kPi * i / 2000), std::sin(2 * kPi * i / 2000)});
    // vertices on every grid ray make the radius exact
    for (int n_phi : {4, 8, 40}) {
      const CylindricalGrid g = to_cylindrical_grid(synthetic({exact}), n_phi);
      REQUIRE(g.phi.size() == static_cast<std::size_t>(n_phi));
      for (int j = 0; j < n_phi; ++j) CHECK(std::abs(g.radius(0, j) - 1.0) < 1e-9);
      CHECK(g.warnings.empty());
    }
  }
  SUBCASE("triangle") {
    const CylindricalGrid g = to_cylindrical_grid(synthetic({winder_triangle()}), 72);
    for (int j = 0; j < 72; ++j) CHECK(std::abs(g.radius(0, j) - triangle_radius(g.phi[j])) < 1e-6);
  }
  SUBCASE("missing cells are marked and warned") {
    const CylindricalGrid g = to_cylindrical_grid(synthetic({{{2, 2}, {3, 2}, {3, 3}, {2, 3}}}), 8);
    CHECK(std::isnan(g.radius(0, 0)));
    CHECK_FALSE(g.warnings.empty());
  }
}

TEST_CASE("hausdorff and mirror") {
  const Polyline c = circle(100);
  CHECK(hausdorff_distance(c, mirror_x(c)) < 1e-12);
  const Polyline shifted = [&] {
    Polyline s = c;
    for (auto& p : s) p[0] += 0.1;
    return s;
  }();
  CHECK(hausdorff_distance(c, shifted) == doctest::Approx(0.1).epsilon(1e-2));
  CHECK(hausdorff_distance(shifted, mirror_x(shifted)) == doctest::Approx(0.2).epsilon(1e-2));
}

TEST_CASE("plane names") {
  CHECK(plane_from_string("reference") == Plane::Reference);
  CHECK(plane_from_string("state") == Plane::State);
  CHECK_THROWS_AS(plane_from_string("polar"), ConfigError);
}

TEST_CASE("PID sweep: nested, symmetric, inside the triangle") {
  const cdpr::CdprConfig base = cdpr::CdprConfig::defaults(cdpr::Controller::PID, 0.5);
  const DomainSurface s =
      sweep(base, {0.5, 0.3, 0.4, 0.3}, Plane::Reference, PipelineSettings::cdpr_defaults(), 2);
  REQUIRE(s.omega_values == std::vector<double>{0.3, 0.4, 0.5});
  for (const auto& c : s.curves) {
    CAPTURE(c.omega);
    CHECK(c.status == CurveStatus::Closed);
    for (const auto& p : c.points) CHECK(cdpr::triangle_signed_distance(base, cdpr::Vec2(p[0], p[1])) >= -1e-6);
  }
  const int n_phi = 36;
  const CylindricalGrid g = to_cylindrical_grid(s, n_phi);
  for (int i = 0; i + 1 < g.radius.rows(); ++i)
    for (int j = 0; j < n_phi; ++j) CHECK(g.radius(i, j) <= g.radius(i + 1, j) + 1e-6);
  // phi_j and pi - phi_j are both grid angles when n_phi is even
  for (int i = 0; i < g.radius.rows(); ++i)
    for (int j = 0; j < n_phi; ++j) {
      const int k = ((n_phi / 2 - j) % n_phi + n_phi) % n_phi;
      CHECK(std::abs(g.radius(i, j) - g.radius(i, k)) < 1e-3);
    }
}

TEST_CASE("sweep is independent of the worker count") {
  const cdpr::CdprConfig base = cdpr::CdprConfig::defaults(cdpr::Controller::PD, 0.8);
  const auto settings = PipelineSettings::cdpr_defaults();
  const DomainSurface a = sweep(base, {0.6, 0.8}, Plane::State, settings, 1);
  const DomainSurface b = sweep(base, {0.6, 0.8}, Plane::State, settings, 3);
  REQUIRE(a.curves.size() == b.curves.size());
  for (std::size_t i = 0; i < a.curves.size(); ++i) CHECK(a.curves[i].points == b.curves[i].points);
}

TEST_CASE("empty sweep is rejected") {
  const cdpr::CdprConfig base = cdpr::CdprConfig::defaults(cdpr::Controller::PID, 0.5);
  CHECK_THROWS_AS(sweep(base, {}, Plane::Reference, PipelineSettings::cdpr_defaults()), ConfigError);
}

TEST_CASE("floor traces at mirrored angles coincide") {
  const cdpr::CdprConfig base = cdpr::CdprConfig::defaults(cdpr::Controller::PID, 0.5);
  FloorSettings fs;
  const double phi = 0.4;
  const FloorTrace a = omega_floor_trace(base, phi, fs);
  const FloorTrace b = omega_floor_trace(base, kPi - phi, fs);
  REQUIRE(a.r_omega.size() == b.r_omega.size());
  for (std::size_t i = 0; i < a.r_omega.size(); ++i) {
    CHECK(std::abs(a.r_omega[i][0] - b.r_omega[i][0]) < 1e-6);
    // near the apex r ~ omega^2, so omega carries r's residual divided by dr/domega
    if (a.r_omega[i][0] >= 1e-4) CHECK(std::abs(a.r_omega[i][1] - b.r_omega[i][1]) < 1e-6);
  }
  CHECK(a.flag == b.flag);
}
