#include <doctest.h>

#include <cmath>

#include "stabdom/codim2.hpp"
#include "stabdom/domainmap.hpp"
#include "stabdom/errors.hpp"

using namespace stabdom;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double d : v) out[i++] = d;
  return out;
}

SystemDef scalar(std::function<double(double, const Vec&)> f) {
  SystemDef s;
  s.dim_state = 1;
  s.dim_params = 2;
  s.param_names = {"p1", "p2"};
  s.eval = [f](const Vec& x, const Vec& a) { return Vec::Constant(1, f(x[0], a)); };
  return s;
}

// planar Hopf system with growth rate mu(p) and frequency 1; shear != 1 makes the
// linear part non-normal so that u.v = 0 pins the eigenvector phase
SystemDef planar_hopf(std::function<double(const Vec&)> mu, double shear = 1.0) {
  SystemDef s;
  s.dim_state = 2;
  s.dim_params = 2;
  s.param_names = {"p1", "p2"};
  s.eval = [mu, shear](const Vec& x, const Vec& a) {
    const double m = mu(a), r2 = x.squaredNorm();
    Vec f(2);
    f << m * x[0] - shear * x[1] - x[0] * r2, x[0] / shear + m * x[1] - x[1] * r2;
    return f;
  };
  return s;
}

Codim2Problem problem(SystemDef sys, CurveKind kind) {
  Codim2Problem p;
  p.sys = std::move(sys);
  p.base_params = Vec::Zero(2);
  p.kind = kind;
  return p;
}

ContinuationSettings curve_settings() {
  ContinuationSettings s = ContinuationSettings::curve_defaults();
  s.max_step = 0.05;
  s.init_step = 0.01;
  s.max_points = 400;
  s.detect_closure = true;
  return s;
}

Polyline param_points(const Codim2Problem& p, const Branch& b) {
  Polyline out;
  for (const auto& pt : b.points) out.push_back({pt.x[p.param_coord(0)], pt.x[p.param_coord(1)]});
  return out;
}

}  // namespace

TEST_CASE("fold init on a scalar fold") {
  const Codim2Problem p = problem(scalar([](double x, const Vec& a) { return x * x - a[0]; }), CurveKind::Fold);
  ContinuationSettings s;
  const Vec x0 = init_fold_curve(p, vec({0.0}), vec({0.0, 0.0}), s);
  REQUIRE(x0.size() == 4);
  CHECK(std::abs(std::abs(x0[1]) - 1.0) < 1e-12);
  CHECK(codim2_residual(p, x0) <= 1e-10);
}

TEST_CASE("fold init away from a fold fails") {
  const Codim2Problem p = problem(scalar([](double x, const Vec& a) { return -x + a[0]; }), CurveKind::Fold);
  CHECK_THROWS_AS(init_fold_curve(p, vec({0.2}), vec({0.2, 0.0}), ContinuationSettings{}), InitFailure);
}

TEST_CASE("fold curve of a tilted fold is a straight line") {
  const Codim2Problem p =
      problem(scalar([](double x, const Vec& a) { return x * x - a[0] - 0.5 * a[1]; }), CurveKind::Fold);
  ContinuationSettings s = curve_settings();
  s.detect_closure = false;
  s.max_points = 60;
  const Vec x0 = init_fold_curve(p, vec({0.0}), vec({0.0, 0.0}), s);
  const Branch b = continue_codim2(p, x0, {0.0, 1.0}, s);
  REQUIRE(b.points.size() > 50);
  for (const auto& pt : b.points) {
    CHECK(std::abs(pt.x[0]) < 1e-6);
    CHECK(std::abs(pt.x[2] + 0.5 * pt.x[3]) < 1e-6);
    CHECK(std::abs(pt.x[1] * pt.x[1] - 1.0) < 1e-6);
    CHECK(pt.tests.at(kTestSigmaMin) <= 1e-6);
  }
  CHECK(b.points.back().x[3] > 1.0);
}

TEST_CASE("transposed fold form traces the same set") {
  Codim2Problem p =
      problem(scalar([](double x, const Vec& a) { return x * x - a[0] - 0.5 * a[1]; }), CurveKind::Fold);
  p.fold_form = FoldForm::Transposed;
  ContinuationSettings s = curve_settings();
  s.detect_closure = false;
  s.max_points = 30;
  const Vec x0 = init_fold_curve(p, vec({0.0}), vec({0.0, 0.0}), s);
  const Branch b = continue_codim2(p, x0, {0.0, 1.0}, s);
  for (const auto& pt : b.points) CHECK(std::abs(pt.x[2] + 0.5 * pt.x[3]) < 1e-6);
}

TEST_CASE("closed fold curve and reversal") {
  // folds where 1 - p1^2 - p2^2 = 0
  const Codim2Problem p = problem(
      scalar([](double x, const Vec& a) { return x * x - (1.0 - a[0] * a[0] - a[1] * a[1]); }), CurveKind::Fold);
  const ContinuationSettings s = curve_settings();
  const Vec x0 = init_fold_curve(p, vec({0.0}), vec({1.0, 0.0}), s);
  const Branch fwd = continue_codim2(p, x0, {0.0, 1.0}, s);
  const Branch rev = continue_codim2(p, x0, {0.0, -1.0}, s);
  CHECK(fwd.termination == Termination::Closed);
  CHECK(rev.termination == Termination::Closed);
  const Polyline a = param_points(p, fwd), b = param_points(p, rev);
  for (const auto& q : a) CHECK(std::hypot(q[0], q[1]) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(hausdorff_distance(a, b) < 1e-6 + 0.5 * s.max_step * s.max_step);
  // opposite orientation
  CHECK(compute_area(a).signed_area * compute_area(b).signed_area < 0);
}

TEST_CASE("Hopf init recovers frequency and eigenvector span") {
  const Codim2Problem p = problem(planar_hopf([](const Vec& a) { return a[0] + a[1]; }), CurveKind::Hopf);
  ContinuationSettings s;
  // normal linear part: any phase has u.v = 0, the init still has to pick one
  const Vec x0 = init_hopf_curve(p, vec({0.0, 0.0}), vec({0.0, 0.0}), s);
  REQUIRE(x0.size() == 9);
  CHECK(x0[p.omega_coord()] == doctest::Approx(1.0).epsilon(1e-8));
  const Vec u = x0.segment(2, 2), v = x0.segment(4, 2);
  CHECK(u.squaredNorm() + v.squaredNorm() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(u.dot(v)) < 1e-10);
  // u + i v is an eigenvector of [[0,-1],[1,0]] for +i: A u = -omega v
  Mat a(2, 2);
  a << 0, -1, 1, 0;
  CHECK((a * u + v).norm() < 1e-8);
  CHECK((a * v - u).norm() < 1e-8);
}

TEST_CASE("Hopf init at a fold fails") {
  const Codim2Problem p = problem(scalar([](double x, const Vec& a) { return x * x - a[0]; }), CurveKind::Hopf);
  CHECK_THROWS_AS(init_hopf_curve(p, vec({0.0}), vec({0.0, 0.0}), ContinuationSettings{}), InitFailure);
}

TEST_CASE("closed Hopf curve") {
  const Codim2Problem p =
      problem(planar_hopf([](const Vec& a) { return 1.0 - a[0] * a[0] - a[1] * a[1]; }, 2.0), CurveKind::Hopf);
  const ContinuationSettings s = curve_settings();
  const Vec x0 = init_hopf_curve(p, vec({0.0, 0.0}), vec({1.0, 0.0}), s);
  const Branch b = continue_codim2(p, x0, {0.0, 1.0}, s);
  CHECK(b.termination == Termination::Closed);
  for (const auto& pt : b.points) {
    CHECK(std::hypot(pt.x[p.param_coord(0)], pt.x[p.param_coord(1)]) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(pt.x[p.omega_coord()] == doctest::Approx(1.0).epsilon(1e-6));
    const Vec u = pt.x.segment(2, 2), v = pt.x.segment(4, 2);
    CHECK(std::abs(u.squaredNorm() + v.squaredNorm() - 1.0) <= s.newton_tol);
    CHECK(std::abs(u.dot(v)) <= s.newton_tol);
    CHECK(codim2_residual(p, pt.x) <= s.newton_tol);
  }
}

TEST_CASE("init from an LP event on an equilibrium branch") {
  EquilibriumProblem eq;
  eq.sys = scalar([](double x, const Vec& a) { return x * x - a[0] - 0.5 * a[1]; });
  eq.base_params = Vec::Zero(2);
  eq.base_params[0] = 1.0;
  eq.active = 0;
  ContinuationSettings s;
  s.max_step = 0.02;
  s.init_step = 0.01;
  s.max_points = 200;
  const Branch b = trace_equilibria(eq, vec({1.0}), -1, s);
  const Event* lp = nullptr;
  for (const auto& e : b.events)
    if (e.label == PointLabel::LP) lp = &e;
  REQUIRE(lp);
  const Codim2Problem fold = problem(eq.sys, CurveKind::Fold);
  const Vec x0 = init_from_event(fold, eq, *lp, s);
  CHECK(codim2_residual(fold, x0) <= 1e-8);
  const Codim2Problem hopf = problem(eq.sys, CurveKind::Hopf);
  CHECK_THROWS_AS(init_from_event(hopf, eq, *lp, s), InitFailure);
}
