#include <doctest.h>

#include <cmath>
#include <numbers>

#include "stabdom/bifurcation.hpp"
#include "stabdom/continuation.hpp"
#include "stabdom/errors.hpp"

using namespace stabdom;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

ExtendedSystem circle() {
  ExtendedSystem f;
  f.equations = 1;
  f.residual = [](const Vec& x) { return Vec::Constant(1, x[0] * x[0] + x[1] * x[1] - 1.0); };
  f.closure_coords = {0, 1};
  return f;
}

// scalar state, one parameter: f(chi, lambda) = chi^2 - lambda
EquilibriumProblem fold_problem() {
  EquilibriumProblem p;
  p.sys.dim_state = 1;
  p.sys.dim_params = 1;
  p.sys.param_names = {"lambda"};
  p.sys.eval = [](const Vec& x, const Vec& a) { return Vec::Constant(1, x[0] * x[0] - a[0]); };
  p.base_params = Vec::Ones(1);  // (chi, lambda) = (1, 1) is on the branch
  return p;
}

}  // namespace

TEST_CASE("tangent of a line") {
  Mat fx(1, 2);
  fx << 1.0, -1.0;
  const Vec t = tangent(fx, v2(1, 0));
  CHECK(t[0] == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK(t[1] == doctest::Approx(1 / std::sqrt(2.0)));
  const Vec back = tangent(fx, v2(-1, 0));
  CHECK(back[0] == doctest::Approx(-1 / std::sqrt(2.0)));
}

TEST_CASE("tangent to the unit circle at (1, 0)") {
  const ExtendedSystem f = circle();
  const Vec t = tangent(f.jacobian_at(v2(1, 0), 1e-6), v2(0, 1));
  CHECK(std::abs(t[0]) < 1e-9);
  CHECK(t[1] == doctest::Approx(1.0));
}

TEST_CASE("singular bordered matrix") {
  Mat fx = Mat::Zero(1, 2);
  CHECK_THROWS_AS(tangent(fx, v2(1, 0)), TangentFailure);
}

TEST_CASE("newton corrector") {
  const ExtendedSystem f = circle();
  ContinuationSettings s;
  SUBCASE("lands on the circle") {
    const Vec x = newton_correct(f, v2(1.001, 0.01), v2(0, 1), s);
    CHECK(std::abs(x.squaredNorm() - 1.0) < 1e-6);
    CHECK(x[1] == doctest::Approx(0.01));
  }
  SUBCASE("exact point is returned unchanged") {
    const Vec p = v2(std::cos(0.3), std::sin(0.3));
    const Vec x = newton_correct(f, p, v2(-std::sin(0.3), std::cos(0.3)), s);
    CHECK((x - p).norm() < 1e-12);
  }
  SUBCASE("far predictor fails") {
    CHECK_THROWS_AS(newton_correct(f, v2(10, 10), v2(0, 1), s), CorrectorFailure);
  }
}

TEST_CASE("circle continuation returns to its start") {
  ContinuationSettings s;
  s.max_points = 2000;
  s.init_step = 0.01;
  s.max_step = 0.05;
  s.detect_closure = true;
  const Branch b = continue_branch(circle(), v2(0, 1), v2(1, 0), s, {});
  CHECK(b.termination == Termination::Closed);
  double length = 0;
  for (std::size_t i = 0; i < b.points.size(); ++i) {
    CHECK(std::abs(b.points[i].x.squaredNorm() - 1.0) <= 1e-6);
    CHECK(b.points[i].residual <= s.newton_tol);
    if (i) length += (b.points[i].x - b.points[i - 1].x).norm();
  }
  CHECK(length == doctest::Approx(2 * std::numbers::pi).epsilon(0.03));
}

TEST_CASE("step control keeps chords within the step") {
  ContinuationSettings s;
  s.max_points = 300;
  s.init_step = 0.01;
  s.max_step = 0.05;
  const Branch b = continue_branch(circle(), v2(0, 1), v2(1, 0), s, {});
  for (std::size_t i = 1; i < b.points.size(); ++i) {
    CHECK((b.points[i].x - b.points[i - 1].x).norm() <= 1.05 * s.max_step);
  }
}

TEST_CASE("fold traversal") {
  const EquilibriumProblem p = fold_problem();
  ContinuationSettings s;
  s.max_points = 400;
  s.init_step = 0.01;
  s.max_step = 0.02;
  const Branch b = trace_equilibria(p, Vec::Constant(1, 1.0), -1, s);
  bool pos = false, neg = false;
  int flips = 0;
  for (std::size_t i = 0; i < b.points.size(); ++i) {
    pos |= b.points[i].x[0] > 0.1;
    neg |= b.points[i].x[0] < -0.1;
    if (i && b.points[i].tangent[1] * b.points[i - 1].tangent[1] < 0) ++flips;
  }
  CHECK(pos);
  CHECK(neg);
  // the localized LP sits at zero tangent, so it can show as two flips through an exact zero
  CHECK(flips >= 1);
  CHECK(flips <= 2);
  int lps = 0;
  for (const auto& e : b.events) lps += e.label == PointLabel::LP;
  CHECK(lps == 1);
}

TEST_CASE("events do not consume the point budget") {
  const EquilibriumProblem p = fold_problem();
  ContinuationSettings s;
  s.max_points = 150;
  s.init_step = 0.01;
  s.max_step = 0.02;
  const Branch b = trace_equilibria(p, Vec::Constant(1, 1.0), -1, s);
  REQUIRE(b.termination == Termination::MaxPoints);
  CHECK(b.points.size() == static_cast<std::size_t>(s.max_points) + b.events.size());
}

TEST_CASE("continuation is deterministic") {
  const EquilibriumProblem p = fold_problem();
  ContinuationSettings s;
  s.max_points = 100;
  s.max_step = 0.02;
  const Branch a = trace_equilibria(p, Vec::Constant(1, 1.0), -1, s);
  const Branch b = trace_equilibria(p, Vec::Constant(1, 1.0), -1, s);
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) CHECK((a.points[i].x - b.points[i].x).norm() == 0.0);
}

TEST_CASE("a start point off the branch is rejected") {
  ContinuationSettings s;
  CHECK_THROWS_AS(continue_branch(circle(), v2(0, 1.5), v2(1, 0), s, {}), PreconditionViolation);
}

TEST_CASE("settings validation") {
  ContinuationSettings s;
  s.min_step = 1.0;
  s.max_step = 0.1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = ContinuationSettings{};
  s.max_points = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  CHECK_NOTHROW(ContinuationSettings::equilibrium_defaults().validate());
  CHECK_NOTHROW(ContinuationSettings::curve_defaults().validate());
}

TEST_CASE("model failure ends the branch at a boundary") {
  EquilibriumProblem p = fold_problem();
  p.base_params = Vec::Zero(1);
  // f blows up for lambda > 0.5
  p.sys.eval = [](const Vec& x, const Vec& a) {
    if (a[0] > 0.5) throw DegenerateConfiguration(0, "wall");
    return Vec::Constant(1, x[0] - a[0]);
  };
  ContinuationSettings s;
  s.max_step = 0.05;
  const Branch b = trace_equilibria(p, Vec::Zero(1), +1, s);
  CHECK(b.termination == Termination::Boundary);
  CHECK(b.points.back().x[1] <= 0.5);
}
