#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "scbf/solve/scp.hpp"
#include "test_support.hpp"

using namespace scbf;
using scbf::testing::vec;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// minimize ||u - target||^2  s.t.  ||u - center||^2 >= r^2,  |u_i| <= bound.
// The keep-out disc is handled by its tangent half-space, which lies inside
// the true feasible set because the constraint function is convex.
NonconvexProgram keep_out(const Vec& target, const Vec& center, double r, double bound) {
  const auto n = target.size();
  NonconvexProgram prog;
  prog.dimension = static_cast<int>(n);
  prog.lower = Vec::Constant(n, -bound);
  prog.upper = Vec::Constant(n, bound);
  prog.objective = [target](const Vec& u) { return (u - target).squaredNorm(); };
  prog.constraints = [center, r](const Vec& u) {
    return Vec::Constant(1, (u - center).squaredNorm() - r * r);
  };
  prog.convexifier = [target, center, r, bound, n](const Vec& ref) {
    ConvexModel m;
    ConicProblem& p = m.problem;
    p.P = Mat::Zero(n + 1, n + 1);
    p.P.topLeftCorner(n, n) = 2.0 * Mat::Identity(n, n);
    p.q = Vec::Zero(n + 1);
    p.q.head(n) = -2.0 * target;
    p.constant = target.squaredNorm();
    p.lower = Vec::Constant(n + 1, -bound);
    p.upper = Vec::Constant(n + 1, bound);
    p.lower[n] = 0.0;
    p.upper[n] = kInf;
    const Vec a = 2.0 * (ref - center);
    const double b0 = (ref - center).squaredNorm() - r * r - a.dot(ref);
    p.G = Mat::Zero(1, n + 1);
    p.G.row(0).head(n) = -a.transpose();
    p.G(0, n) = -1.0;
    p.h = Vec::Constant(1, b0);
    m.slack_index = static_cast<int>(n);
    return m;
  };
  return prog;
}

}  // namespace

TEST_CASE("convex program is a fixed point") {
  // min ||u||^2 s.t. ||u - (3, 0)|| <= 1, given directly as its own model.
  ConicProblem p;
  p.P = 2.0 * Mat::Identity(2, 2);
  p.q = Vec::Zero(2);
  SocConstraint soc;
  soc.A = Mat::Identity(2, 2);
  soc.b = vec({-3, 0});
  soc.c = Vec::Zero(2);
  soc.e = 1.0;
  p.soc_constraints.push_back(soc);
  const auto direct = solve_conic(p);
  REQUIRE(direct.status == SolveStatus::Optimal);

  NonconvexProgram prog;
  prog.dimension = 2;
  prog.objective = [](const Vec& u) { return u.squaredNorm(); };
  prog.constraints = [](const Vec& u) { return Vec::Constant(1, 1.0 - (u - vec({3, 0})).norm()); };
  prog.convexifier = [p](const Vec&) { return ConvexModel{p, -1}; };
  const auto r = solve_scp(prog, vec({3, 0}), 20, 10.0);
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK((r.decision - direct.decision).norm() < 1e-6);
  CHECK((r.decision - vec({2, 0})).norm() < 1e-6);
}

TEST_CASE("unreachable constraint is infeasible") {
  // The keep-out disc of radius 10 covers the whole box [-1, 1]^2.
  const auto prog = keep_out(Vec::Zero(2), vec({0.1, 0.0}), 10.0, 1.0);
  const auto r = solve_scp(prog, vec({0.5, 0.5}), 30, 1.0);
  CHECK(r.status == SolveStatus::Infeasible);
  CHECK(r.max_violation > 1.0);
}

TEST_CASE("keep-out disc against a sampling oracle") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec center = vec({uni(rng), uni(rng)});
    const double r = 1.0 + 0.5 * (uni(rng) + 1.0);
    // Target strictly inside the disc, so the constraint is active.
    const Vec target = center + 0.5 * r * vec({uni(rng), uni(rng)}) / std::sqrt(2.0);
    const auto prog = keep_out(target, center, r, 4.0);
    const auto res = solve_scp(prog, target, 50, 1.0);
    REQUIRE(res.status == SolveStatus::Optimal);
    CHECK(prog.violation(res.decision) <= 1e-6);

    std::uniform_real_distribution<double> box(-4.0, 4.0);
    double best = std::numeric_limits<double>::infinity();
    for (int s = 0; s < 10000; ++s) {
      const Vec u = vec({box(rng), box(rng)});
      if (prog.constraints(u)[0] < 0.0) continue;
      best = std::min(best, prog.objective(u));
    }
    CHECK(res.objective_value <= best + 1e-6);
    // Radial projection of the target onto the circle.
    const Vec radial = center + r * (target - center).normalized();
    CHECK(res.objective_value == doctest::Approx(prog.objective(radial)).epsilon(1e-3));
  }
}

TEST_CASE("slack is used only when unavoidable") {
  const auto prog = keep_out(Vec::Zero(2), vec({0.5, 0.0}), 1.0, 4.0);
  const ConvexModel m = prog.convexifier(vec({0.0, 0.0}));
  double slack = -1.0;
  const auto sol = solve_with_slack(m, SlackSettings{}, ConicSettings{}, &slack);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(slack <= 1e-6);
  CHECK(prog.constraints(sol.decision.head(2))[0] >= -1e-6);
}

TEST_CASE("scp argument validation") {
  const auto prog = keep_out(Vec::Zero(2), vec({0.5, 0.0}), 1.0, 4.0);
  CHECK_THROWS_AS(solve_scp(prog, Vec::Zero(3), 10, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(solve_scp(prog, Vec::Zero(2), 0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(solve_scp(prog, Vec::Zero(2), 10, 0.0), std::invalid_argument);
}
