#include "scbf/solve/scp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "scbf/solve/anderson.hpp"

namespace scbf {

namespace {

using Vec = Eigen::VectorXd;

ConicProblem with_penalty(const ConvexModel& model, double penalty) {
  ConicProblem p = model.problem;
  if (model.slack_index >= 0) p.q[model.slack_index] += penalty;
  return p;
}

ConicProblem phase_one(const ConvexModel& model) {
  ConicProblem p = model.problem;
  const int n = p.dim();
  p.P = Eigen::MatrixXd::Zero(n, n);
  p.q = Vec::Zero(n);
  p.constant = 0.0;
  p.q[model.slack_index] = 1.0;
  return p;
}

}  // namespace

double NonconvexProgram::violation(const Vec& u) const {
  const Vec g = constraints(u);
  return g.size() == 0 ? 0.0 : std::max(0.0, -g.minCoeff());
}

SolveResult solve_with_slack(const ConvexModel& model, const SlackSettings& settings,
                             const ConicSettings& conic, double* min_slack, int* inner_iterations) {
  int inner = 0;
  double penalty = settings.penalty;
  SolveResult res = solve_conic(with_penalty(model, penalty), std::nullopt, conic);
  inner += res.iterations;
  double slack = 0.0;
  if (model.slack_index >= 0 && res.status == SolveStatus::Optimal) {
    slack = res.decision[model.slack_index];
    if (slack > settings.tolerance) {
      const SolveResult p1 = solve_conic(phase_one(model), std::nullopt, conic);
      inner += p1.iterations;
      const double least = p1.status == SolveStatus::Optimal ? p1.decision[model.slack_index] : slack;
      while (least <= settings.tolerance && slack > settings.tolerance &&
             penalty * settings.penalty_growth <= settings.max_penalty) {
        penalty *= settings.penalty_growth;
        SolveResult again = solve_conic(with_penalty(model, penalty), std::nullopt, conic);
        inner += again.iterations;
        if (again.status != SolveStatus::Optimal) break;
        res = again;
        slack = res.decision[model.slack_index];
      }
      slack = std::min(slack, std::max(least, 0.0));
    }
  }
  if (min_slack) *min_slack = slack;
  if (inner_iterations) *inner_iterations = inner;
  if (res.status == SolveStatus::Optimal && model.slack_index >= 0) {
    // Report the objective without the penalty term.
    res.objective_value = model.problem.objective(res.decision);
  }
  return res;
}

ScpResult solve_scp(const NonconvexProgram& program, const Vec& init, int max_outer,
                    double trust_radius, const ScpSettings& settings) {
  const int n = program.dimension;
  if (init.size() != n) throw std::invalid_argument("solve_scp: init has wrong dimension");
  if (max_outer < 1) throw std::invalid_argument("solve_scp: max_outer must be >= 1");
  if (!(trust_radius > 0.0)) throw std::invalid_argument("solve_scp: trust_radius must be positive");

  Vec u = init;
  if (program.lower.size() == n) u = u.cwiseMax(program.lower);
  if (program.upper.size() == n) u = u.cwiseMin(program.upper);

  const double penalty = settings.slack.penalty;
  auto merit = [&](const Vec& v) { return program.objective(v) + penalty * program.violation(v); };

  ScpResult result;
  double current = merit(u);
  double radius = trust_radius;
  int streak = 0;
  Vec y = u;  // convexification point
  AndersonMixer mixer(settings.anderson_depth);

  for (int outer = 0; outer < max_outer; ++outer) {
    result.outer_iterations = outer + 1;
    ConvexModel model;
    try {
      model = program.convexifier(y);
    } catch (const std::exception&) {
      result.status = SolveStatus::Infeasible;
      result.decision = u;
      result.objective_value = program.objective(u);
      result.max_violation = program.violation(u);
      return result;
    }
    // Phase-one on the model without the trust box separates true infeasibility
    // of the convexification from a step limited by the trust region.
    const ConvexModel untrusted = model;
    ConicProblem& p = model.problem;
    const int total = p.dim();
    if (p.lower.size() == 0) p.lower = Vec::Constant(total, -std::numeric_limits<double>::infinity());
    if (p.upper.size() == 0) p.upper = Vec::Constant(total, std::numeric_limits<double>::infinity());
    p.lower.head(n) = p.lower.head(n).cwiseMax((y.array() - radius).matrix());
    p.upper.head(n) = p.upper.head(n).cwiseMin((y.array() + radius).matrix());

    double slack = 0.0;
    int inner = 0;
    const SolveResult sub = solve_with_slack(model, settings.slack, settings.conic, &slack, &inner);
    result.inner_iterations += inner;
    result.final_slack = slack;

    if (sub.status != SolveStatus::Optimal) {
      radius *= settings.shrink;
      mixer.reset();
      y = u;
      result.merit_history.push_back(current);
      if (radius < settings.step_tol) break;
      continue;
    }

    bool stuck = slack > settings.slack.tolerance;
    if (stuck && untrusted.slack_index >= 0) {
      const SolveResult p1 = solve_conic(phase_one(untrusted), std::nullopt, settings.conic);
      result.inner_iterations += p1.iterations;
      stuck = p1.status != SolveStatus::Optimal ||
              p1.decision[untrusted.slack_index] > settings.slack.tolerance;
    }
    streak = stuck ? streak + 1 : 0;

    const Vec candidate = sub.decision.head(n);
    const double cand_merit = merit(candidate);
    const double step = program.step_measure ? program.step_measure(u, candidate) : (candidate - u).norm();
    const bool accept = cand_merit <= current + 1e-12 * (1.0 + std::abs(current));
    double change = 0.0;
    if (accept) {
      change = current - cand_merit;
      u = candidate;
      current = cand_merit;
      if (change > 0.0) radius = std::min(radius * settings.grow, settings.max_radius);
      y = settings.anderson_depth > 0 ? mixer.next(y, candidate) : candidate;
    } else {
      radius *= settings.shrink;
      mixer.reset();
      y = u;
    }
    result.merit_history.push_back(current);

    if (streak >= settings.infeasible_streak) {
      result.status = SolveStatus::Infeasible;
      result.decision = u;
      result.objective_value = program.objective(u);
      result.max_violation = program.violation(u);
      return result;
    }
    if (accept && (step <= settings.step_tol ||
                   std::abs(change) <= settings.merit_tol * (1.0 + std::abs(current)))) {
      break;
    }
    if (radius < settings.step_tol) break;
  }

  result.decision = u;
  result.objective_value = program.objective(u);
  result.max_violation = program.violation(u);
  if (result.max_violation <= settings.violation_tol) {
    result.status = SolveStatus::Optimal;
  } else if (streak > 0) {
    result.status = SolveStatus::Infeasible;
  } else {
    result.status = SolveStatus::IterationLimit;
  }
  result.iterations = result.outer_iterations;
  return result;
}

}  // namespace scbf
