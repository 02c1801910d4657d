#pragma once

// Sequential convex programming for
//
//   minimize f(u)  subject to  g(u) >= 0,  lower <= u <= upper
//
// where each iterate solves a convex inner approximation supplied by the
// caller, restricted to a trust box around the current point.

#include <functional>
#include <optional>
#include <vector>

#include "scbf/solve/conic.hpp"

namespace scbf {

/// Convex subproblem over z = [u; aux]. The first `dimension` entries of z are
/// u. When slack_index >= 0, z[slack_index] is a non-negative slack shared by
/// all relaxed constraints; its penalty is added by the solver, so the
/// objective in `problem` must not include it.
struct ConvexModel {
  ConicProblem problem;
  int slack_index = -1;
};

struct NonconvexProgram {
  int dimension = 0;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::function<double(const Eigen::VectorXd&)> objective;
  /// Constraint values; feasible iff every entry is >= 0.
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> constraints;
  /// Inner approximation at a reference point. May throw.
  std::function<ConvexModel(const Eigen::VectorXd&)> convexifier;
  /// Size of the step from the first argument to the second, compared with
  /// ScpSettings::step_tol. Euclidean distance when unset.
  std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)> step_measure;

  /// max(0, -min g(u)).
  double violation(const Eigen::VectorXd& u) const;
};

struct SlackSettings {
  double penalty = 1e4;
  double tolerance = 1e-6;
  // Penalty growth when a positive slack turns out to be avoidable.
  double penalty_growth = 10.0;
  double max_penalty = 1e9;
};

struct ScpSettings {
  double shrink = 0.5;
  double grow = 1.5;
  double max_radius = 4.0;
  double step_tol = 1e-6;
  double merit_tol = 1e-4;
  double violation_tol = 1e-6;
  int infeasible_streak = 5;
  /// Anderson mixing depth for the convexification point. Only sound when the
  /// convexifier is an inner approximation at any point; 0 convexifies at the
  /// accepted iterate.
  int anderson_depth = 0;
  SlackSettings slack;
  ConicSettings conic;
};

struct ScpResult : SolveResult {
  int outer_iterations = 0;
  int inner_iterations = 0;
  double final_slack = 0.0;
  std::vector<double> merit_history;  // merit of the accepted iterate after each outer step
};

/// Solves a convex model whose relaxed constraints share one slack. If the
/// slack comes out positive, a phase-one solve decides whether it is
/// unavoidable; if not, the penalty is raised and the model re-solved.
/// `min_slack` receives the smallest attainable slack found.
SolveResult solve_with_slack(const ConvexModel& model, const SlackSettings& settings,
                             const ConicSettings& conic, double* min_slack = nullptr,
                             int* inner_iterations = nullptr);

ScpResult solve_scp(const NonconvexProgram& program, const Eigen::VectorXd& init, int max_outer,
                    double trust_radius, const ScpSettings& settings = {});

}  // namespace scbf
