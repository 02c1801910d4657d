#pragma once

// Dense primal-dual interior-point solver for
//
//   minimize    1/2 z^T P z + q^T z + constant
//   subject to  lower <= z <= upper
//               G z <= h
//               ||A_j z + b_j|| <= c_j^T z + e_j      (j = 1..J)
//
// using Nesterov-Todd scaling and Mehrotra predictor-corrector steps.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scbf/soc_constraint.hpp"

namespace scbf {

struct ConicProblem {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  double constant = 0.0;

  std::vector<SocConstraint> soc_constraints;

  // Empty vectors mean unbounded; entries may be +-infinity.
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  // Optional affine inequalities G z <= h.
  Eigen::MatrixXd G;
  Eigen::VectorXd h;

  int dim() const { return static_cast<int>(q.size()); }
  double objective(const Eigen::VectorXd& z) const;
  /// Largest violation of any constraint at z (0 when feasible).
  double max_violation(const Eigen::VectorXd& z) const;
  /// Throws std::invalid_argument on inconsistent sizes, crossed bounds or non-PSD P.
  void validate() const;
};

enum class SolveStatus { Optimal, Infeasible, IterationLimit };

std::string to_string(SolveStatus status);

struct SolveResult {
  SolveStatus status = SolveStatus::IterationLimit;
  Eigen::VectorXd decision;
  double objective_value = 0.0;
  int iterations = 0;
  double max_violation = 0.0;
  double kkt_residual = 0.0;
  double duality_gap = 0.0;
};

struct ConicSettings {
  int max_iterations = 80;
  double feasibility_tol = 1e-8;
  double absolute_gap_tol = 1e-8;
  double relative_gap_tol = 1e-8;
  // Accepted as Optimal when the full tolerances stall (e.g. at a degenerate cone).
  double reduced_tol = 1e-6;
  double step_fraction = 0.99;
};

/// Deterministic: identical inputs give bit-identical outputs. A warm start,
/// when given, seeds the primal iterate only.
SolveResult solve_conic(const ConicProblem& problem,
                        const std::optional<Eigen::VectorXd>& warm_start = std::nullopt,
                        const ConicSettings& settings = {});

}  // namespace scbf
