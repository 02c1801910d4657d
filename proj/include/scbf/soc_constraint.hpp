#pragma once

#include <Eigen/Dense>

namespace scbf {

/// Second-order cone constraint  ||A u + b|| <= c^T u + e.
struct SocConstraint {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  double e = 0.0;

  int dim() const { return static_cast<int>(c.size()); }

  /// c^T u + e - ||A u + b||; non-negative iff satisfied.
  double residual(const Eigen::VectorXd& u) const {
    const double lhs = A.rows() > 0 ? (A * u + b).norm() : 0.0;
    return c.dot(u) + e - lhs;
  }

  bool satisfied(const Eigen::VectorXd& u, double tol = 0.0) const { return residual(u) >= -tol; }
};

}  // namespace scbf
