#pragma once

// Hyperellipsoid barrier, discrete-time barrier condition (CBC), the Gaussian
// moment matching of the stochastic CBC and its deterministic chance-constraint
// reformulation.

#include "scbf/models.hpp"
#include "scbf/soc_constraint.hpp"

namespace scbf {

struct BarrierConfig {
  double gamma = 0.5;  // decay rate, 0 < gamma <= 1
  double delta = 0.97; // confidence level, 0 < delta < 1
  double zeta = 0.0;   // threshold, >= 0
  Mat selector;        // n_o x n rows picking the position out of the state

  void validate() const;
};

/// [I_{n_o} 0] for a state whose first n_o entries are the position.
Mat position_selector(int state_dim, int obstacle_dim = 3);

BarrierConfig make_barrier_config(double gamma, double delta, double zeta, int state_dim,
                                  int obstacle_dim = 3);

/// Mean and variance of the CBC as quadratics in the decision u:
///
///   E[CBC](u)   = u^T Phi u + 2 m^T u + s
///   Var[CBC](u) = u^T H u   + 2 n^T u + d
///
/// The moments are also kept in affine form: the successor position minus
/// the obstacle mean is e(u) = successor_jacobian * u + successor_offset, which
/// lets the standard deviation be written exactly as a Euclidean norm.
struct CbcMoments {
  Mat Phi;
  Mat H;
  Vec m_vec;
  Vec n_vec;
  double s = 0.0;
  double d = 0.0;

  Mat successor_jacobian;
  Vec successor_offset;
  Mat shape;
  double sigma2 = 0.0;

  int input_dim() const { return static_cast<int>(m_vec.size()); }
  double mean_at(const Vec& u) const;
  double var_at(const Vec& u) const;

  /// Builds the moments from the affine successor residual. `h_current` is the
  /// barrier value at the current (state, obstacle) pair; the (1 - gamma) h term
  /// enters through s.
  static CbcMoments from_successor(Mat jacobian, Vec offset, double h_current, const Mat& shape,
                                   double sigma2, double gamma);
};

struct QuadraticFormMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// (S x - o)^T W (S x - o) - 1.
double barrier_value(const Vec& x, const Vec& o, const ObstacleSpec& spec, const BarrierConfig& cfg);

/// h(step(x, u), xi(o)) - (1 - gamma) h(x, o).
double cbc_deterministic(const Vec& x, const Vec& u, const Vec& o, const RobotModel& model,
                         const ObstacleSpec& spec, const BarrierConfig& cfg);

/// E and Var of z^T A z for z ~ N(mu, Sigma). Rejects asymmetric A.
QuadraticFormMoments quadratic_form_moments(const Vec& mu, const Mat& Sigma, const Mat& A);

CbcMoments cbc_moments(const Vec& x, const Vec& o, const RobotModel& model, const ObstacleSpec& spec,
                       const BarrierConfig& cfg);

/// Solves erf(x) = y for |y| < 1 to within 1e-12.
double inverse_erf(double y);

/// sqrt(2) erfinv(2 delta - 1); the number of standard deviations the mean
/// must clear for a Gaussian to exceed the threshold with probability delta.
double confidence_scale(double delta);

/// E[CBC](u) - c(delta) sqrt(Var[CBC](u)) - zeta. The chance constraint holds iff >= 0.
double chance_margin(const CbcMoments& moments, const Vec& u, const BarrierConfig& cfg);

/// Convex inner approximation of the chance constraint around u_ref:
///
///   c(delta) ||affine(u)|| <= L(u) - zeta
///
/// where L is the tangent of the convex mean at u_ref and ||affine(u)|| is
/// exactly sqrt(Var[CBC](u)). Requires delta >= 0.5.
SocConstraint convexified_constraint(const CbcMoments& moments, const Vec& u_ref,
                                     const BarrierConfig& cfg);

/// Upper bound on chance_margin(u) that depends on the noise only through sigma^2:
///
///   D - zeta + (tr W - sqrt(2) c(delta) sqrt(tr(W^T W))) sigma^2,
///   D = ||f + g u - xi(o)||_W^2 - (1 - gamma) h(x, o) - 1.
///
/// The sigma^2 coefficient is negative whenever c(delta) > tr W / sqrt(2 tr(W^T W)).
double feasibility_bound(const Vec& x, const Vec& o, const Vec& u, const RobotModel& model,
                         const ObstacleSpec& spec, const BarrierConfig& cfg);

}  // namespace scbf
