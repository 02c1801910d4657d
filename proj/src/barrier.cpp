#include "scbf/barrier.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace scbf {

void BarrierConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("barrier: 0 < gamma <= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("barrier: 0 < delta < 1");
  if (!(zeta >= 0.0)) throw std::invalid_argument("barrier: zeta >= 0");
  for (Eigen::Index r = 0; r < selector.rows(); ++r) {
    int ones = 0;
    for (Eigen::Index c = 0; c < selector.cols(); ++c) {
      const double v = selector(r, c);
      if (v == 1.0) {
        ++ones;
      } else if (v != 0.0) {
        throw std::invalid_argument("barrier: selector entries must be 0 or 1");
      }
    }
    if (ones != 1) throw std::invalid_argument("barrier: selector needs exactly one 1 per row");
  }
}

Mat position_selector(int state_dim, int obstacle_dim) {
  if (obstacle_dim > state_dim) throw DimensionError("selector: obstacle dimension exceeds state");
  Mat S = Mat::Zero(obstacle_dim, state_dim);
  S.leftCols(obstacle_dim).setIdentity();
  return S;
}

BarrierConfig make_barrier_config(double gamma, double delta, double zeta, int state_dim,
                                  int obstacle_dim) {
  BarrierConfig cfg{gamma, delta, zeta, position_selector(state_dim, obstacle_dim)};
  cfg.validate();
  return cfg;
}

namespace {

void check_selector(const BarrierConfig& cfg, Eigen::Index state_dim, Eigen::Index obstacle_dim) {
  if (cfg.selector.rows() != obstacle_dim || cfg.selector.cols() != state_dim) {
    throw DimensionError("barrier: selector must be " + std::to_string(obstacle_dim) + "x" +
                         std::to_string(state_dim));
  }
}

void require_spd(const Mat& W) {
  if (W.rows() != W.cols()) throw DimensionError("barrier: shape matrix must be square");
  Eigen::LLT<Mat> llt(W);
  if (llt.info() != Eigen::Success ||
      (W - W.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + W.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("barrier: shape matrix must be symmetric positive definite");
  }
}

}  // namespace

double CbcMoments::mean_at(const Vec& u) const {
  require_dim(u, input_dim(), "cbc input");
  return u.dot(Phi * u) + 2.0 * m_vec.dot(u) + s;
}

double CbcMoments::var_at(const Vec& u) const {
  require_dim(u, input_dim(), "cbc input");
  return u.dot(H * u) + 2.0 * n_vec.dot(u) + d;
}

CbcMoments CbcMoments::from_successor(Mat jacobian, Vec offset, double h_current, const Mat& shape,
                                      double sigma2, double gamma) {
  if (jacobian.rows() != offset.size() || shape.rows() != offset.size()) {
    throw DimensionError("cbc moments: successor jacobian, offset and shape disagree");
  }
  CbcMoments mom;
  const Mat Wg = shape * jacobian;
  const Vec We = shape * offset;
  const double trW = shape.trace();
  const double trWW = (shape.transpose() * shape).trace();

  mom.Phi = jacobian.transpose() * Wg;
  mom.H = 4.0 * sigma2 * Wg.transpose() * Wg;
  mom.m_vec = jacobian.transpose() * We;
  mom.n_vec = 4.0 * sigma2 * Wg.transpose() * We;
  mom.s = offset.dot(We) + sigma2 * trW - (1.0 - gamma) * h_current - 1.0;
  mom.d = 4.0 * sigma2 * We.squaredNorm() + 2.0 * sigma2 * sigma2 * trWW;

  mom.successor_jacobian = std::move(jacobian);
  mom.successor_offset = std::move(offset);
  mom.shape = shape;
  mom.sigma2 = sigma2;
  return mom;
}

double barrier_value(const Vec& x, const Vec& o, const ObstacleSpec& spec, const BarrierConfig& cfg) {
  require_dim(o, spec.state_dim(), "obstacle state");
  check_selector(cfg, x.size(), o.size());
  const Vec diff = cfg.selector * x - o;
  return diff.dot(spec.shape * diff) - 1.0;
}

double cbc_deterministic(const Vec& x, const Vec& u, const Vec& o, const RobotModel& model,
                         const ObstacleSpec& spec, const BarrierConfig& cfg) {
  const Vec x_next = model.step(x, u);
  const Vec o_next = spec.mean_motion(o);
  return barrier_value(x_next, o_next, spec, cfg) - (1.0 - cfg.gamma) * barrier_value(x, o, spec, cfg);
}

QuadraticFormMoments quadratic_form_moments(const Vec& mu, const Mat& Sigma, const Mat& A) {
  const Eigen::Index p = mu.size();
  if (Sigma.rows() != p || Sigma.cols() != p || A.rows() != p || A.cols() != p) {
    throw DimensionError("quadratic_form_moments: mu, Sigma and A must agree");
  }
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + A.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("quadratic_form_moments: A must be symmetric");
  }
  const Mat AS = A * Sigma;
  const Vec Amu = A * mu;
  QuadraticFormMoments out;
  out.mean = AS.trace() + mu.dot(Amu);
  out.variance = 2.0 * (AS * AS).trace() + 4.0 * Amu.dot(Sigma * Amu);
  return out;
}

CbcMoments cbc_moments(const Vec& x, const Vec& o, const RobotModel& model, const ObstacleSpec& spec,
                       const BarrierConfig& cfg) {
  require_dim(x, model.state_dim(), "robot state");
  require_dim(o, spec.state_dim(), "obstacle state");
  check_selector(cfg, x.size(), o.size());
  require_spd(spec.shape);

  const Vec f = model.drift(x);
  const Mat g = model.input_matrix(x);
  return CbcMoments::from_successor(cfg.selector * g, cfg.selector * f - spec.mean_motion(o),
                                    barrier_value(x, o, spec, cfg), spec.shape, spec.noise_var,
                                    cfg.gamma);
}

double inverse_erf(double y) {
  if (!(y > -1.0 && y < 1.0)) throw std::domain_error("inverse_erf: |y| must be < 1");
  if (y == 0.0) return 0.0;
  if (y < 0.0) return -inverse_erf(-y);

  // Winitzki's closed-form approximation, good to ~2e-3, then Newton.
  constexpr double a = 0.147;
  const double ln = std::log1p(-y * y);
  const double t = 2.0 / (std::numbers::pi * a) + 0.5 * ln;
  double x = std::sqrt(std::sqrt(t * t - ln / a) - t);

  const double one_minus_y = 1.0 - y;
  const double slope_scale = 2.0 / std::sqrt(std::numbers::pi);
  for (int it = 0; it < 100; ++it) {
    // erf(x) - y, written through erfc in the tail to keep relative accuracy.
    const double residual = x > 0.5 ? one_minus_y - std::erfc(x) : std::erf(x) - y;
    const double slope = slope_scale * std::exp(-x * x);
    if (slope == 0.0) break;
    const double dx = residual / slope;
    x -= dx;
    if (std::abs(dx) <= 1e-15 * std::max(1.0, std::abs(x))) break;
  }
  return x;
}

double confidence_scale(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::domain_error("confidence_scale: 0 < delta < 1");
  return std::numbers::sqrt2 * inverse_erf(2.0 * delta - 1.0);
}

double chance_margin(const CbcMoments& moments, const Vec& u, const BarrierConfig& cfg) {
  const double var = std::max(0.0, moments.var_at(u));
  return moments.mean_at(u) - confidence_scale(cfg.delta) * std::sqrt(var) - cfg.zeta;
}

SocConstraint convexified_constraint(const CbcMoments& moments, const Vec& u_ref,
                                     const BarrierConfig& cfg) {
  if (cfg.delta < 0.5) {
    throw std::invalid_argument("convexified_constraint: delta < 0.5 is not supported");
  }
  require_dim(u_ref, moments.input_dim(), "reference input");
  const double c = confidence_scale(cfg.delta);
  const double sigma = std::sqrt(moments.sigma2);
  const Mat& W = moments.shape;
  const Eigen::Index no = W.rows();
  const Eigen::Index m = moments.input_dim();

  SocConstraint soc;
  soc.A = Mat::Zero(no + 1, m);
  soc.b = Vec::Zero(no + 1);
  if (c * sigma > 0.0) {
    soc.A.topRows(no) = (2.0 * c * sigma) * (W * moments.successor_jacobian);
    soc.b.head(no) = (2.0 * c * sigma) * (W * moments.successor_offset);
    soc.b[no] = c * moments.sigma2 * std::sqrt(2.0 * (W.transpose() * W).trace());
  }
  const Vec grad = 2.0 * (moments.Phi * u_ref + moments.m_vec);
  soc.c = grad;
  soc.e = moments.mean_at(u_ref) - grad.dot(u_ref) - cfg.zeta;
  return soc;
}

double feasibility_bound(const Vec& x, const Vec& o, const Vec& u, const RobotModel& model,
                         const ObstacleSpec& spec, const BarrierConfig& cfg) {
  const Vec x_next = model.step(x, u);
  check_selector(cfg, x.size(), o.size());
  const Vec e = cfg.selector * x_next - spec.mean_motion(o);
  const Mat& W = spec.shape;
  const double D = e.dot(W * e) - (1.0 - cfg.gamma) * barrier_value(x, o, spec, cfg) - 1.0;
  const double frob = std::sqrt((W.transpose() * W).trace());
  const double c = confidence_scale(cfg.delta);
  return D - cfg.zeta + (W.trace() - std::numbers::sqrt2 * c * frob) * spec.noise_var;
}

}  // namespace scbf
