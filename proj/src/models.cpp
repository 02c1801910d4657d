#include "scbf/models.hpp"

#include <cmath>
#include <string>

namespace scbf {

void require_dim(const Vec& v, Eigen::Index expected, const char* what) {
  if (v.size() != expected) {
    throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(expected) +
                         ", got " + std::to_string(v.size()));
  }
}

Mat RobotModel::state_jacobian(const Vec& x, const Vec& u) const {
  const int n = state_dim();
  Mat J(n, n);
  for (int j = 0; j < n; ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
    Vec xp = x;
    Vec xm = x;
    xp[j] += h;
    xm[j] -= h;
    J.col(j) = (step(xp, u) - step(xm, u)) / (2.0 * h);
  }
  return J;
}

Vec RobotModel::step(const Vec& x, const Vec& u) const {
  require_dim(x, state_dim(), "robot state");
  require_dim(u, input_dim(), "robot input");
  return drift(x) + input_matrix(x) * u;
}

DoubleIntegrator::DoubleIntegrator(double dt, bool velocity_persistence, int dims)
    : dt_(dt), velocity_persistence_(velocity_persistence), dims_(dims) {
  if (!(dt > 0.0)) throw std::invalid_argument("DoubleIntegrator: dt must be positive");
  if (dims < 1) throw std::invalid_argument("DoubleIntegrator: dims must be >= 1");
  const int n = 2 * dims;
  A_ = Mat::Zero(n, n);
  A_.topLeftCorner(dims, dims).setIdentity();
  A_.topRightCorner(dims, dims) = dt * Mat::Identity(dims, dims);
  if (velocity_persistence) A_.bottomRightCorner(dims, dims).setIdentity();
  B_ = Mat::Zero(n, dims);
  B_.bottomRows(dims).setIdentity();
}

Vec DoubleIntegrator::drift(const Vec& x) const {
  require_dim(x, state_dim(), "robot state");
  return A_ * x;
}

Mat DoubleIntegrator::input_matrix(const Vec& x) const {
  require_dim(x, state_dim(), "robot state");
  return B_;
}

Mat DoubleIntegrator::state_jacobian(const Vec& /*x*/, const Vec& /*u*/) const { return A_; }

CircularObstacleMotion::CircularObstacleMotion(Eigen::Vector3d center, double orbit_radius,
                                               double angular_velocity, double phase,
                                               double altitude, double dt)
    : center_(std::move(center)),
      orbit_radius_(orbit_radius),
      angular_velocity_(angular_velocity),
      phase_(phase),
      altitude_(altitude),
      dt_(dt) {
  if (!(orbit_radius >= 0.0)) throw std::invalid_argument("orbit_radius must be >= 0");
  if (!(dt > 0.0)) throw std::invalid_argument("obstacle dt must be positive");
}

Vec CircularObstacleMotion::mean_motion(const Vec& o) const {
  require_dim(o, 3, "obstacle state");
  const Eigen::Vector3d c = orbit_center();
  const double bearing = std::atan2(o[1] - c[1], o[0] - c[0]);
  const double next = bearing + angular_velocity_ * dt_;
  Vec out(3);
  out << c[0] + orbit_radius_ * std::cos(next), c[1] + orbit_radius_ * std::sin(next), c[2];
  return out;
}

Vec CircularObstacleMotion::initial_state() const { return track_point(0.0); }

Vec CircularObstacleMotion::track_point(double k) const {
  const Eigen::Vector3d c = orbit_center();
  const double angle = phase_ + angular_velocity_ * dt_ * k;
  Vec out(3);
  out << c[0] + orbit_radius_ * std::cos(angle), c[1] + orbit_radius_ * std::sin(angle), c[2];
  return out;
}

void ObstacleSpec::validate() const {
  if (!motion) throw std::invalid_argument("obstacle: missing motion model");
  const int no = state_dim();
  if (motion->state_dim() != no) {
    throw DimensionError("obstacle: motion model and initial state disagree on dimension");
  }
  if (shape.rows() != no || shape.cols() != no) {
    throw DimensionError("obstacle: shape matrix must be " + std::to_string(no) + "x" +
                         std::to_string(no));
  }
  if (!(noise_var >= 0.0)) throw std::invalid_argument("obstacle: noise variance must be >= 0");
  if (!(radius > 0.0)) throw std::invalid_argument("obstacle: radius must be positive");
  if ((shape - shape.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + shape.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("obstacle: shape matrix must be symmetric");
  }
  Eigen::LLT<Mat> llt(shape);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("obstacle: shape matrix must be positive definite");
  }
}

ObstacleSpec spherical_obstacle(std::shared_ptr<const CircularObstacleMotion> motion, double radius,
                                double noise_var) {
  ObstacleSpec spec;
  spec.initial_state = motion->initial_state();
  spec.motion = std::move(motion);
  spec.radius = radius;
  spec.shape = Mat::Identity(3, 3) / (radius * radius);
  spec.noise_var = noise_var;
  spec.validate();
  return spec;
}

Vec robot_step(const RobotModel& model, const Vec& x, const Vec& u) { return model.step(x, u); }

Vec obstacle_step(const ObstacleSpec& spec, const Vec& o, const Vec& noise) {
  require_dim(o, spec.state_dim(), "obstacle state");
  require_dim(noise, spec.state_dim(), "obstacle noise");
  return spec.mean_motion(o) + noise;
}

std::vector<Vec> predict_obstacle_means(const ObstacleSpec& spec, const Vec& o, int steps) {
  if (steps < 1) throw std::invalid_argument("predict_obstacle_means: steps must be >= 1");
  require_dim(o, spec.state_dim(), "obstacle state");
  std::vector<Vec> means;
  means.reserve(steps);
  Vec current = o;
  for (int i = 0; i < steps; ++i) {
    current = spec.mean_motion(current);
    means.push_back(current);
  }
  return means;
}

std::vector<Vec> rollout(const RobotModel& model, const Vec& x0, const std::vector<Vec>& inputs) {
  require_dim(x0, model.state_dim(), "initial state");
  std::vector<Vec> states;
  states.reserve(inputs.size() + 1);
  states.push_back(x0);
  for (const Vec& u : inputs) states.push_back(model.step(states.back(), u));
  return states;
}

}  // namespace scbf
