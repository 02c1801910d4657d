#pragma once

// Robot and obstacle dynamics shared by every controller.
//
// Robot:     x_{k+1} = f(x_k) + g(x_k) u_k
// Obstacle:  o_{k+1} = xi(o_k) + w_k,   w_k ~ N(0, sigma^2 I)

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace scbf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Throws DimensionError when `v` does not have `expected` entries.
void require_dim(const Vec& v, Eigen::Index expected, const char* what);

/// Discrete-time control-affine robot model.
///
/// `step` is not virtual: it is always drift(x) + input_matrix(x) * u, so
/// control-affinity is a property of the type rather than of each subclass.
class RobotModel {
 public:
  virtual ~RobotModel() = default;

  virtual int state_dim() const = 0;
  virtual int input_dim() const = 0;
  virtual double dt() const = 0;

  virtual Vec drift(const Vec& x) const = 0;
  virtual Mat input_matrix(const Vec& x) const = 0;

  /// d step / d x at (x, u). Central differences unless overridden.
  virtual Mat state_jacobian(const Vec& x, const Vec& u) const;

  Vec step(const Vec& x, const Vec& u) const;
};

/// Double integrator with `dims` positions followed by `dims` velocities.
///
///   A = [[I, dt I], [0, V]],  B = [[0], [I]]
///
/// V = 0 by default (velocity is reset to the input each step); with
/// `velocity_persistence` V = I.
class DoubleIntegrator final : public RobotModel {
 public:
  explicit DoubleIntegrator(double dt, bool velocity_persistence = false, int dims = 3);

  int state_dim() const override { return 2 * dims_; }
  int input_dim() const override { return dims_; }
  double dt() const override { return dt_; }
  bool velocity_persistence() const { return velocity_persistence_; }

  Vec drift(const Vec& x) const override;
  Mat input_matrix(const Vec& x) const override;
  Mat state_jacobian(const Vec& x, const Vec& u) const override;

  const Mat& A() const { return A_; }
  const Mat& B() const { return B_; }

 private:
  double dt_;
  bool velocity_persistence_;
  int dims_;
  Mat A_;
  Mat B_;
};

/// Noise-free obstacle transition xi.
class ObstacleMotion {
 public:
  virtual ~ObstacleMotion() = default;
  virtual int state_dim() const = 0;
  virtual Vec mean_motion(const Vec& o) const = 0;
};

/// Obstacle travelling on a horizontal circle.
///
/// The orbit is centred at center + (0, 0, altitude) and advances by
/// angular_velocity * dt per step (counter-clockwise for positive rates).
/// xi maps any position to the track point one step ahead of its own
/// bearing, so off-track perturbations do not accumulate.
class CircularObstacleMotion final : public ObstacleMotion {
 public:
  CircularObstacleMotion(Eigen::Vector3d center, double orbit_radius, double angular_velocity,
                         double phase, double altitude, double dt);

  int state_dim() const override { return 3; }
  Vec mean_motion(const Vec& o) const override;

  /// Track point at the configured phase.
  Vec initial_state() const;
  /// Track point at time step k when starting from the configured phase.
  Vec track_point(double k) const;

  const Eigen::Vector3d& center() const { return center_; }
  Eigen::Vector3d orbit_center() const { return center_ + Eigen::Vector3d(0.0, 0.0, altitude_); }
  double orbit_radius() const { return orbit_radius_; }
  double angular_velocity() const { return angular_velocity_; }
  double phase() const { return phase_; }
  double altitude() const { return altitude_; }
  double dt() const { return dt_; }

 private:
  Eigen::Vector3d center_;
  double orbit_radius_;
  double angular_velocity_;
  double phase_;
  double altitude_;
  double dt_;
};

struct ObstacleSpec {
  std::shared_ptr<const ObstacleMotion> motion;
  double radius = 1.0;
  Mat shape;               // W, symmetric positive definite
  double noise_var = 0.0;  // sigma^2
  Vec initial_state;

  int state_dim() const { return static_cast<int>(initial_state.size()); }
  Vec mean_motion(const Vec& o) const { return motion->mean_motion(o); }

  /// Checks dimensions, sigma^2 >= 0 and that W is symmetric positive definite.
  void validate() const;
};

/// Sphere of the given radius: W = I / r^2, so h = 0 at Euclidean distance r.
ObstacleSpec spherical_obstacle(std::shared_ptr<const CircularObstacleMotion> motion, double radius,
                                double noise_var);

/// An obstacle together with its most recent (sampled) state.
struct TrackedObstacle {
  ObstacleSpec spec;
  Vec state;
};

Vec robot_step(const RobotModel& model, const Vec& x, const Vec& u);

/// xi(o) + noise. The caller owns the random draw.
Vec obstacle_step(const ObstacleSpec& spec, const Vec& o, const Vec& noise);

/// Element i is xi applied i + 1 times to o.
std::vector<Vec> predict_obstacle_means(const ObstacleSpec& spec, const Vec& o, int steps);

/// States x_0 .. x_N for inputs u_0 .. u_{N-1}; element 0 is x0.
std::vector<Vec> rollout(const RobotModel& model, const Vec& x0, const std::vector<Vec>& inputs);

}  // namespace scbf
