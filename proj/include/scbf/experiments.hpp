#pragma once

// Scenario description, closed-loop simulation, Monte Carlo oracles and the
// batch experiments behind the success-rate and feasibility tables.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "scbf/barrier.hpp"
#include "scbf/control.hpp"
#include "scbf/models.hpp"

namespace scbf {

enum class ControllerKind { Nominal, DetMpcCbf, CcMpcCbf, CcMpcDc, Sequential };

std::string to_string(ControllerKind kind);
/// Accepts nominal, det-mpc-cbf, cc-mpc-cbf, cc-mpc-dc, sequential.
ControllerKind parse_controller(const std::string& name);

enum class ReferenceArg { Seconds, StepIndex };

/// Where the simulated obstacle noise enters: directly on the position, or on
/// the velocity, which moves the position by dt * omega per step.
enum class NoiseChannel { Position, Velocity };

std::string to_string(NoiseChannel channel);
NoiseChannel parse_noise_channel(const std::string& name);

std::string to_string(ReferenceArg arg);
ReferenceArg parse_reference_arg(const std::string& name);

/// r_d = [a sin(w s), a cos(w s), altitude] with s = k dt (Seconds) or s = k (StepIndex).
struct ReferenceSpec {
  double amplitude = 2.0;
  double rate = 0.4;
  double altitude = 2.0;
  ReferenceArg arg = ReferenceArg::Seconds;

  Eigen::Vector3d position(int k, double dt) const;
  /// Position followed by the forward-difference velocity.
  Vec state(int k, double dt) const;

  bool operator==(const ReferenceSpec&) const = default;
};

struct ObstacleConfig {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double orbit_radius = 2.0;
  double omega = 0.8;
  double phase = 0.0;
  double altitude = 2.0;
  double radius = 0.8;
  double sigma2 = 0.1;

  bool operator==(const ObstacleConfig&) const = default;
};

struct Scenario {
  // model
  double dt = 0.1;
  bool velocity_persistence = false;
  NoiseChannel noise_channel = NoiseChannel::Velocity;
  Eigen::Vector3d initial_position{0.0, 0.0, 2.0};
  // reference
  ReferenceSpec reference;
  // obstacles
  std::vector<ObstacleConfig> obstacles = default_obstacles();
  // mpc
  int horizon = 15;
  double p_weight = 1000.0;
  double q_weight = 1000.0;
  double r_weight = 1.0;
  double state_bound = 5.0;
  double input_bound = 4.0;
  double filter_eps = 1e-4;
  int filter_j_max = 20;
  // barrier
  double gamma = 0.5;
  double delta = 0.97;
  double zeta = 0.0;
  // run
  int k_max = 200;
  std::uint64_t seed = 0;
  int trials = 20;
  ControllerKind controller = ControllerKind::Sequential;

  static std::vector<ObstacleConfig> default_obstacles();

  /// Throws std::invalid_argument naming the violated invariant.
  void validate() const;
  void set_noise_var(double sigma2);

  std::shared_ptr<RobotModel> make_model() const;
  MpcConfig make_mpc_config() const;
  BarrierConfig make_barrier_config() const;
  FilterSettings make_filter_settings() const;
  std::vector<ObstacleSpec> make_obstacles() const;
  Vec initial_state() const;

  bool operator==(const Scenario&) const = default;
};

struct LogStep {
  int k = 0;
  Vec x;
  Vec u;
  std::vector<Vec> obstacles;
  std::vector<double> h;
  double margin_min = 0.0;
  DecisionStatus status = DecisionStatus::Feasible;
  double solve_ms = 0.0;
};

struct TrajectoryLog {
  std::vector<LogStep> steps;
  bool collided = false;
  std::optional<int> first_infeasible_k;
  double wall_time = 0.0;
  std::uint64_t seed = 0;

  bool feasible() const { return !first_infeasible_k.has_value(); }
  bool success() const { return feasible() && !collided; }
};

struct TableRow {
  double parameter = 0.0;
  std::string controller;
  int trials = 0;
  double success_pct = 0.0;
  double feasible_pct = 0.0;
  double mean_infeasible_k = 0.0;  // NaN when every trial stayed feasible
  double mean_wall_s = 0.0;
};

struct ExperimentTable {
  std::string axis;
  std::vector<TableRow> rows;

  const TableRow* find(double parameter, const std::string& controller) const;
};

enum class SweepAxis { Sigma2, Gamma, Horizon };

std::string to_string(SweepAxis axis);
SweepAxis parse_axis(const std::string& name);

/// Seed of trial i in a batch.
std::uint64_t trial_seed(std::uint64_t base, int trial);

/// Engine for one trial. Streams for distinct seeds are independent.
std::mt19937_64 make_rng(std::uint64_t seed);

/// One controller call with the scenario's controller kind.
ControlDecision decide(const Scenario& scenario, const RobotModel& model, const MpcConfig& mpc,
                       const BarrierConfig& barrier, const FilterSettings& filter, const Vec& x,
                       int k, const std::vector<TrackedObstacle>& obstacles,
                       const std::optional<std::vector<Vec>>& warm_start);

TrajectoryLog run_closed_loop(const Scenario& scenario);

/// Runs `trials` closed loops with seeds trial_seed(scenario.seed, i) on the
/// worker pool; results are ordered by trial index.
std::vector<TrajectoryLog> run_trials(const Scenario& scenario, int trials);

TableRow summarize(double parameter, const std::string& controller,
                   const std::vector<TrajectoryLog>& logs);

ExperimentTable success_rate_experiment(const Scenario& base, const std::vector<double>& sigma2_list,
                                        const std::vector<ControllerKind>& controllers, int trials);

/// Sigma2 sweeps default to one-shot and sequential controllers, the other
/// axes to one-shot only.
ExperimentTable feasibility_experiment(const Scenario& base, SweepAxis axis,
                                       const std::vector<double>& values, int trials,
                                       std::optional<std::vector<ControllerKind>> controllers = {});

/// Fraction of sampled obstacle noises for which the exact CBC is >= zeta.
double empirical_chance(const Vec& x, const Vec& o, const Vec& u, const RobotModel& model,
                        const ObstacleSpec& spec, const BarrierConfig& cfg, int samples,
                        std::uint64_t seed);

struct MomentReport {
  double closed_mean = 0.0;
  double closed_var = 0.0;
  double empirical_mean = 0.0;
  double empirical_var = 0.0;
  double se_mean = 0.0;
  double se_var = 0.0;
  bool pass = false;
};

MomentReport validate_moments(const Vec& x, const Vec& o, const Vec& u, const RobotModel& model,
                              const ObstacleSpec& spec, const BarrierConfig& cfg, int samples,
                              std::uint64_t seed);

/// A random (x, o, u) with a double-integrator robot, a random ellipsoid shape
/// and noise variance sigma2.
struct OracleInstance {
  Vec x;
  Vec o;
  Vec u;
  ObstacleSpec spec;
};

OracleInstance random_oracle_instance(std::mt19937_64& rng, double sigma2);

/// Static sphere of radius 0.8 approached head-on, with the approach speed set
/// by bisection so that chance_margin is zero to within 1e-9.
OracleInstance tuned_chance_instance(double sigma2, const BarrierConfig& cfg);

struct ValidationReport {
  std::vector<MomentReport> moments;
  double tuned_probability = 0.0;
  bool tuned_pass = false;

  bool pass() const;
};

/// Moment checks on `instances` random instances at sigma2, plus the empirical
/// probability of the tuned instance, which must land in [0.94, 0.995].
ValidationReport run_validation(int instances, double sigma2, int samples, std::uint64_t seed);

/// Worker count: SCBF_THREADS when set and positive, else the hardware count.
int worker_count();

/// Calls fn(i) for i in [0, count) on up to worker_count() threads.
void parallel_for(int count, const std::function<void(int)>& fn);

/// Formats with 17 significant digits in the classic locale.
std::string format_number(double v);

void write_trajectory_csv(std::ostream& out, const TrajectoryLog& log);
void write_table_csv(std::ostream& out, const ExperimentTable& table);

}  // namespace scbf
