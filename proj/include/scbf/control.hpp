#pragma once

// Receding-horizon controllers: nominal tracking MPC, deterministic and
// chance-constrained MPC-CBF, the distance-constrained variant, and the
// sequential pipeline (nominal MPC followed by a predictive safety filter).
//
// All horizon constraints are written over the stacked input sequence
// U = [u_0; ...; u_{N-1}] through the rollout sensitivities, so a step's
// barrier condition couples every input that reaches it.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "scbf/barrier.hpp"
#include "scbf/models.hpp"
#include "scbf/solve/scp.hpp"

namespace scbf {

struct MpcConfig {
  int horizon = 15;
  Mat P;  // terminal weight
  Mat Q;  // stage weight
  Mat R;  // input weight
  Vec state_lower;
  Vec state_upper;
  Vec input_lower;
  Vec input_upper;
  // Terminal box; empty means the state box.
  Vec terminal_lower;
  Vec terminal_upper;
  /// Reference state at absolute time step k.
  std::function<Vec(int)> reference;

  ScpSettings scp;
  int max_outer = 30;
  double trust_radius = 1.0;

  /// Throws std::invalid_argument when an invariant fails.
  void validate(const RobotModel& model) const;
};

enum class DecisionStatus { Feasible, Infeasible };

std::string to_string(DecisionStatus status);

struct Margin {
  int step = 0;      // horizon index i of CBC_{k+i|k}
  int obstacle = 0;
  double value = 0.0;
};

struct ControlDecision {
  Vec applied_input;
  std::vector<Vec> planned_inputs;
  std::vector<Vec> predicted_states;
  DecisionStatus status = DecisionStatus::Infeasible;
  std::vector<Margin> margins;
  double solve_time = 0.0;  // seconds
  int inner_iterations = 0;
  int outer_iterations = 0;
  double objective = 0.0;
  std::string stage;        // which controller produced the decision
  std::string diagnostic;   // reason for an Infeasible status
  int infeasible_iteration = -1;
  /// Filter only: sum_i ||x^{j+1}_i - x^j_i|| after each iteration j.
  std::vector<double> state_changes;
  bool stop_criterion_met = false;

  bool feasible() const { return status == DecisionStatus::Feasible; }
  /// Smallest reported margin (+inf without margins).
  double min_margin() const;
};

/// Filter tolerances: stop once sum_i ||x^{j+1}_i - x^j_i|| <= eps or j = j_max.
struct FilterSettings {
  double eps = 1e-4;
  int j_max = 20;
  SlackSettings slack;
  ConicSettings conic;
  int infeasible_streak = 5;
  /// Anderson mixing depth for the linearization point; 0 gives the plain
  /// iteration.
  int anderson_depth = 3;
};

/// Horizon index set whose barrier conditions depend on the inputs, with the
/// true chance margins of each (step, obstacle) pair for the plan `inputs`.
std::vector<Margin> plan_margins(const RobotModel& model, const Vec& x_k,
                                 const std::vector<Vec>& inputs,
                                 const std::vector<TrackedObstacle>& obstacles,
                                 const BarrierConfig& barrier_cfg);

/// Drops the first input and repeats the last one.
std::vector<Vec> shift_plan(const std::vector<Vec>& inputs);

ControlDecision nominal_mpc(const Vec& x_k, int k, const MpcConfig& cfg, const RobotModel& model,
                            const std::optional<std::vector<Vec>>& warm_start = std::nullopt);

ControlDecision cc_mpc_cbf(const Vec& x_k, int k, const std::vector<TrackedObstacle>& obstacles,
                           const MpcConfig& cfg, const BarrierConfig& barrier_cfg,
                           const RobotModel& model,
                           const std::optional<std::vector<Vec>>& warm_start = std::nullopt);

/// cc_mpc_cbf with every obstacle's noise variance set to zero.
ControlDecision det_mpc_cbf(const Vec& x_k, int k, const std::vector<TrackedObstacle>& obstacles,
                            const MpcConfig& cfg, const BarrierConfig& barrier_cfg,
                            const RobotModel& model,
                            const std::optional<std::vector<Vec>>& warm_start = std::nullopt);

/// cc_mpc_cbf with gamma = 1.
ControlDecision cc_mpc_dc(const Vec& x_k, int k, const std::vector<TrackedObstacle>& obstacles,
                          const MpcConfig& cfg, const BarrierConfig& barrier_cfg,
                          const RobotModel& model,
                          const std::optional<std::vector<Vec>>& warm_start = std::nullopt);

/// Predictive safety filter solved by iterative convex optimization. The
/// iteration starts from `warm_start` when given, otherwise from the nominal
/// inputs.
ControlDecision safety_filter(const ControlDecision& nominal, const Vec& x_k, int k,
                              const std::vector<TrackedObstacle>& obstacles, const MpcConfig& cfg,
                              const BarrierConfig& barrier_cfg, const RobotModel& model,
                              const FilterSettings& settings = {},
                              const std::optional<std::vector<Vec>>& warm_start = std::nullopt);

/// nominal_mpc followed by safety_filter. `warm_start` seeds the filter
/// (typically shift_plan of the previous filtered plan).
ControlDecision sequential_step(const Vec& x_k, int k, const std::vector<TrackedObstacle>& obstacles,
                                const MpcConfig& cfg, const BarrierConfig& barrier_cfg,
                                const RobotModel& model, const FilterSettings& settings = {},
                                const std::optional<std::vector<Vec>>& warm_start = std::nullopt);

}  // namespace scbf
