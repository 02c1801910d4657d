#include "scbf/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <limits>
#include <locale>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace scbf {

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Vec sample_noise(std::mt19937_64& rng, double sigma2, int dim) {
  std::normal_distribution<double> nd(0.0, std::sqrt(sigma2));
  Vec w(dim);
  for (int i = 0; i < dim; ++i) w[i] = sigma2 > 0.0 ? nd(rng) : 0.0;
  return w;
}

double exact_cbc(const Vec& x_next, const Vec& o_next, double h_now, const ObstacleSpec& spec,
                 const BarrierConfig& cfg) {
  return barrier_value(x_next, o_next, spec, cfg) - (1.0 - cfg.gamma) * h_now;
}

}  // namespace

std::string to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::Nominal:
      return "nominal";
    case ControllerKind::DetMpcCbf:
      return "det-mpc-cbf";
    case ControllerKind::CcMpcCbf:
      return "cc-mpc-cbf";
    case ControllerKind::CcMpcDc:
      return "cc-mpc-dc";
    case ControllerKind::Sequential:
      return "sequential";
  }
  return "unknown";
}

ControllerKind parse_controller(const std::string& name) {
  for (ControllerKind k : {ControllerKind::Nominal, ControllerKind::DetMpcCbf, ControllerKind::CcMpcCbf,
                           ControllerKind::CcMpcDc, ControllerKind::Sequential}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown controller '" + name +
                              "' (expected nominal|det-mpc-cbf|cc-mpc-cbf|cc-mpc-dc|sequential)");
}

std::string to_string(ReferenceArg arg) {
  return arg == ReferenceArg::Seconds ? "seconds" : "step_index";
}

ReferenceArg parse_reference_arg(const std::string& name) {
  if (name == "seconds") return ReferenceArg::Seconds;
  if (name == "step_index") return ReferenceArg::StepIndex;
  throw std::invalid_argument("unknown reference_arg '" + name + "' (expected seconds|step_index)");
}

std::string to_string(NoiseChannel channel) {
  return channel == NoiseChannel::Position ? "position" : "velocity";
}

NoiseChannel parse_noise_channel(const std::string& name) {
  if (name == "position") return NoiseChannel::Position;
  if (name == "velocity") return NoiseChannel::Velocity;
  throw std::invalid_argument("unknown noise_channel '" + name + "' (expected position|velocity)");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::Sigma2:
      return "sigma2";
    case SweepAxis::Gamma:
      return "gamma";
    case SweepAxis::Horizon:
      return "horizon";
  }
  return "unknown";
}

SweepAxis parse_axis(const std::string& name) {
  if (name == "sigma2") return SweepAxis::Sigma2;
  if (name == "gamma") return SweepAxis::Gamma;
  if (name == "horizon") return SweepAxis::Horizon;
  throw std::invalid_argument("unknown axis '" + name + "' (expected sigma2|gamma|horizon)");
}

Eigen::Vector3d ReferenceSpec::position(int k, double dt) const {
  const double s = arg == ReferenceArg::Seconds ? k * dt : static_cast<double>(k);
  return {amplitude * std::sin(rate * s), amplitude * std::cos(rate * s), altitude};
}

Vec ReferenceSpec::state(int k, double dt) const {
  const Eigen::Vector3d p = position(k, dt);
  Vec x(6);
  x.head<3>() = p;
  x.tail<3>() = (position(k + 1, dt) - p) / dt;
  return x;
}

// Two orbits on either side of the reference circle, each crossing it twice,
// flown half a metre above the reference plane.
std::vector<ObstacleConfig> Scenario::default_obstacles() {
  ObstacleConfig first;
  first.center = {5.3, 0.0, 0.0};
  first.orbit_radius = 3.0;
  first.omega = 0.8;
  first.phase = 0.0;
  first.altitude = 2.5;
  ObstacleConfig second = first;
  second.center = {-5.3, 0.0, 0.0};
  second.omega = 0.4;
  second.phase = std::numbers::pi;
  return {first, second};
}

void Scenario::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument(what); };
  if (!(dt > 0.0)) fail("model.dt: dt > 0");
  if (!initial_position.allFinite()) fail("model.initial_position must be finite");
  if (!(reference.amplitude >= 0.0)) fail("reference.amplitude: amplitude >= 0");
  for (size_t j = 0; j < obstacles.size(); ++j) {
    const ObstacleConfig& o = obstacles[j];
    const std::string at = "obstacles[" + std::to_string(j) + "].";
    if (!(o.radius > 0.0)) fail(at + "radius: radius > 0");
    if (!(o.orbit_radius >= 0.0)) fail(at + "orbit_radius: orbit_radius >= 0");
    if (!(o.sigma2 >= 0.0)) fail(at + "sigma2: sigma2 >= 0");
    if (!o.center.allFinite() || !std::isfinite(o.omega) || !std::isfinite(o.phase) ||
        !std::isfinite(o.altitude)) {
      fail(at + "values must be finite");
    }
  }
  if (horizon < 1) fail("mpc.horizon: N >= 1");
  if (!(p_weight >= 0.0)) fail("mpc.p_weight: P positive semidefinite");
  if (!(q_weight >= 0.0)) fail("mpc.q_weight: Q positive semidefinite");
  if (!(r_weight > 0.0)) fail("mpc.r_weight: R positive definite");
  if (!(state_bound > 0.0)) fail("mpc.state_bound: bounds non-empty (state_bound > 0)");
  if (!(input_bound > 0.0)) fail("mpc.input_bound: bounds non-empty (input_bound > 0)");
  if (!(filter_eps > 0.0)) fail("mpc.filter_eps: eps > 0");
  if (filter_j_max < 1) fail("mpc.filter_j_max: j_max >= 1");
  if (!(gamma > 0.0 && gamma <= 1.0)) fail("barrier.gamma: 0 < gamma <= 1");
  if (!(delta > 0.0 && delta < 1.0)) fail("barrier.delta: 0 < delta < 1");
  if (!(zeta >= 0.0)) fail("barrier.zeta: zeta >= 0");
  if (k_max < 1) fail("run.k_max: k_max >= 1");
  if (trials < 1) fail("run.trials: trials >= 1");
}

void Scenario::set_noise_var(double sigma2) {
  for (ObstacleConfig& o : obstacles) o.sigma2 = sigma2;
}

std::shared_ptr<RobotModel> Scenario::make_model() const {
  return std::make_shared<DoubleIntegrator>(dt, velocity_persistence, 3);
}

MpcConfig Scenario::make_mpc_config() const {
  MpcConfig cfg;
  cfg.horizon = horizon;
  cfg.P = p_weight * Mat::Identity(6, 6);
  cfg.Q = q_weight * Mat::Identity(6, 6);
  cfg.R = r_weight * Mat::Identity(3, 3);
  cfg.state_lower = Vec::Constant(6, -state_bound);
  cfg.state_upper = Vec::Constant(6, state_bound);
  cfg.input_lower = Vec::Constant(3, -input_bound);
  cfg.input_upper = Vec::Constant(3, input_bound);
  const ReferenceSpec ref = reference;
  const double step = dt;
  cfg.reference = [ref, step](int k) { return ref.state(k, step); };
  // The one-shot SCP stops on the filter's plan-change tolerance.
  cfg.scp.step_tol = filter_eps;
  cfg.scp.merit_tol = 1e-9;
  cfg.scp.anderson_depth = 3;
  return cfg;
}

BarrierConfig Scenario::make_barrier_config() const {
  return scbf::make_barrier_config(gamma, delta, zeta, 6, 3);
}

FilterSettings Scenario::make_filter_settings() const {
  FilterSettings fs;
  fs.eps = filter_eps;
  fs.j_max = filter_j_max;
  return fs;
}

std::vector<ObstacleSpec> Scenario::make_obstacles() const {
  std::vector<ObstacleSpec> specs;
  for (const ObstacleConfig& o : obstacles) {
    auto motion = std::make_shared<CircularObstacleMotion>(o.center, o.orbit_radius, o.omega, o.phase,
                                                           o.altitude, dt);
    specs.push_back(spherical_obstacle(motion, o.radius, o.sigma2));
  }
  return specs;
}

Vec Scenario::initial_state() const {
  Vec x = Vec::Zero(6);
  x.head<3>() = initial_position;
  return x;
}

const TableRow* ExperimentTable::find(double parameter, const std::string& controller) const {
  for (const TableRow& r : rows) {
    if (r.parameter == parameter && r.controller == controller) return &r;
  }
  return nullptr;
}

std::uint64_t trial_seed(std::uint64_t base, int trial) {
  return base + static_cast<std::uint64_t>(trial);
}

std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(splitmix64(seed)); }

ControlDecision decide(const Scenario& scenario, const RobotModel& model, const MpcConfig& mpc,
                       const BarrierConfig& barrier, const FilterSettings& filter, const Vec& x,
                       int k, const std::vector<TrackedObstacle>& obstacles,
                       const std::optional<std::vector<Vec>>& warm_start) {
  switch (scenario.controller) {
    case ControllerKind::Nominal:
      return nominal_mpc(x, k, mpc, model, warm_start);
    case ControllerKind::DetMpcCbf:
      return det_mpc_cbf(x, k, obstacles, mpc, barrier, model, warm_start);
    case ControllerKind::CcMpcCbf:
      return cc_mpc_cbf(x, k, obstacles, mpc, barrier, model, warm_start);
    case ControllerKind::CcMpcDc:
      return cc_mpc_dc(x, k, obstacles, mpc, barrier, model, warm_start);
    case ControllerKind::Sequential:
      return sequential_step(x, k, obstacles, mpc, barrier, model, filter, warm_start);
  }
  throw std::logic_error("unhandled controller kind");
}

TrajectoryLog run_closed_loop(const Scenario& scenario) {
  scenario.validate();
  const auto start = Clock::now();
  const auto model = scenario.make_model();
  const MpcConfig mpc = scenario.make_mpc_config();
  mpc.validate(*model);
  const BarrierConfig barrier = scenario.make_barrier_config();
  const FilterSettings filter = scenario.make_filter_settings();

  std::vector<TrackedObstacle> obstacles;
  for (ObstacleSpec& spec : scenario.make_obstacles()) {
    Vec o = spec.initial_state;
    obstacles.push_back({std::move(spec), std::move(o)});
  }

  TrajectoryLog log;
  log.seed = scenario.seed;
  auto rng = make_rng(scenario.seed);
  Vec x = scenario.initial_state();
  std::optional<std::vector<Vec>> warm;
  const double noise_gain = scenario.noise_channel == NoiseChannel::Velocity ? scenario.dt : 1.0;

  for (int k = 0; k < scenario.k_max; ++k) {
    LogStep row;
    row.k = k;
    row.x = x;
    for (const TrackedObstacle& ob : obstacles) {
      row.obstacles.push_back(ob.state);
      row.h.push_back(barrier_value(x, ob.state, ob.spec, barrier));
      if (row.h.back() < 0.0) log.collided = true;
    }

    ControlDecision dec;
    try {
      dec = decide(scenario, *model, mpc, barrier, filter, x, k, obstacles, warm);
    } catch (const std::exception& e) {
      dec.status = DecisionStatus::Infeasible;
      dec.diagnostic = e.what();
    }
    row.status = dec.status;
    row.solve_ms = 1000.0 * dec.solve_time;
    row.margin_min = dec.min_margin();
    row.u = dec.applied_input.size() == model->input_dim() ? dec.applied_input
                                                            : Vec::Constant(model->input_dim(), std::nan(""));
    log.steps.push_back(row);

    if (!dec.feasible()) {
      log.first_infeasible_k = k;
      break;
    }
    x = model->step(x, dec.applied_input);
    warm = shift_plan(dec.planned_inputs);
    for (TrackedObstacle& ob : obstacles) {
      ob.state = obstacle_step(ob.spec, ob.state,
                               noise_gain * sample_noise(rng, ob.spec.noise_var, ob.spec.state_dim()));
    }
  }
  log.wall_time = std::chrono::duration<double>(Clock::now() - start).count();
  return log;
}

int worker_count() {
  if (const char* env = std::getenv("SCBF_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<int>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int count, const std::function<void(int)>& fn) {
  const int workers = std::min(worker_count(), count);
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<TrajectoryLog> run_trials(const Scenario& scenario, int trials) {
  std::vector<TrajectoryLog> logs(trials);
  parallel_for(trials, [&](int i) {
    Scenario s = scenario;
    s.seed = trial_seed(scenario.seed, i);
    logs[i] = run_closed_loop(s);
  });
  return logs;
}

TableRow summarize(double parameter, const std::string& controller,
                   const std::vector<TrajectoryLog>& logs) {
  TableRow row;
  row.parameter = parameter;
  row.controller = controller;
  row.trials = static_cast<int>(logs.size());
  int success = 0, feasible = 0, infeasible = 0;
  double k_sum = 0.0, wall = 0.0;
  for (const TrajectoryLog& log : logs) {
    success += log.success();
    feasible += log.feasible();
    if (log.first_infeasible_k) {
      ++infeasible;
      k_sum += *log.first_infeasible_k;
    }
    wall += log.wall_time;
  }
  const double n = std::max<std::size_t>(1, logs.size());
  row.success_pct = 100.0 * success / n;
  row.feasible_pct = 100.0 * feasible / n;
  row.mean_infeasible_k = infeasible > 0 ? k_sum / infeasible : std::numeric_limits<double>::quiet_NaN();
  row.mean_wall_s = wall / n;
  return row;
}

ExperimentTable success_rate_experiment(const Scenario& base, const std::vector<double>& sigma2_list,
                                        const std::vector<ControllerKind>& controllers, int trials) {
  if (trials < 1) throw std::invalid_argument("success_rate_experiment: trials >= 1");
  ExperimentTable table;
  table.axis = "sigma2";
  for (double s2 : sigma2_list) {
    for (ControllerKind kind : controllers) {
      Scenario s = base;
      s.set_noise_var(s2);
      s.controller = kind;
      table.rows.push_back(summarize(s2, to_string(kind), run_trials(s, trials)));
    }
  }
  return table;
}

ExperimentTable feasibility_experiment(const Scenario& base, SweepAxis axis,
                                       const std::vector<double>& values, int trials,
                                       std::optional<std::vector<ControllerKind>> controllers) {
  if (trials < 1) throw std::invalid_argument("feasibility_experiment: trials >= 1");
  if (!controllers) {
    controllers = axis == SweepAxis::Sigma2
                      ? std::vector<ControllerKind>{ControllerKind::CcMpcCbf, ControllerKind::Sequential}
                      : std::vector<ControllerKind>{ControllerKind::CcMpcCbf};
  }
  ExperimentTable table;
  table.axis = to_string(axis);
  for (double v : values) {
    for (ControllerKind kind : *controllers) {
      Scenario s = base;
      s.controller = kind;
      switch (axis) {
        case SweepAxis::Sigma2:
          s.set_noise_var(v);
          break;
        case SweepAxis::Gamma:
          s.gamma = v;
          break;
        case SweepAxis::Horizon:
          s.horizon = static_cast<int>(std::lround(v));
          break;
      }
      table.rows.push_back(summarize(v, to_string(kind), run_trials(s, trials)));
    }
  }
  return table;
}

double empirical_chance(const Vec& x, const Vec& o, const Vec& u, const RobotModel& model,
                        const ObstacleSpec& spec, const BarrierConfig& cfg, int samples,
                        std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("empirical_chance: samples >= 1");
  auto rng = make_rng(seed);
  const Vec x_next = model.step(x, u);
  const Vec mean = spec.mean_motion(o);
  const double h_now = barrier_value(x, o, spec, cfg);
  long hits = 0;
  for (int i = 0; i < samples; ++i) {
    const Vec o_next = mean + sample_noise(rng, spec.noise_var, spec.state_dim());
    hits += exact_cbc(x_next, o_next, h_now, spec, cfg) >= cfg.zeta;
  }
  return static_cast<double>(hits) / samples;
}

MomentReport validate_moments(const Vec& x, const Vec& o, const Vec& u, const RobotModel& model,
                              const ObstacleSpec& spec, const BarrierConfig& cfg, int samples,
                              std::uint64_t seed) {
  if (samples < 2) throw std::invalid_argument("validate_moments: samples >= 2");
  const CbcMoments mom = cbc_moments(x, o, model, spec, cfg);
  MomentReport rep;
  rep.closed_mean = mom.mean_at(u);
  rep.closed_var = mom.var_at(u);

  auto rng = make_rng(seed);
  const Vec x_next = model.step(x, u);
  const Vec mean = spec.mean_motion(o);
  const double h_now = barrier_value(x, o, spec, cfg);
  std::vector<double> vals(samples);
  double sum = 0.0;
  for (int i = 0; i < samples; ++i) {
    vals[i] = exact_cbc(x_next, mean + sample_noise(rng, spec.noise_var, spec.state_dim()), h_now, spec, cfg);
    sum += vals[i];
  }
  const double mu = sum / samples;
  double m2 = 0.0, m4 = 0.0;
  for (double v : vals) {
    const double d2 = (v - mu) * (v - mu);
    m2 += d2;
    m4 += d2 * d2;
  }
  rep.empirical_mean = mu;
  rep.empirical_var = m2 / (samples - 1);
  m4 /= samples;
  rep.se_mean = std::sqrt(rep.empirical_var / samples);
  rep.se_var = std::sqrt(std::max(0.0, m4 - rep.empirical_var * rep.empirical_var) / samples);
  // A zero standard error only admits floating-point disagreement.
  const double tiny = 1e-12 * (1.0 + std::abs(rep.closed_mean) + rep.closed_var);
  rep.pass = std::abs(rep.empirical_mean - rep.closed_mean) <= 3.0 * rep.se_mean + tiny &&
             std::abs(rep.empirical_var - rep.closed_var) <= 3.0 * rep.se_var + tiny;
  return rep;
}

OracleInstance random_oracle_instance(std::mt19937_64& rng, double sigma2) {
  std::normal_distribution<double> nd;
  OracleInstance in;
  in.x = Vec(6);
  for (int i = 0; i < 6; ++i) in.x[i] = 1.5 * nd(rng);
  in.o = Vec(3);
  for (int i = 0; i < 3; ++i) in.o[i] = 1.5 * nd(rng);
  in.u = Vec(3);
  for (int i = 0; i < 3; ++i) in.u[i] = 2.0 * nd(rng);
  Mat M(3, 3);
  for (int i = 0; i < 9; ++i) M.data()[i] = nd(rng);
  in.spec.motion = std::make_shared<CircularObstacleMotion>(Eigen::Vector3d::Zero(), 2.0, 0.8, 0.0, 2.0, 0.1);
  in.spec.shape = 0.3 * M * M.transpose() + 0.2 * Mat::Identity(3, 3);
  in.spec.noise_var = sigma2;
  in.spec.initial_state = in.o;
  in.spec.validate();
  return in;
}

OracleInstance tuned_chance_instance(double sigma2, const BarrierConfig& cfg) {
  const DoubleIntegrator model(0.1);
  auto motion = std::make_shared<CircularObstacleMotion>(Eigen::Vector3d::Zero(), 0.0, 0.0, 0.0, 0.0, 0.1);
  OracleInstance in;
  in.spec = spherical_obstacle(motion, 0.8, sigma2);
  in.o = in.spec.initial_state;
  in.u = Vec::Zero(3);
  auto margin_at = [&](double speed) {
    in.x = Vec::Zero(6);
    in.x[0] = 4.0;
    in.x[3] = -speed;
    return chance_margin(cbc_moments(in.x, in.o, model, in.spec, cfg), in.u, cfg);
  };
  double lo = 0.0, hi = 40.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    (margin_at(mid) >= 0.0 ? lo : hi) = mid;
  }
  margin_at(lo);
  return in;
}

bool ValidationReport::pass() const {
  return tuned_pass && std::all_of(moments.begin(), moments.end(), [](const MomentReport& r) { return r.pass; });
}

ValidationReport run_validation(int instances, double sigma2, int samples, std::uint64_t seed) {
  const DoubleIntegrator model(0.1);
  const BarrierConfig cfg = scbf::make_barrier_config(0.5, 0.97, 0.0, 6, 3);
  auto rng = make_rng(seed);
  std::vector<OracleInstance> cases;
  for (int i = 0; i < instances; ++i) cases.push_back(random_oracle_instance(rng, sigma2));
  ValidationReport rep;
  rep.moments.resize(instances);
  parallel_for(instances, [&](int i) {
    const OracleInstance& in = cases[i];
    rep.moments[i] = validate_moments(in.x, in.o, in.u, model, in.spec, cfg, samples, trial_seed(seed, i + 1));
  });
  const OracleInstance tuned = tuned_chance_instance(sigma2, cfg);
  rep.tuned_probability =
      empirical_chance(tuned.x, tuned.o, tuned.u, model, tuned.spec, cfg, samples, trial_seed(seed, instances + 1));
  rep.tuned_pass = rep.tuned_probability >= 0.94 && rep.tuned_probability <= 0.995;
  return rep;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(17) << v;
  return os.str();
}

void write_trajectory_csv(std::ostream& out, const TrajectoryLog& log) {
  const int n = log.steps.empty() ? 6 : static_cast<int>(log.steps.front().x.size());
  const int m = log.steps.empty() ? 3 : static_cast<int>(log.steps.front().u.size());
  const int nobs = log.steps.empty() ? 2 : static_cast<int>(log.steps.front().h.size());
  out << "k";
  for (int i = 0; i < n; ++i) out << ",x" << i;
  for (int i = 0; i < m; ++i) out << ",u" << i;
  for (int j = 0; j < nobs; ++j) out << ",h_obs" << (j + 1);
  out << ",margin_min,status,solve_ms\n";
  for (const LogStep& s : log.steps) {
    out << s.k;
    for (int i = 0; i < n; ++i) out << ',' << format_number(s.x[i]);
    for (int i = 0; i < m; ++i) out << ',' << format_number(s.u[i]);
    for (double h : s.h) out << ',' << format_number(h);
    out << ',' << format_number(s.margin_min) << ',' << to_string(s.status) << ','
        << format_number(s.solve_ms) << '\n';
  }
}

void write_table_csv(std::ostream& out, const ExperimentTable& table) {
  out << "parameter,controller,trials,success_pct,feasible_pct,mean_infeasible_k,mean_wall_s\n";
  for (const TableRow& r : table.rows) {
    out << format_number(r.parameter) << ',' << r.controller << ',' << r.trials << ','
        << format_number(r.success_pct) << ',' << format_number(r.feasible_pct) << ','
        << format_number(r.mean_infeasible_k) << ',' << format_number(r.mean_wall_s) << '\n';
  }
}

}  // namespace scbf
