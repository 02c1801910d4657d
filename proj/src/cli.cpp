#include "scbf/cli.hpp"

#include <yaml-cpp/yaml.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <locale>
#include <optional>
#include <sstream>

namespace scbf {

namespace {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Scenario files

void reject_unknown(const YAML::Node& node, const std::string& section,
                    std::initializer_list<const char*> allowed) {
  if (!node.IsMap()) throw ConfigError(section + ": expected a mapping");
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError("unknown key '" + section + "." + key + "'");
    }
  }
}

template <class T>
void read(const YAML::Node& node, const std::string& section, const char* key, const char* type, T& dest) {
  const YAML::Node v = node[key];
  if (!v) return;
  try {
    if (!v.IsScalar()) throw YAML::Exception(YAML::Mark::null_mark(), "not a scalar");
    dest = v.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(section + "." + key + ": expected " + type);
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(dest)) throw ConfigError(section + "." + key + ": expected a finite number");
  }
}

void read_vec3(const YAML::Node& node, const std::string& section, const char* key, Eigen::Vector3d& dest) {
  const YAML::Node v = node[key];
  if (!v) return;
  const std::string what = section + "." + key + ": expected a list of 3 numbers";
  if (!v.IsSequence() || v.size() != 3) throw ConfigError(what);
  try {
    for (int i = 0; i < 3; ++i) dest[i] = v[i].as<double>();
  } catch (const YAML::Exception&) {
    throw ConfigError(what);
  }
}

template <class E>
void read_enum(const YAML::Node& node, const std::string& section, const char* key, E& dest,
               E (*parse)(const std::string&)) {
  std::string name;
  read(node, section, key, "a string", name);
  if (name.empty()) return;
  try {
    dest = parse(name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(section + "." + key + ": " + e.what());
  }
}

ObstacleConfig parse_obstacle(const YAML::Node& node, const std::string& section) {
  reject_unknown(node, section,
                 {"center", "orbit_radius", "omega", "phase", "altitude", "radius", "sigma2"});
  ObstacleConfig o;
  read_vec3(node, section, "center", o.center);
  read(node, section, "orbit_radius", "a number", o.orbit_radius);
  read(node, section, "omega", "a number", o.omega);
  read(node, section, "phase", "a number", o.phase);
  read(node, section, "altitude", "a number", o.altitude);
  read(node, section, "radius", "a number", o.radius);
  read(node, section, "sigma2", "a number", o.sigma2);
  return o;
}

std::string vec3(const Eigen::Vector3d& v) {
  return "[" + format_number(v[0]) + ", " + format_number(v[1]) + ", " + format_number(v[2]) + "]";
}

// ---------------------------------------------------------------------------
// Command line

struct Options {
  std::string scenario = "default";
  std::optional<std::string> controller;
  std::optional<double> sigma2;
  std::optional<double> gamma;
  std::optional<double> delta;
  std::optional<int> horizon;
  std::optional<int> trials;
  std::optional<int> k_max;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  bool assert_ = false;
  bool svg = false;
  bool no_timing = false;
  // sweep
  std::string experiment = "feasibility";
  std::string axis = "sigma2";
  std::vector<double> values;
  std::vector<std::string> controllers;
  // validate
  int samples = 1000000;
  int instances = 10;
};

void add_scenario_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--scenario", o.scenario, "Scenario YAML file, or 'default'");
  cmd->add_option("--controller", o.controller,
                  "nominal|det-mpc-cbf|cc-mpc-cbf|cc-mpc-dc|sequential");
  cmd->add_option("--sigma2", o.sigma2, "Obstacle noise variance for every obstacle");
  cmd->add_option("--gamma", o.gamma, "CBF decay rate, 0 < gamma <= 1");
  cmd->add_option("--delta", o.delta, "Confidence level, 0 < delta < 1");
  cmd->add_option("--horizon", o.horizon, "Prediction horizon N");
  cmd->add_option("--trials", o.trials, "Trials per table row");
  cmd->add_option("--k-max", o.k_max, "Closed-loop steps");
  cmd->add_option("--seed", o.seed, "Base seed");
  cmd->add_option("--out", o.out, "Output directory")->capture_default_str();
  cmd->add_flag("--assert", o.assert_, "Exit 3 when the expected outcome is not met");
  cmd->add_flag("--no-timing", o.no_timing, "Write zeros in timing columns");
}

Scenario load(const Options& o) {
  Scenario s = parse_scenario(o.scenario);
  try {
    if (o.controller) s.controller = parse_controller(*o.controller);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("--controller: ") + e.what());
  }
  if (o.sigma2) s.set_noise_var(*o.sigma2);
  if (o.gamma) s.gamma = *o.gamma;
  if (o.delta) s.delta = *o.delta;
  if (o.horizon) s.horizon = *o.horizon;
  if (o.trials) s.trials = *o.trials;
  if (o.k_max) s.k_max = *o.k_max;
  if (o.seed) s.seed = *o.seed;
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid scenario: ") + e.what());
  }
  return s;
}

fs::path output_dir(const Options& o) {
  const fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("--out: cannot create '" + o.out + "': " + ec.message());
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << content;
}

void strip_timing(TrajectoryLog& log) {
  log.wall_time = 0.0;
  for (LogStep& s : log.steps) s.solve_ms = 0.0;
}

void strip_timing(ExperimentTable& table) {
  for (TableRow& r : table.rows) r.mean_wall_s = 0.0;
}

std::string table_csv(const ExperimentTable& t) {
  std::ostringstream os;
  write_table_csv(os, t);
  return os.str();
}

std::string optional_k(const std::optional<int>& k) { return k ? std::to_string(*k) : "none"; }

int cmd_run(const Options& o, std::ostream& out) {
  const Scenario s = load(o);
  TrajectoryLog log = run_closed_loop(s);
  if (o.no_timing) strip_timing(log);
  std::ostringstream csv;
  write_trajectory_csv(csv, log);
  std::ostringstream svg;
  if (o.svg) write_svg(svg, s, log);

  const fs::path dir = output_dir(o);
  write_file(dir / "trajectory.csv", csv.str());
  if (o.svg) write_file(dir / "trajectory.svg", svg.str());

  out << "controller=" << to_string(s.controller) << " seed=" << s.seed << " steps=" << log.steps.size()
      << " collided=" << (log.collided ? "yes" : "no") << " first_infeasible_k=" << optional_k(log.first_infeasible_k)
      << " wall_s=" << format_number(log.wall_time) << '\n';
  return o.assert_ && !log.success() ? 3 : 0;
}

std::vector<double> default_values(const std::string& experiment, SweepAxis axis) {
  if (experiment == "success") return {0.0001, 0.01, 0.1};
  switch (axis) {
    case SweepAxis::Sigma2:
      return {1.0, 4.0};
    case SweepAxis::Gamma:
      return {1.0, 0.5, 0.1};
    case SweepAxis::Horizon:
      return {5, 15, 30};
  }
  return {};
}

// Feasibility (or success) of a controller, ordered so that the expected
// trend is non-increasing along the returned sequence.
std::vector<double> ordered(const ExperimentTable& t, const std::string& controller,
                            std::vector<double> values, bool descending, bool success) {
  std::sort(values.begin(), values.end());
  if (descending) std::reverse(values.begin(), values.end());
  std::vector<double> out;
  for (double v : values) {
    const TableRow* r = t.find(v, controller);
    if (r) out.push_back(success ? r->success_pct : r->feasible_pct);
  }
  return out;
}

bool non_increasing(const std::vector<double>& v) {
  for (size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[i - 1]) return false;
  }
  return true;
}

std::vector<std::string> sweep_failures(const std::string& experiment, SweepAxis axis,
                                        const std::vector<double>& values, const ExperimentTable& t) {
  std::vector<std::string> fails;
  const std::string one_shot = to_string(ControllerKind::CcMpcCbf);
  if (experiment == "success") {
    for (const TableRow& r : t.rows) {
      if (r.controller == one_shot && r.success_pct < 100.0) {
        fails.push_back("cc-mpc-cbf success below 100% at " + format_number(r.parameter));
      }
    }
    const auto det = ordered(t, to_string(ControllerKind::DetMpcCbf), values, false, true);
    if (!non_increasing(det)) fails.push_back("det-mpc-cbf success increases with sigma2");
    return fails;
  }
  if (axis == SweepAxis::Sigma2) {
    for (double v : values) {
      const TableRow* a = t.find(v, one_shot);
      const TableRow* b = t.find(v, to_string(ControllerKind::Sequential));
      if (a && b && b->feasible_pct < a->feasible_pct) {
        fails.push_back("sequential feasibility below one-shot at " + format_number(v));
      }
    }
    if (!non_increasing(ordered(t, one_shot, values, false, false))) {
      fails.push_back("one-shot feasibility increases with sigma2");
    }
  } else {
    // Smaller gamma and longer horizons are harder.
    const bool descending = axis == SweepAxis::Gamma;
    std::vector<std::string> names;
    for (const TableRow& r : t.rows) {
      if (std::find(names.begin(), names.end(), r.controller) == names.end()) names.push_back(r.controller);
    }
    for (const std::string& c : names) {
      if (!non_increasing(ordered(t, c, values, descending, false))) {
        fails.push_back(c + " feasibility not non-increasing along " + to_string(axis));
      }
    }
  }
  return fails;
}

int cmd_sweep(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.experiment != "success" && o.experiment != "feasibility") {
    throw ConfigError("--experiment: expected success|feasibility");
  }
  SweepAxis axis;
  try {
    axis = parse_axis(o.axis);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("--axis: ") + e.what());
  }
  if (o.experiment == "success" && axis != SweepAxis::Sigma2) {
    throw ConfigError("--axis: the success experiment sweeps sigma2");
  }
  Options eff = o;
  // The gamma and horizon tables are run at sigma2 = 1.
  if (!eff.sigma2 && axis != SweepAxis::Sigma2) eff.sigma2 = 1.0;
  const Scenario s = load(eff);
  const std::vector<double> values = o.values.empty() ? default_values(o.experiment, axis) : o.values;
  std::optional<std::vector<ControllerKind>> kinds;
  if (!o.controllers.empty()) {
    kinds.emplace();
    for (const std::string& c : o.controllers) {
      try {
        kinds->push_back(parse_controller(c));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("--controllers: ") + e.what());
      }
    }
  }
  for (double v : values) {
    Scenario probe = s;
    if (o.experiment == "success" || axis == SweepAxis::Sigma2) probe.set_noise_var(v);
    if (axis == SweepAxis::Gamma) probe.gamma = v;
    if (axis == SweepAxis::Horizon) {
      if (v != std::round(v)) throw ConfigError("--values: horizon values must be integers");
      probe.horizon = static_cast<int>(v);
    }
    try {
      probe.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("--values: ") + e.what());
    }
  }

  ExperimentTable table =
      o.experiment == "success"
          ? success_rate_experiment(
                s, values,
                kinds.value_or(std::vector<ControllerKind>{ControllerKind::DetMpcCbf, ControllerKind::CcMpcCbf}),
                s.trials)
          : feasibility_experiment(s, axis, values, s.trials, kinds);
  if (o.no_timing) strip_timing(table);
  const std::string csv = table_csv(table);
  write_file(output_dir(o) / "table.csv", csv);
  out << csv;

  const auto fails = sweep_failures(o.experiment, axis, values, table);
  for (const std::string& f : fails) err << "assertion: " << f << '\n';
  return o.assert_ && !fails.empty() ? 3 : 0;
}

int cmd_validate(const Options& o, std::ostream& out) {
  if (o.samples < 100000) throw ConfigError("--samples: at least 100000");
  if (o.instances < 1) throw ConfigError("--instances: at least 1");
  const double sigma2 = o.sigma2.value_or(0.1);
  if (!(sigma2 > 0.0)) throw ConfigError("--sigma2: sigma2 > 0");
  const ValidationReport rep = run_validation(o.instances, sigma2, o.samples, o.seed.value_or(1));

  std::ostringstream csv;
  csv << "instance,closed_mean,empirical_mean,se_mean,closed_var,empirical_var,se_var,pass\n";
  for (size_t i = 0; i < rep.moments.size(); ++i) {
    const MomentReport& m = rep.moments[i];
    csv << i << ',' << format_number(m.closed_mean) << ',' << format_number(m.empirical_mean) << ','
        << format_number(m.se_mean) << ',' << format_number(m.closed_var) << ','
        << format_number(m.empirical_var) << ',' << format_number(m.se_var) << ',' << (m.pass ? 1 : 0) << '\n';
  }
  write_file(output_dir(o) / "validation.csv", csv.str());
  out << csv.str();
  out << "chance_on_boundary=" << format_number(rep.tuned_probability) << " expected=[0.94,0.995] "
      << (rep.tuned_pass ? "pass" : "fail") << '\n';
  out << (rep.pass() ? "all checks pass" : "some checks failed") << '\n';
  return o.assert_ && !rep.pass() ? 3 : 0;
}

int cmd_bench(const Options& o, std::ostream& out) {
  Options eff = o;
  if (!eff.trials) eff.trials = 5;
  const Scenario s = load(eff);
  ExperimentTable table;
  table.axis = "sigma2";
  const double sigma2 = s.obstacles.empty() ? 0.0 : s.obstacles.front().sigma2;
  for (ControllerKind kind : {ControllerKind::Sequential, ControllerKind::CcMpcCbf}) {
    Scenario run = s;
    run.controller = kind;
    table.rows.push_back(summarize(sigma2, to_string(kind), run_trials(run, s.trials)));
  }
  const double seq = table.rows[0].mean_wall_s;
  const double one_shot = table.rows[1].mean_wall_s;
  if (o.no_timing) strip_timing(table);
  const std::string csv = table_csv(table);
  write_file(output_dir(o) / "bench.csv", csv);
  out << csv;
  out << "sequential_mean_s=" << format_number(seq) << " one_shot_mean_s=" << format_number(one_shot) << '\n';
  return o.assert_ && !(seq < one_shot) ? 3 : 0;
}

}  // namespace

Scenario parse_scenario_text(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("malformed YAML: ") + e.what());
  }
  Scenario s;
  if (!root || root.IsNull()) return s;
  reject_unknown(root, "scenario", {"model", "reference", "obstacles", "mpc", "barrier", "run"});

  if (const YAML::Node n = root["model"]; n && !n.IsNull()) {
    reject_unknown(n, "model", {"dt", "velocity_persistence", "noise_channel", "initial_position"});
    read(n, "model", "dt", "a number", s.dt);
    read(n, "model", "velocity_persistence", "a boolean", s.velocity_persistence);
    read_enum(n, "model", "noise_channel", s.noise_channel, &parse_noise_channel);
    read_vec3(n, "model", "initial_position", s.initial_position);
  }
  if (const YAML::Node n = root["reference"]; n && !n.IsNull()) {
    reject_unknown(n, "reference", {"amplitude", "rate", "altitude", "reference_arg"});
    read(n, "reference", "amplitude", "a number", s.reference.amplitude);
    read(n, "reference", "rate", "a number", s.reference.rate);
    read(n, "reference", "altitude", "a number", s.reference.altitude);
    read_enum(n, "reference", "reference_arg", s.reference.arg, &parse_reference_arg);
  }
  if (const YAML::Node n = root["obstacles"]; n) {
    if (!n.IsSequence() && !n.IsNull()) throw ConfigError("obstacles: expected a list");
    s.obstacles.clear();
    if (n.IsSequence()) {
      for (size_t j = 0; j < n.size(); ++j) {
        s.obstacles.push_back(parse_obstacle(n[j], "obstacles[" + std::to_string(j) + "]"));
      }
    }
  }
  if (const YAML::Node n = root["mpc"]; n && !n.IsNull()) {
    reject_unknown(n, "mpc",
                   {"horizon", "p_weight", "q_weight", "r_weight", "state_bound", "input_bound", "filter_eps",
                    "filter_j_max"});
    read(n, "mpc", "horizon", "an integer", s.horizon);
    read(n, "mpc", "p_weight", "a number", s.p_weight);
    read(n, "mpc", "q_weight", "a number", s.q_weight);
    read(n, "mpc", "r_weight", "a number", s.r_weight);
    read(n, "mpc", "state_bound", "a number", s.state_bound);
    read(n, "mpc", "input_bound", "a number", s.input_bound);
    read(n, "mpc", "filter_eps", "a number", s.filter_eps);
    read(n, "mpc", "filter_j_max", "an integer", s.filter_j_max);
  }
  if (const YAML::Node n = root["barrier"]; n && !n.IsNull()) {
    reject_unknown(n, "barrier", {"gamma", "delta", "zeta"});
    read(n, "barrier", "gamma", "a number", s.gamma);
    read(n, "barrier", "delta", "a number", s.delta);
    read(n, "barrier", "zeta", "a number", s.zeta);
  }
  if (const YAML::Node n = root["run"]; n && !n.IsNull()) {
    reject_unknown(n, "run", {"k_max", "seed", "trials", "controller"});
    read(n, "run", "k_max", "an integer", s.k_max);
    read(n, "run", "seed", "an unsigned integer", s.seed);
    read(n, "run", "trials", "an integer", s.trials);
    read_enum(n, "run", "controller", s.controller, &parse_controller);
  }
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid scenario: ") + e.what());
  }
  return s;
}

Scenario parse_scenario(const std::string& path) {
  if (path == "default") return Scenario{};
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read scenario file '" + path + "'");
  std::ostringstream text;
  text << f.rdbuf();
  return parse_scenario_text(text.str());
}

std::string serialize_scenario(const Scenario& s) {
  std::ostringstream os;
  os << "model:\n"
     << "  dt: " << format_number(s.dt) << '\n'
     << "  velocity_persistence: " << (s.velocity_persistence ? "true" : "false") << '\n'
     << "  noise_channel: " << to_string(s.noise_channel) << '\n'
     << "  initial_position: " << vec3(s.initial_position) << '\n'
     << "reference:\n"
     << "  amplitude: " << format_number(s.reference.amplitude) << '\n'
     << "  rate: " << format_number(s.reference.rate) << '\n'
     << "  altitude: " << format_number(s.reference.altitude) << '\n'
     << "  reference_arg: " << to_string(s.reference.arg) << '\n';
  os << "obstacles:" << (s.obstacles.empty() ? " []" : "") << '\n';
  for (const ObstacleConfig& o : s.obstacles) {
    os << "  - center: " << vec3(o.center) << '\n'
       << "    orbit_radius: " << format_number(o.orbit_radius) << '\n'
       << "    omega: " << format_number(o.omega) << '\n'
       << "    phase: " << format_number(o.phase) << '\n'
       << "    altitude: " << format_number(o.altitude) << '\n'
       << "    radius: " << format_number(o.radius) << '\n'
       << "    sigma2: " << format_number(o.sigma2) << '\n';
  }
  os << "mpc:\n"
     << "  horizon: " << s.horizon << '\n'
     << "  p_weight: " << format_number(s.p_weight) << '\n'
     << "  q_weight: " << format_number(s.q_weight) << '\n'
     << "  r_weight: " << format_number(s.r_weight) << '\n'
     << "  state_bound: " << format_number(s.state_bound) << '\n'
     << "  input_bound: " << format_number(s.input_bound) << '\n'
     << "  filter_eps: " << format_number(s.filter_eps) << '\n'
     << "  filter_j_max: " << s.filter_j_max << '\n'
     << "barrier:\n"
     << "  gamma: " << format_number(s.gamma) << '\n'
     << "  delta: " << format_number(s.delta) << '\n'
     << "  zeta: " << format_number(s.zeta) << '\n'
     << "run:\n"
     << "  k_max: " << s.k_max << '\n'
     << "  seed: " << s.seed << '\n'
     << "  trials: " << s.trials << '\n'
     << "  controller: " << to_string(s.controller) << '\n';
  return os.str();
}

void write_svg(std::ostream& out, const Scenario& s, const TrajectoryLog& log) {
  std::vector<Eigen::Vector2d> reference, robot;
  for (int k = 0; k < s.k_max; ++k) reference.push_back(s.reference.position(k, s.dt).head<2>());
  for (const LogStep& st : log.steps) robot.push_back(st.x.head<2>());
  const size_t nobs = s.obstacles.size();
  std::vector<std::vector<Eigen::Vector2d>> paths(nobs);
  for (const LogStep& st : log.steps) {
    for (size_t j = 0; j < nobs && j < st.obstacles.size(); ++j) paths[j].push_back(st.obstacles[j].head<2>());
  }

  double lo_x = std::numeric_limits<double>::infinity(), lo_y = lo_x, hi_x = -lo_x, hi_y = -lo_x;
  auto extend = [&](const Eigen::Vector2d& p, double pad) {
    lo_x = std::min(lo_x, p.x() - pad);
    hi_x = std::max(hi_x, p.x() + pad);
    lo_y = std::min(lo_y, p.y() - pad);
    hi_y = std::max(hi_y, p.y() + pad);
  };
  for (const auto& p : reference) extend(p, 0.5);
  for (const auto& p : robot) extend(p, 0.5);
  for (size_t j = 0; j < nobs; ++j) {
    for (const auto& p : paths[j]) extend(p, s.obstacles[j].radius + 0.2);
  }
  const double width = 640.0;
  const double scale = width / (hi_x - lo_x);
  const double height = std::ceil((hi_y - lo_y) * scale);
  auto fixed = [](double v) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << std::fixed << std::setprecision(2) << v;
    return os.str();
  };
  auto sx = [&](const Eigen::Vector2d& p) { return fixed((p.x() - lo_x) * scale); };
  auto sy = [&](const Eigen::Vector2d& p) { return fixed((hi_y - p.y()) * scale); };
  auto px = [&](const Eigen::Vector2d& p) { return sx(p) + "," + sy(p); };
  auto disc = [&](const Eigen::Vector2d& p, double r, const std::string& style) {
    out << "<circle " << style << " cx=\"" << sx(p) << "\" cy=\"" << sy(p) << "\" r=\"" << fixed(r)
        << "\"/>\n";
  };
  auto polyline = [&](const std::vector<Eigen::Vector2d>& pts, const char* stroke, const char* extra) {
    out << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"2\" " << extra << " points=\"";
    for (size_t i = 0; i < pts.size(); ++i) out << (i ? " " : "") << px(pts[i]);
    out << "\"/>\n";
  };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  polyline(reference, "#999999", "stroke-dasharray=\"6,4\"");
  const char* colors[] = {"#d62728", "#ff7f0e", "#9467bd", "#8c564b"};
  for (size_t j = 0; j < nobs; ++j) {
    const char* c = colors[j % 4];
    polyline(paths[j], c, "stroke-opacity=\"0.4\"");
    if (paths[j].empty()) continue;
    for (int t = 0; t < 5; ++t) {
      const size_t i = (paths[j].size() - 1) * t / 4;
      disc(paths[j][i], s.obstacles[j].radius * scale,
           std::string("fill=\"") + c + "\" fill-opacity=\"0.25\" stroke=\"" + c + "\"");
    }
  }
  polyline(robot, "#1f77b4", "");
  if (!robot.empty()) disc(robot.front(), 4.0, "fill=\"#1f77b4\"");
  out << "</svg>\n";
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Chance-constrained MPC with control barrier functions"};
  app.require_subcommand(1);
  Options o;

  CLI::App* run = app.add_subcommand("run", "One closed loop; writes trajectory.csv");
  add_scenario_options(run, o);
  run->add_flag("--svg", o.svg, "Also write trajectory.svg");

  CLI::App* sweep = app.add_subcommand("sweep", "Success or feasibility table; writes table.csv");
  add_scenario_options(sweep, o);
  sweep->add_option("--experiment", o.experiment, "success|feasibility")->capture_default_str();
  sweep->add_option("--axis", o.axis, "sigma2|gamma|horizon (gamma and horizon default to sigma2 = 1)")
      ->capture_default_str();
  sweep->add_option("--values", o.values, "Comma-separated parameter values")->delimiter(',');
  sweep->add_option("--controllers", o.controllers, "Comma-separated controller names")->delimiter(',');

  CLI::App* validate = app.add_subcommand("validate", "Monte Carlo checks of the CBC moments and chance level");
  add_scenario_options(validate, o);
  validate->add_option("--samples", o.samples, "Samples per check")->capture_default_str();
  validate->add_option("--instances", o.instances, "Random instances")->capture_default_str();

  CLI::App* bench = app.add_subcommand("bench", "Sequential against one-shot wall time; writes bench.csv");
  add_scenario_options(bench, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return 0;
    err << app.help();
    return 2;
  }

  try {
    if (run->parsed()) return cmd_run(o, out);
    if (sweep->parsed()) return cmd_sweep(o, out, err);
    if (validate->parsed()) return cmd_validate(o, out);
    if (bench->parsed()) return cmd_bench(o, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  err << app.help();
  return 2;
}

}  // namespace scbf
