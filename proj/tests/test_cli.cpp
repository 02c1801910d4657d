#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "scbf/cli.hpp"

using namespace scbf;
namespace fs = std::filesystem;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_scenario_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

struct Cli {
  int code = -1;
  std::string out;
  std::string err;
};

Cli cli(std::vector<std::string> args) {
  args.insert(args.begin(), "scbf");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Cli r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("scbf_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("empty scenario file is the default scenario") {
  CHECK(parse_scenario_text("") == Scenario{});
  CHECK(parse_scenario_text("# nothing\n") == Scenario{});
  CHECK(parse_scenario("default") == Scenario{});
}

TEST_CASE("scenario values are read") {
  const Scenario s = parse_scenario_text(
      "model:\n  dt: 0.05\n  noise_channel: position\n  initial_position: [1, 2, 3]\n"
      "reference:\n  reference_arg: step_index\n"
      "obstacles:\n  - center: [1, 0, 0]\n    radius: 0.5\n    sigma2: 0.2\n"
      "mpc:\n  horizon: 7\n"
      "barrier:\n  gamma: 0.25\n"
      "run:\n  seed: 18446744073709551615\n  controller: cc-mpc-dc\n");
  CHECK(s.dt == 0.05);
  CHECK(s.noise_channel == NoiseChannel::Position);
  CHECK(s.initial_position == Eigen::Vector3d(1, 2, 3));
  CHECK(s.reference.arg == ReferenceArg::StepIndex);
  REQUIRE(s.obstacles.size() == 1);
  CHECK(s.obstacles[0].radius == 0.5);
  CHECK(s.obstacles[0].sigma2 == 0.2);
  CHECK(s.obstacles[0].omega == ObstacleConfig{}.omega);
  CHECK(s.horizon == 7);
  CHECK(s.gamma == 0.25);
  CHECK(s.seed == 18446744073709551615ULL);
  CHECK(s.controller == ControllerKind::CcMpcDc);
  CHECK(s.k_max == Scenario{}.k_max);
}

TEST_CASE("scenario errors name the section and key") {
  CHECK(error_of("barrier:\n  gamma: 1.5\n").find("0 < gamma <= 1") != std::string::npos);
  CHECK(error_of("barrier:\n  gamma: high\n") == "barrier.gamma: expected a number");
  CHECK(error_of("mpc:\n  horizon: 2.5\n") == "mpc.horizon: expected an integer");
  CHECK(error_of("mpc:\n  horizn: 3\n") == "unknown key 'mpc.horizn'");
  CHECK(error_of("solver:\n  x: 1\n") == "unknown key 'scenario.solver'");
  CHECK(error_of("obstacles:\n  - colour: red\n") == "unknown key 'obstacles[0].colour'");
  CHECK(error_of("model:\n  initial_position: [1, 2]\n") ==
        "model.initial_position: expected a list of 3 numbers");
  CHECK(error_of("run:\n  controller: pid\n").find("run.controller") == 0);
  CHECK(error_of("run: [1, 2]\n") == "run: expected a mapping");
  CHECK(error_of("model: {dt: [}\n").find("malformed YAML") == 0);
  CHECK_THROWS_AS(parse_scenario("/nonexistent/scenario.yaml"), ConfigError);
}

TEST_CASE("scenario round trip") {
  const Scenario d;
  CHECK(parse_scenario_text(serialize_scenario(d)) == d);
  Scenario s;
  s.dt = 0.1 / 3.0;
  s.initial_position = {0.1, -0.7, 1.0 / 7.0};
  s.obstacles[1].phase = 2.0 / 3.0;
  s.obstacles.push_back(ObstacleConfig{});
  s.gamma = 0.3;
  s.zeta = 1e-300;
  s.seed = 123456789012345ULL;
  s.controller = ControllerKind::DetMpcCbf;
  s.reference.arg = ReferenceArg::StepIndex;
  s.velocity_persistence = true;
  const std::string text = serialize_scenario(s);
  CHECK(parse_scenario_text(text) == s);
  CHECK(serialize_scenario(parse_scenario_text(text)) == text);
  s.obstacles.clear();
  CHECK(parse_scenario_text(serialize_scenario(s)) == s);
}

TEST_CASE("exit codes") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  const Cli bad_flag = cli({"run", "--frob"});
  CHECK(bad_flag.code == 2);
  CHECK(bad_flag.err.find("Usage") != std::string::npos);
  CHECK(cli({"run", "--gamma", "1.5"}).code == 2);
  CHECK(cli({"run", "--controller", "pid"}).code == 2);
  CHECK(cli({"sweep", "--axis", "delta"}).code == 2);
  CHECK(cli({"sweep", "--experiment", "success", "--axis", "gamma"}).code == 2);
  CHECK(cli({"validate", "--samples", "10"}).code == 2);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("run writes a trajectory and a summary") {
  const fs::path dir = scratch("run");
  const Cli r = cli({"run", "--controller", "nominal", "--k-max", "12", "--seed", "7", "--out", dir.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("controller=nominal seed=7 steps=12") == 0);
  const std::string csv = slurp(dir / "trajectory.csv");
  CHECK(csv.rfind("k,x0,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 13);
  CHECK_FALSE(fs::exists(dir / "trajectory.svg"));
}

TEST_CASE("outputs are reproducible and svg does not touch the csv") {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  const std::vector<std::string> common{"--controller", "det-mpc-cbf", "--k-max", "20", "--seed", "3", "--no-timing"};
  auto with = [&](std::vector<std::string> head, const fs::path& dir, bool svg) {
    head.insert(head.end(), common.begin(), common.end());
    head.push_back("--out");
    head.push_back(dir.string());
    if (svg) head.push_back("--svg");
    return cli(head);
  };
  REQUIRE(with({"run"}, a, false).code == 0);
  REQUIRE(with({"run"}, b, true).code == 0);
  CHECK(slurp(a / "trajectory.csv") == slurp(b / "trajectory.csv"));
  const std::string svg = slurp(b / "trajectory.svg");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(std::count(svg.begin(), svg.end(), '\n') > 10);

  REQUIRE(with({"sweep", "--experiment", "success", "--values", "0.01", "--trials", "2"}, a, false).code == 0);
  REQUIRE(with({"sweep", "--experiment", "success", "--values", "0.01", "--trials", "2"}, b, false).code == 0);
  CHECK(slurp(a / "table.csv") == slurp(b / "table.csv"));
}

TEST_CASE("sweep assertion failure exits 3") {
  const fs::path dir = scratch("sweep");
  // Neither asserted controller is in the table.
  const Cli ok = cli({"sweep", "--experiment", "success", "--values", "0", "--controllers", "nominal", "--trials",
                      "1", "--k-max", "5", "--out", dir.string(), "--assert"});
  CHECK(ok.code == 0);
  // The one-shot controller is infeasible from the first step at sigma2 = 4.
  const Cli fail = cli({"sweep", "--experiment", "success", "--values", "4", "--controllers", "cc-mpc-cbf",
                        "--trials", "1", "--k-max", "5", "--out", dir.string(), "--assert"});
  CHECK(fail.code == 3);
  CHECK(fail.err.find("assertion:") != std::string::npos);
  const std::string csv = slurp(dir / "table.csv");
  CHECK(csv.find("4,cc-mpc-cbf,1,0,0,0,") != std::string::npos);
}
