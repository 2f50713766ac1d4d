#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ptoc/runner.hpp"

using namespace ptoc;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

ExperimentConfig tiny_config(const std::string& dir) {
  ExperimentConfig cfg = default_config("lqr");
  cfg.horizon = 15;
  cfg.n_train = 3;
  cfg.n_test = 4;
  cfg.outer_iters = 2;
  cfg.epochs = 5;
  cfg.policy_init.hidden = {8};
  cfg.out_dir = dir;
  cfg.record_wall_time = false;
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::path("harness_tmp") / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

}  // namespace

TEST_CASE("task defaults are valid configurations") {
  for (const std::string task : {"lqr", "pendulum", "double_pendulum"}) {
    const ExperimentConfig cfg = default_config(task);
    CHECK_NOTHROW(cfg.validate());
    CHECK_NOTHROW(cfg.make_ocp());
  }
  CHECK_THROWS_AS(default_config("cartpole"), ConfigError);
}

TEST_CASE("config text round trips exactly") {
  ExperimentConfig cfg = default_config("pendulum");
  cfg.seed = 1234;
  cfg.algo = "plal_ms";
  cfg.sobolev = "stochastic";
  const std::string text = dump_config(cfg);
  const ExperimentConfig back = parse_config_text(text);
  CHECK(dump_config(back) == text);
  CHECK(config_hash(back) == config_hash(cfg));
}

TEST_CASE("unknown config keys are rejected with their path") {
  CHECK_THROWS_WITH_AS(parse_config_text("{\"frobnicate\": 1}"),
                       "unknown config key: frobnicate", ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("{\"ddp\": {\"regg\": 1}}"),
                       "unknown config key: ddp.regg", ConfigError);
  CHECK_THROWS_AS(parse_config_text("not json at all"), ConfigError);
}

TEST_CASE("master seed derives the per-stream seeds") {
  const ExperimentConfig a = parse_config_text("{\"seed\": 7}");
  const ExperimentConfig b = parse_config_text("{\"seed\": 7}");
  const ExperimentConfig c = parse_config_text("{\"seed\": 8}");
  CHECK(a.seed_sampling == b.seed_sampling);
  CHECK(a.seed_init == b.seed_init);
  CHECK(a.seed_sampling != c.seed_sampling);
  // explicit per-stream override wins
  const ExperimentConfig d =
      parse_config_text("{\"seed\": 7, \"seeds\": {\"init\": 99}}");
  CHECK(d.seed_init == 99);
  CHECK(d.seed_sampling == a.seed_sampling);
}

TEST_CASE("config validation catches bad values") {
  ExperimentConfig cfg = default_config("lqr");
  cfg.algo = "sac";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = default_config("lqr");
  cfg.mu = 1e-9;
  cfg.algo = "plal";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = default_config("lqr");
  cfg.resample_each_iter = true;
  cfg.algo = "plal";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = default_config("lqr");
  cfg.wp_diag = Vec::Ones(5);
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("variant names cover the ablation axes") {
  ExperimentConfig cfg = default_config("lqr");
  CHECK(cfg.variant_name() == "pddp");
  cfg.sobolev = "stochastic";
  CHECK(cfg.variant_name() == "pddp+S");
  cfg.algo = "plal_ms";
  cfg.constraints = false;
  CHECK(cfg.variant_name() == "plal+M+S-C");
}

TEST_CASE("train writes the full run directory") {
  TempDir tmp("train");
  const ExperimentConfig cfg = tiny_config(tmp.str());
  REQUIRE(cmd_train(cfg) == kExitOk);
  for (const std::string name :
       {"config.resolved.json", "metrics.csv", "checkpoint.bin",
        "manifest.json", "summary.json"}) {
    CHECK(fs::exists(tmp.path / name));
  }
  const std::string metrics = slurp((tmp.path / "metrics.csv").string());
  CHECK(metrics.rfind(kMetricsHeader, 0) == 0);
  // one row per outer iteration plus the k=0 row and the header
  const auto lines = std::count(metrics.begin(), metrics.end(), '\n');
  CHECK(lines == cfg.outer_iters + 2);
  // the resolved config reloads to the same hash
  const ExperimentConfig back =
      load_config((tmp.path / "config.resolved.json").string());
  CHECK(config_hash(back) == config_hash(cfg));

  // sim_calls (column 4) is monotone within the run
  std::istringstream rows(metrics);
  std::string line;
  std::getline(rows, line);  // header
  long long prev = -1;
  while (std::getline(rows, line)) {
    std::size_t pos = 0;
    for (int c = 0; c < 3; ++c) pos = line.find(',', pos) + 1;
    const long long sim = std::stoll(line.substr(pos));
    CHECK(sim >= prev);
    prev = sim;
  }
}

TEST_CASE("an ablation matrix of size one equals a train run") {
  TempDir tmp("ablation_one");
  ExperimentConfig cfg = tiny_config(tmp.str());
  cfg.ablation.algos = {"pddp"};
  cfg.ablation.sobolev = {"off"};
  cfg.ablation.multiple_shooting = {false};
  cfg.ablation.constraints = {true};
  REQUIRE(cmd_ablation(cfg) == kExitOk);

  TempDir tmp2("ablation_one_ref");
  ExperimentConfig ref = tiny_config(tmp2.str());
  REQUIRE(cmd_train(ref) == kExitOk);

  const std::string merged = slurp((tmp.path / "metrics_merged.csv").string());
  const std::string single = slurp((tmp2.path / "metrics.csv").string());
  CHECK(merged == single);
}

TEST_CASE("identical train runs produce byte-identical metrics") {
  TempDir tmp_a("repro_a");
  TempDir tmp_b("repro_b");
  ExperimentConfig cfg = tiny_config(tmp_a.str());
  REQUIRE(cmd_train(cfg) == kExitOk);
  cfg.out_dir = tmp_b.str();
  REQUIRE(cmd_train(cfg) == kExitOk);
  CHECK(slurp((tmp_a.path / "metrics.csv").string()) ==
        slurp((tmp_b.path / "metrics.csv").string()));
}

TEST_CASE("eval reproduces the recorded train-set policy cost") {
  TempDir tmp("eval");
  ExperimentConfig cfg = tiny_config(tmp.str());
  cfg.algo = "plal";
  REQUIRE(cmd_train(cfg) == kExitOk);
  EvalOptions opts;
  opts.run_dir = tmp.str();
  opts.use_train_set = true;
  opts.n = cfg.n_train;
  REQUIRE(cmd_eval(opts) == kExitOk);

  const json summary = json::parse(slurp((tmp.path / "summary.json").string()));
  const json eval = json::parse(slurp((tmp.path / "eval_summary.json").string()));
  CHECK(std::abs(eval["mean_policy_cost"].get<double>() -
                 summary["final_train_policy_cost"].get<double>()) < 1e-10);

  // per-sample rows and a trace with T+1 knots
  const std::string eval_csv = slurp((tmp.path / "eval.csv").string());
  CHECK(std::count(eval_csv.begin(), eval_csv.end(), '\n') == cfg.n_train + 1);
  const std::string trace = slurp((tmp.path / "trace.csv").string());
  CHECK(std::count(trace.begin(), trace.end(), '\n') == cfg.horizon + 2);
}

TEST_CASE("eval rejects a checkpoint from a different system") {
  TempDir tmp("mismatch");
  ExperimentConfig cfg = tiny_config(tmp.str());
  REQUIRE(cmd_train(cfg) == kExitOk);
  // a double-pendulum config cannot drive this 2-state checkpoint
  ExperimentConfig other = default_config("double_pendulum");
  other.out_dir = tmp.str();
  {
    std::ofstream out(tmp.path / "other.json");
    out << dump_config(other);
  }
  EvalOptions opts;
  opts.run_dir = tmp.str();
  opts.config_path = (tmp.path / "other.json").string();
  CHECK(cmd_eval(opts) == kExitConfig);
}

TEST_CASE("a zero policy evaluated from the origin costs nothing") {
  TempDir tmp("zero_eval");
  ExperimentConfig cfg = tiny_config(tmp.str());
  cfg.x0_lo = Vec::Zero(2);  // degenerate sampling box at the origin
  cfg.x0_hi = Vec::Zero(2);
  {
    std::ofstream out(tmp.path / "zero.json");
    out << dump_config(cfg);
  }
  const SystemSpec spec = cfg.make_spec();
  const PolicyNet zero({2, 8, 1}, Activation::kRelu, spec.u_min, spec.u_max);
  save_policy(zero, (tmp.path / "zero.bin").string());

  EvalOptions opts;
  opts.config_path = (tmp.path / "zero.json").string();
  opts.checkpoint_path = (tmp.path / "zero.bin").string();
  opts.out_dir = tmp.str();
  opts.n = 2;
  REQUIRE(cmd_eval(opts) == kExitOk);
  const json summary =
      json::parse(slurp((tmp.path / "eval_summary.json").string()));
  CHECK(summary["mean_policy_cost"].get<double>() == 0.0);
}

TEST_CASE("warmstart writes one row per test problem") {
  TempDir tmp("warm");
  ExperimentConfig cfg = tiny_config(tmp.str());
  REQUIRE(cmd_train(cfg) == kExitOk);
  WarmstartOptions opts;
  opts.run_dir = tmp.str();
  opts.n = 6;
  opts.threshold = 100;
  REQUIRE(cmd_warmstart(opts) == kExitOk);
  const std::string csv = slurp((tmp.path / "warmstart.csv").string());
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
  const json summary =
      json::parse(slurp((tmp.path / "warmstart_summary.json").string()));
  CHECK(summary["n"].get<int>() == 6);
  CHECK(summary["fraction_cold_over_threshold"].get<double>() >= 0.0);
}

TEST_CASE("ablation runs its matrix with shared initialization") {
  TempDir tmp("ablation");
  ExperimentConfig cfg = tiny_config(tmp.str());
  cfg.ablation.algos = {"pddp", "plal"};
  cfg.ablation.sobolev = {"off", "stochastic"};
  cfg.ablation.multiple_shooting = {false};
  cfg.ablation.constraints = {true};
  REQUIRE(cmd_ablation(cfg) == kExitOk);
  CHECK(fs::exists(tmp.path / "pddp" / "metrics.csv"));
  CHECK(fs::exists(tmp.path / "plal+S" / "metrics.csv"));
  const std::string merged = slurp((tmp.path / "metrics_merged.csv").string());
  // 4 variants x (2 iterations + k=0 row) + header
  CHECK(std::count(merged.begin(), merged.end(), '\n') ==
        4 * (cfg.outer_iters + 1) + 1);
  const json summary =
      json::parse(slurp((tmp.path / "ablation_summary.json").string()));
  CHECK(summary["shared_initialization_verified"].get<bool>());
  CHECK(summary["failures"].get<int>() == 0);
}

TEST_CASE("the double pendulum task trains through the same pipeline") {
  TempDir tmp("dp_train");
  ExperimentConfig cfg = default_config("double_pendulum");
  cfg.horizon = 30;
  cfg.n_train = 2;
  cfg.n_test = 2;
  cfg.outer_iters = 2;
  cfg.epochs = 4;
  cfg.policy_init.hidden = {8};
  cfg.out_dir = tmp.str();
  cfg.record_wall_time = false;
  REQUIRE(cmd_train(cfg) == kExitOk);
  CHECK(fs::exists(tmp.path / "checkpoint.bin"));
  const PolicyNet net = load_policy((tmp.path / "checkpoint.bin").string());
  CHECK(net.input_dim() == 4);
  CHECK(net.output_dim() == 2);
}

TEST_CASE("train exit codes distinguish config errors") {
  ExperimentConfig cfg = default_config("lqr");
  cfg.algo = "nonsense";
  CHECK(cmd_train(cfg) == kExitConfig);
}

#ifdef PTOC_CLI
TEST_CASE("cli end to end: flags override the config file") {
  TempDir tmp("cli");
  const std::string cfg_path = (tmp.path / "exp.json").string();
  {
    std::ofstream out(cfg_path);
    out << "{\"task\": \"lqr\", \"system\": {\"horizon\": 12},\n"
           " \"sampling\": {\"n_train\": 3, \"n_test\": 3},\n"
           " \"outer\": {\"iters\": 2}, \"learn\": {\"epochs\": 4},\n"
           " \"policy\": {\"hidden\": [8]},\n"
           " \"record_wall_time\": false}\n";
  }
  const std::string run_dir = (tmp.path / "run").string();
  const std::string cmd = std::string(PTOC_CLI) + " train --config " +
                          cfg_path + " --seed 5 --algo plal " +
                          "--sobolev stochastic --no-constraints --out " +
                          run_dir + " > /dev/null 2>&1";
  REQUIRE(std::system(cmd.c_str()) == 0);
  const json resolved =
      json::parse(slurp(run_dir + "/config.resolved.json"));
  CHECK(resolved["algo"] == "plal");
  CHECK(resolved["sobolev"] == "stochastic");
  CHECK(resolved["constraints"] == false);
  CHECK(resolved["seed"] == 5);
  const std::string metrics = slurp(run_dir + "/metrics.csv");
  CHECK(metrics.find("plal+S-C") != std::string::npos);
}

TEST_CASE("cli rejects a missing config file with exit code 2") {
  const std::string cmd =
      std::string(PTOC_CLI) + " train --config does_not_exist.json "
      "> /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) != 0);
}
#endif
