#include "ptoc/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "ptoc/instrumentation.hpp"

#ifndef PTOC_GIT_SHA
#define PTOC_GIT_SHA "unknown"
#endif

namespace ptoc {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string run_id(const ExperimentConfig& cfg) {
  // identity covers what the run computes: drop the output location and the
  // ablation matrix, which only drive sibling runs
  ExperimentConfig keyed = cfg;
  keyed.out_dir.clear();
  keyed.ablation = AblationMatrix{};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "r%012llx",
                static_cast<unsigned long long>(config_hash(keyed) &
                                                 0xffffffffffffULL));
  return buf;
}

std::string resolve_out_dir(const ExperimentConfig& cfg) {
  if (!cfg.out_dir.empty()) return cfg.out_dir;
  const char* root = std::getenv("PTOC_OUT_ROOT");
  return std::string(root ? root : "runs") + "/" + run_id(cfg);
}

void apply_master_seed(ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.seed_sampling = split_seed(seed, 0);
  cfg.seed_init = split_seed(seed, 1);
  cfg.seed_sobolev = split_seed(seed, 2);
  cfg.seed_test = split_seed(seed, 3);
  cfg.seed_fit = split_seed(seed, 4);
}

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::string iso_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
  return buf;
}

void write_manifest(const ExperimentConfig& cfg, const std::string& dir,
                    const std::string& id) {
  json m;
  m["run_id"] = id;
  char hash_buf[32];
  std::snprintf(hash_buf, sizeof(hash_buf), "%016llx",
                static_cast<unsigned long long>(config_hash(cfg)));
  m["config_hash"] = hash_buf;
  m["seeds"] = {{"master", cfg.seed},       {"sampling", cfg.seed_sampling},
                {"init", cfg.seed_init},    {"sobolev", cfg.seed_sobolev},
                {"test", cfg.seed_test},    {"fit", cfg.seed_fit}};
  m["version"] = "0.1.0";
  m["git_sha"] = PTOC_GIT_SHA;
  m["compiler"] = __VERSION__;
#ifdef NDEBUG
  m["build_type"] = "release";
#else
  m["build_type"] = "debug";
#endif
  m["created"] = iso_now();
  write_text(dir + "/manifest.json", m.dump(2) + "\n");
}

std::string metrics_row(const std::string& id, const std::string& variant,
                        const IterationRecord& rec, bool wall_time) {
  std::string row;
  row += id;
  row += ',';
  row += variant;
  row += ',';
  row += std::to_string(rec.k);
  row += ',';
  row += std::to_string(rec.sim_calls);
  row += ',';
  row += format_double(rec.train_cost);
  row += ',';
  row += format_double(rec.test_cost);
  row += ',';
  row += format_double(rec.consensus_u);
  row += ',';
  row += format_double(rec.consensus_x);
  row += ',';
  row += format_double(wall_time ? rec.oc_time_s : 0.0);
  row += ',';
  row += format_double(wall_time ? rec.learn_time_s : 0.0);
  row += ',';
  row += format_double(rec.ddp_iters_mean);
  return row;
}

std::vector<Vec> midpoint_warm(const Ocp& ocp) {
  return std::vector<Vec>(ocp.horizon,
                          (0.5 * (ocp.spec.u_min + ocp.spec.u_max)).eval());
}

struct LoadedRun {
  ExperimentConfig cfg;
  PolicyNet net;
};

LoadedRun load_run(const std::string& run_dir, const std::string& config_path,
                   const std::string& checkpoint_path) {
  const std::string cfg_path =
      !config_path.empty() ? config_path : run_dir + "/config.resolved.json";
  const std::string ckpt_path =
      !checkpoint_path.empty() ? checkpoint_path : run_dir + "/checkpoint.bin";
  LoadedRun run{load_config(cfg_path), {}};
  run.net = load_policy(ckpt_path);
  const SystemSpec spec = run.cfg.make_spec();
  if (run.net.input_dim() != spec.nx || run.net.output_dim() != spec.nu) {
    throw ConfigError("checkpoint does not match the configured system");
  }
  return run;
}

}  // namespace

int cmd_train(const ExperimentConfig& cfg) {
  try {
    cfg.validate();
    const std::string id = run_id(cfg);
    const std::string dir = resolve_out_dir(cfg);
    fs::create_directories(dir);
    write_text(dir + "/config.resolved.json", dump_config(cfg));
    write_manifest(cfg, dir, id);

    const std::string variant = cfg.variant_name();
    std::ofstream metrics(dir + "/metrics.csv", std::ios::trunc);
    if (!metrics) throw std::runtime_error("cannot write metrics.csv");
    metrics << kMetricsHeader << "\n";

    counters().reset();

    const auto on_iteration = [&](const IterationRecord& rec) {
      metrics << metrics_row(id, variant, rec, cfg.record_wall_time) << "\n";
      metrics.flush();
      std::printf(
          "[%s k=%3d] sim=%llu train=%s test=%s res_u=%s oc=%.2fs learn=%.2fs\n",
          variant.c_str(), rec.k,
          static_cast<unsigned long long>(rec.sim_calls),
          format_double(rec.train_cost).c_str(),
          format_double(rec.test_cost).c_str(),
          format_double(rec.consensus_u).c_str(), rec.oc_time_s,
          rec.learn_time_s);
      std::fflush(stdout);
    };

    OuterLoopConfig outer = cfg.make_outer();
    PolicyNet net;
    json summary;
    if (cfg.algo == "pddp") {
      auto result = run_pddp(outer, on_iteration);
      net = std::move(result.net);
    } else {
      auto result = run_plal(outer, on_iteration);
      net = std::move(result.net);
      summary["final_consensus_u"] = result.consensus.residual_u;
      summary["final_consensus_x"] =
          std::isnan(result.consensus.residual_x)
              ? json()
              : json(result.consensus.residual_x);
    }

    save_policy(net, dir + "/checkpoint.bin");
    summary["final_train_policy_cost"] =
        mean_policy_cost(outer.ocp, outer.train, net);
    summary["final_test_policy_cost"] =
        mean_policy_cost(outer.ocp, outer.test, net);
    summary["run_id"] = id;
    summary["variant"] = variant;
    write_text(dir + "/summary.json", summary.dump(2) + "\n");
    std::printf("run %s (%s) finished -> %s\n", id.c_str(), variant.c_str(),
                dir.c_str());
    return kExitOk;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const TrainingAbort& e) {
    std::fprintf(stderr, "training aborted: %s\n", e.what());
    return kExitAbort;
  }
}

int cmd_eval(const EvalOptions& opts) {
  try {
    const LoadedRun run =
        load_run(opts.run_dir, opts.config_path, opts.checkpoint_path);
    const ExperimentConfig& cfg = run.cfg;
    const Ocp ocp = cfg.make_ocp();

    SampleSet set;
    if (opts.use_train_set) {
      const int n = opts.n > 0 ? std::min(opts.n, cfg.n_train) : cfg.n_train;
      set = sample_params(cfg.make_sampling(), cfg.n_train, cfg.seed_sampling);
      set.params.resize(n);
    } else {
      const std::uint64_t seed =
          opts.seed_set ? opts.seed : split_seed(cfg.seed_test, 1);
      set = sample_params(cfg.make_sampling(), std::max(1, opts.n), seed);
    }

    const std::string dir =
        !opts.out_dir.empty() ? opts.out_dir : opts.run_dir;
    fs::create_directories(dir);

    std::ofstream csv(dir + "/eval.csv", std::ios::trunc);
    csv << "sample,policy_cost,ddp_cost,optimality_gap\n";

    std::vector<double> policy_costs;
    double gap_sum = 0.0;
    for (int i = 0; i < set.size(); ++i) {
      double cost_pi = std::numeric_limits<double>::infinity();
      try {
        cost_pi = rollout_policy(ocp, set.params[i], run.net).cost;
      } catch (const DivergedRollout&) {
      }
      const auto ddp_result = solve(ocp, set.params[i], midpoint_warm(ocp), {},
                                    cfg.solver_settings());
      const double cost_ddp = ddp_result.first.cost;
      const double gap = (cost_pi - cost_ddp) / std::max(cost_ddp, 1e-9);
      gap_sum += gap;
      policy_costs.push_back(cost_pi);
      csv << i << ',' << format_double(cost_pi) << ','
          << format_double(cost_ddp) << ',' << format_double(gap) << "\n";
    }

    // state/control trace of the first sample, one row per knot
    std::ofstream trace(dir + "/trace.csv", std::ios::trunc);
    trace << "t";
    for (int i = 0; i < ocp.spec.nx; ++i) trace << ",x" << i;
    for (int i = 0; i < ocp.spec.nu; ++i) trace << ",u" << i;
    trace << "\n";
    try {
      const Trajectory traj = rollout_policy(ocp, set.params[0], run.net);
      for (int t = 0; t <= ocp.horizon; ++t) {
        trace << t;
        for (int i = 0; i < ocp.spec.nx; ++i) {
          trace << ',' << format_double(traj.xs[t][i]);
        }
        for (int i = 0; i < ocp.spec.nu; ++i) {
          trace << ','
                << (t < ocp.horizon ? format_double(traj.us[t][i]) : "nan");
        }
        trace << "\n";
      }
    } catch (const DivergedRollout& e) {
      std::fprintf(stderr, "trace rollout diverged at step %d\n", e.step());
    }

    std::vector<double> sorted = policy_costs;
    std::sort(sorted.begin(), sorted.end());
    const double mean =
        std::accumulate(sorted.begin(), sorted.end(), 0.0) / sorted.size();
    const double median = sorted[sorted.size() / 2];

    json summary;
    summary["n"] = set.size();
    summary["mean_policy_cost"] = mean;
    summary["median_policy_cost"] = median;
    summary["mean_optimality_gap"] = gap_sum / set.size();
    write_text(dir + "/eval_summary.json", summary.dump(2) + "\n");
    std::printf("eval: n=%d mean_policy_cost=%s median=%s mean_gap=%s\n",
                set.size(), format_double(mean).c_str(),
                format_double(median).c_str(),
                format_double(gap_sum / set.size()).c_str());
    return kExitOk;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "eval error: %s\n", e.what());
    return kExitConfig;
  }
}

int cmd_warmstart(const WarmstartOptions& opts) {
  try {
    const LoadedRun run =
        load_run(opts.run_dir, opts.config_path, opts.checkpoint_path);
    const ExperimentConfig& cfg = run.cfg;
    const Ocp ocp = cfg.make_ocp();
    const std::uint64_t seed =
        opts.seed_set ? opts.seed : split_seed(cfg.seed_test, 2);
    const SampleSet set =
        sample_params(cfg.make_sampling(), std::max(1, opts.n), seed);

    const auto rows =
        warmstart_benchmark(ocp, run.net, set, cfg.solver_settings());

    const std::string dir =
        !opts.out_dir.empty() ? opts.out_dir : opts.run_dir;
    fs::create_directories(dir);
    std::ofstream csv(dir + "/warmstart.csv", std::ios::trunc);
    csv << "sample,iters_cold,iters_warm\n";
    std::vector<int> cold, warm;
    int cold_over = 0;
    for (const auto& row : rows) {
      csv << row.sample << ',' << row.iters_cold << ',' << row.iters_warm
          << "\n";
      cold.push_back(row.iters_cold);
      warm.push_back(row.iters_warm);
      if (row.iters_cold > opts.threshold) ++cold_over;
    }
    std::sort(cold.begin(), cold.end());
    std::sort(warm.begin(), warm.end());
    json summary;
    summary["n"] = static_cast<int>(rows.size());
    summary["median_cold"] = cold[cold.size() / 2];
    summary["median_warm"] = warm[warm.size() / 2];
    summary["max_cold"] = cold.back();
    summary["max_warm"] = warm.back();
    summary["threshold"] = opts.threshold;
    summary["fraction_cold_over_threshold"] =
        static_cast<double>(cold_over) / rows.size();
    // a warm start that slows the solver down is worth flagging
    summary["warm_median_exceeds_cold"] =
        warm[warm.size() / 2] > cold[cold.size() / 2];
    write_text(dir + "/warmstart_summary.json", summary.dump(2) + "\n");
    std::printf(
        "warmstart: n=%zu median cold=%d warm=%d max cold=%d warm=%d "
        "cold>%d: %.3f\n",
        rows.size(), cold[cold.size() / 2], warm[warm.size() / 2], cold.back(),
        warm.back(), opts.threshold,
        static_cast<double>(cold_over) / rows.size());
    return kExitOk;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "warmstart error: %s\n", e.what());
    return kExitConfig;
  }
}

int cmd_ablation(const ExperimentConfig& base) {
  try {
    base.validate();
    const std::string root =
        !base.out_dir.empty() ? base.out_dir : resolve_out_dir(base) + "-ablation";
    fs::create_directories(root);

    struct VariantRun {
      std::string name;
      std::string dir;
      bool ok{false};
      std::string error;
    };
    std::vector<VariantRun> runs;

    for (const std::string& algo : base.ablation.algos) {
      for (const std::string& sobolev : base.ablation.sobolev) {
        for (bool ms : base.ablation.multiple_shooting) {
          for (bool constraints : base.ablation.constraints) {
            if (ms && algo != "plal") continue;  // +M applies to PLAL only
            ExperimentConfig cfg = base;
            cfg.algo = ms ? "plal_ms" : algo;
            cfg.sobolev = sobolev;
            cfg.constraints = constraints;
            VariantRun run;
            run.name = cfg.variant_name();
            run.dir = root + "/" + run.name;
            cfg.out_dir = run.dir;
            std::printf("=== ablation variant %s ===\n", run.name.c_str());
            const int code = cmd_train(cfg);
            run.ok = code == kExitOk;
            if (!run.ok) run.error = "exit code " + std::to_string(code);
            runs.push_back(std::move(run));
          }
        }
      }
    }

    // merge per-variant metrics
    std::ofstream merged(root + "/metrics_merged.csv", std::ios::trunc);
    merged << kMetricsHeader << "\n";
    std::vector<std::string> initial_test_costs;
    for (const auto& run : runs) {
      if (!run.ok) continue;
      std::ifstream in(run.dir + "/metrics.csv");
      std::string line;
      bool header = true;
      while (std::getline(in, line)) {
        if (header) {
          header = false;
          continue;
        }
        merged << line << "\n";
        // column 3 is k, column 6 is test_cost
        std::vector<std::string> cols;
        std::size_t pos = 0;
        while (pos != std::string::npos) {
          const std::size_t next = line.find(',', pos);
          cols.push_back(line.substr(
              pos, next == std::string::npos ? next : next - pos));
          pos = next == std::string::npos ? next : next + 1;
        }
        if (cols.size() >= 6 && cols[2] == "0") {
          initial_test_costs.push_back(cols[5]);
        }
      }
    }

    json summary;
    summary["variants"] = json::array();
    int failures = 0;
    for (const auto& run : runs) {
      summary["variants"].push_back(
          {{"name", run.name}, {"ok", run.ok}, {"error", run.error}});
      if (!run.ok) ++failures;
    }

    // shared seeds: every variant must evaluate the identical initial policy
    bool shared_init = true;
    for (const auto& v : initial_test_costs) {
      shared_init = shared_init && v == initial_test_costs.front();
    }
    summary["shared_initialization_verified"] = shared_init;
    summary["failures"] = failures;
    write_text(root + "/ablation_summary.json", summary.dump(2) + "\n");

    if (!shared_init) {
      std::fprintf(stderr,
                   "ablation error: variants disagree on the initial test "
                   "cost despite shared seeds\n");
      return kExitAbort;
    }
    std::printf("ablation finished: %zu variants, %d failures -> %s\n",
                runs.size(), failures, root.c_str());
    return kExitOk;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  }
}

}  // namespace ptoc
