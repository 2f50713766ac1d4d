#ifndef PTOC_RUNNER_HPP_
#define PTOC_RUNNER_HPP_

#include <string>

#include "ptoc/config.hpp"

namespace ptoc {

inline constexpr const char* kMetricsHeader =
    "run_id,variant,k,sim_calls,train_cost,test_cost,consensus_u,"
    "consensus_x,oc_time_s,learn_time_s,ddp_iters_mean";

// Exit codes shared by the CLI: 0 ok, 2 invalid config or inputs,
// 3 training abort.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitAbort = 3;

std::string run_id(const ExperimentConfig& cfg);
std::string format_double(double v);

// Resolve the output directory: cfg.out_dir if set, otherwise
// $PTOC_OUT_ROOT/<run_id> (default root "runs").
std::string resolve_out_dir(const ExperimentConfig& cfg);

// Re-derive the per-stream sub-seeds from a new master seed.
void apply_master_seed(ExperimentConfig& cfg, std::uint64_t seed);

// Runs the configured algorithm; writes config.resolved.json, metrics.csv,
// checkpoint.bin, manifest.json and summary.json into the run directory.
int cmd_train(const ExperimentConfig& cfg);

struct EvalOptions {
  std::string run_dir;
  std::string config_path;      // defaults to run_dir/config.resolved.json
  std::string checkpoint_path;  // defaults to run_dir/checkpoint.bin
  std::string out_dir;          // defaults to run_dir
  int n{32};
  std::uint64_t seed{0};
  bool seed_set{false};
  bool use_train_set{false};
};

// Mean/median policy cost and per-sample optimality gap against a
// per-instance DDP solve; writes eval.csv and a state/control trace for the
// first sample.
int cmd_eval(const EvalOptions& opts);

struct WarmstartOptions {
  std::string run_dir;
  std::string config_path;
  std::string checkpoint_path;
  std::string out_dir;
  int n{64};
  std::uint64_t seed{0};
  bool seed_set{false};
  int threshold{100};
};

int cmd_warmstart(const WarmstartOptions& opts);

// Cross product of the configured ablation switches with shared seeds; one
// run directory per variant plus a merged metrics CSV.
int cmd_ablation(const ExperimentConfig& base);

}  // namespace ptoc

#endif  // PTOC_RUNNER_HPP_
