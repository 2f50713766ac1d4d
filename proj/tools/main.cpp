// Command-line front end: train / eval / warmstart / ablation.

#include <cstdio>

#include <CLI11.hpp>

#include "ptoc/runner.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed{0};
  bool seed_set{false};
  std::string algo;
  std::string sobolev;
  bool no_constraints{false};
  int workers{0};
};

ptoc::ExperimentConfig build_config(const CommonFlags& flags) {
  ptoc::ExperimentConfig cfg = ptoc::load_config(flags.config_path);
  if (flags.seed_set) ptoc::apply_master_seed(cfg, flags.seed);
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  if (!flags.algo.empty()) {
    // CLI spelling plal-ms maps to the config value plal_ms
    cfg.algo = flags.algo == "plal-ms" ? "plal_ms" : flags.algo;
  }
  if (!flags.sobolev.empty()) cfg.sobolev = flags.sobolev;
  if (flags.no_constraints) cfg.constraints = false;
  if (flags.workers > 0) cfg.workers = flags.workers;
  return cfg;
}

void add_common_flags(CLI::App* cmd, CommonFlags& flags, bool config_required) {
  auto* config_opt =
      cmd->add_option("--config", flags.config_path, "experiment config file");
  if (config_required) config_opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", flags.seed, "master seed (re-derives sub-seeds)")
      ->each([&flags](const std::string&) { flags.seed_set = true; });
  cmd->add_option("--out", flags.out_dir, "output directory");
  cmd->add_option("--algo", flags.algo, "algorithm")
      ->check(CLI::IsMember({"pddp", "plal", "plal-ms"}));
  cmd->add_option("--sobolev", flags.sobolev, "Sobolev regularization mode")
      ->check(CLI::IsMember({"off", "full", "stochastic"}));
  cmd->add_flag("--no-constraints", flags.no_constraints,
                "disable box handling in the OC solver (-C ablation)");
  cmd->add_option("--workers", flags.workers, "OC worker threads");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"policy learning via box-constrained trajectory optimization"};
  app.require_subcommand(1);

  CommonFlags train_flags;
  auto* train = app.add_subcommand("train", "run a training campaign");
  add_common_flags(train, train_flags, true);

  CommonFlags ablation_flags;
  auto* ablation =
      app.add_subcommand("ablation", "run the ablation matrix with shared seeds");
  add_common_flags(ablation, ablation_flags, true);

  ptoc::EvalOptions eval_opts;
  auto* eval = app.add_subcommand("eval", "evaluate a trained checkpoint");
  eval->add_option("--run", eval_opts.run_dir, "training run directory");
  eval->add_option("--config", eval_opts.config_path, "config override");
  eval->add_option("--checkpoint", eval_opts.checkpoint_path,
                   "checkpoint override");
  eval->add_option("--out", eval_opts.out_dir, "output directory");
  eval->add_option("--n", eval_opts.n, "number of evaluation problems");
  eval->add_option("--seed", eval_opts.seed, "evaluation sampling seed")
      ->each([&eval_opts](const std::string&) { eval_opts.seed_set = true; });
  eval->add_flag("--train-set", eval_opts.use_train_set,
                 "evaluate on the training samples instead of fresh ones");

  ptoc::WarmstartOptions warm_opts;
  auto* warm = app.add_subcommand(
      "warmstart", "compare cold vs policy-warm-started solver iterations");
  warm->add_option("--run", warm_opts.run_dir, "training run directory");
  warm->add_option("--config", warm_opts.config_path, "config override");
  warm->add_option("--checkpoint", warm_opts.checkpoint_path,
                   "checkpoint override");
  warm->add_option("--out", warm_opts.out_dir, "output directory");
  warm->add_option("--n", warm_opts.n, "number of test problems");
  warm->add_option("--seed", warm_opts.seed, "test sampling seed")
      ->each([&warm_opts](const std::string&) { warm_opts.seed_set = true; });
  warm->add_option("--threshold", warm_opts.threshold,
                   "iteration count reported as a worst case");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return ptoc::cmd_train(build_config(train_flags));
    if (ablation->parsed()) {
      return ptoc::cmd_ablation(build_config(ablation_flags));
    }
    if (eval->parsed()) {
      if (eval_opts.run_dir.empty() &&
          (eval_opts.config_path.empty() || eval_opts.checkpoint_path.empty())) {
        std::fprintf(stderr,
                     "eval needs --run or both --config and --checkpoint\n");
        return ptoc::kExitConfig;
      }
      return ptoc::cmd_eval(eval_opts);
    }
    if (warm->parsed()) {
      if (warm_opts.run_dir.empty() &&
          (warm_opts.config_path.empty() || warm_opts.checkpoint_path.empty())) {
        std::fprintf(
            stderr, "warmstart needs --run or both --config and --checkpoint\n");
        return ptoc::kExitConfig;
      }
      return ptoc::cmd_warmstart(warm_opts);
    }
  } catch (const ptoc::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return ptoc::kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
