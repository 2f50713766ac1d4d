#ifndef PTOC_CONFIG_HPP_
#define PTOC_CONFIG_HPP_

#include <string>

#include "ptoc/algos.hpp"

namespace ptoc {

struct AblationMatrix {
  std::vector<std::string> algos{"pddp", "plal"};
  std::vector<std::string> sobolev{"off", "stochastic"};
  std::vector<bool> multiple_shooting{false, true};
  std::vector<bool> constraints{true, false};
};

// Fully-resolved experiment description. Defaults depend on the task; a
// config file overrides them and CLI flags override the file. Unknown keys
// are rejected.
struct ExperimentConfig {
  std::string task{"lqr"};  // lqr | pendulum | double_pendulum
  std::string algo{"pddp"};  // pddp | plal | plal_ms
  std::string sobolev{"off"};  // off | full | stochastic
  bool constraints{true};
  std::uint64_t seed{0};
  // derived sub-seeds; overridable individually
  std::uint64_t seed_sampling{0};
  std::uint64_t seed_init{0};
  std::uint64_t seed_sobolev{0};
  std::uint64_t seed_test{0};
  std::uint64_t seed_fit{0};
  std::string out_dir;
  int workers{1};
  bool record_wall_time{true};

  // system
  double dt{0.0};  // 0 = task default
  int horizon{0};
  Vec u_min, u_max;
  double m1{1.0}, l1{1.0}, m2{1.0}, l2{1.0};
  double gravity{9.81};
  double damping{0.0};

  // cost
  Vec wp_diag, wu_diag, wx_diag;
  double terminal_scale{10.0};
  std::string goal_kind;  // "state" | "ee"
  Vec goal;

  // sampling
  Vec x0_lo, x0_hi;
  int n_train{16};
  int n_test{32};

  DdpSettings ddp;
  PolicyInit policy_init;

  // learning
  int epochs{20};
  int batch_size{64};
  AdamConfig adam;
  double sobolev_weight{0.1};
  int sobolev_directions{1};
  bool sobolev_unbiased{false};

  // outer loop
  int outer_iters{20};
  double mu{10.0};
  int eval_every{1};
  bool resample_each_iter{false};
  double early_stop_residual{0.0};

  AblationMatrix ablation;

  SystemSpec make_spec() const;
  Ocp make_ocp() const;
  SamplingConfig make_sampling() const;
  DdpSettings solver_settings() const;
  OuterLoopConfig make_outer() const;
  std::string variant_name() const;
  void validate() const;
};

// Task defaults (lqr | pendulum | double_pendulum).
ExperimentConfig default_config(const std::string& task);

// Load a config file over task defaults; throws ConfigError on unknown keys
// or invalid values.
ExperimentConfig load_config(const std::string& path);

// Resolved snapshot, JSON text with every field populated.
std::string dump_config(const ExperimentConfig& cfg);
ExperimentConfig parse_config_text(const std::string& text);

// FNV-1a hash of the resolved snapshot.
std::uint64_t config_hash(const ExperimentConfig& cfg);

}  // namespace ptoc

#endif  // PTOC_CONFIG_HPP_
