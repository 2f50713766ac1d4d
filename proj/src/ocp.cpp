#include "ptoc/ocp.hpp"

#include "ptoc/rng.hpp"

namespace ptoc {

void Ocp::validate() const {
  spec.validate();
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
}

namespace {

bool finite(const Vec& v) { return v.allFinite(); }

}  // namespace

Trajectory rollout_policy(const Ocp& ocp, const ProblemParams& beta,
                          const PolicyNet& policy) {
  if (policy.output_dim() != ocp.spec.nu || policy.input_dim() != ocp.spec.nx) {
    throw std::invalid_argument("policy dimensions do not match the system");
  }
  const int T = ocp.horizon;
  Trajectory traj;
  traj.xs.resize(T + 1);
  traj.us.resize(T);
  traj.xs[0] = beta.x0;
  double cost = 0.0;
  for (int t = 0; t < T; ++t) {
    if (!finite(traj.xs[t])) throw DivergedRollout(t);
    traj.us[t] = forward(policy, traj.xs[t]);
    cost += stage_cost(ocp.spec, ocp.weights, beta.goal, traj.xs[t], traj.us[t])
                .value;
    traj.xs[t + 1] = step(ocp.spec, traj.xs[t], traj.us[t]);
  }
  if (!finite(traj.xs[T])) throw DivergedRollout(T);
  cost += terminal_cost(ocp.spec, ocp.weights, beta.goal, traj.xs[T]).value;
  traj.cost = cost;
  return traj;
}

Trajectory rollout_controls(const Ocp& ocp, const ProblemParams& beta,
                            const std::vector<Vec>& us) {
  if (static_cast<int>(us.size()) != ocp.horizon) {
    throw std::invalid_argument("control sequence length must equal horizon");
  }
  const int T = ocp.horizon;
  Trajectory traj;
  traj.xs.resize(T + 1);
  traj.us = us;
  traj.xs[0] = beta.x0;
  double cost = 0.0;
  for (int t = 0; t < T; ++t) {
    if (!finite(traj.xs[t])) throw DivergedRollout(t);
    cost +=
        stage_cost(ocp.spec, ocp.weights, beta.goal, traj.xs[t], us[t]).value;
    traj.xs[t + 1] = step(ocp.spec, traj.xs[t], us[t]);
  }
  if (!finite(traj.xs[T])) throw DivergedRollout(T);
  cost += terminal_cost(ocp.spec, ocp.weights, beta.goal, traj.xs[T]).value;
  traj.cost = cost;
  return traj;
}

double eval_cost(const Ocp& ocp, const ProblemParams& beta,
                 const std::vector<Vec>& us) {
  return rollout_controls(ocp, beta, us).cost;
}

double trajectory_cost(const Ocp& ocp, const ProblemParams& beta,
                       const std::vector<Vec>& xs, const std::vector<Vec>& us) {
  double cost = 0.0;
  for (std::size_t t = 0; t < us.size(); ++t) {
    cost += stage_cost(ocp.spec, ocp.weights, beta.goal, xs[t], us[t]).value;
  }
  cost += terminal_cost(ocp.spec, ocp.weights, beta.goal, xs.back()).value;
  return cost;
}

SampleSet sample_params(const SamplingConfig& config, int n,
                        std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_params: n must be >= 1");
  if (config.x0_lo.size() == 0 || config.x0_lo.size() != config.x0_hi.size()) {
    throw ConfigError("sampling box is empty or mismatched");
  }
  for (Eigen::Index i = 0; i < config.x0_lo.size(); ++i) {
    if (config.x0_lo[i] > config.x0_hi[i]) {
      throw ConfigError("sampling box has lo > hi");
    }
  }
  const bool random_goal = config.goal_lo.size() > 0;
  if (random_goal && config.goal_lo.size() != config.goal_hi.size()) {
    throw ConfigError("goal sampling box mismatched");
  }

  SampleSet set;
  set.seed = seed;
  set.params.reserve(n);
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    ProblemParams beta;
    beta.x0 = rng.uniform_vec(config.x0_lo, config.x0_hi);
    beta.goal = config.goal;
    if (random_goal) {
      beta.goal.target = rng.uniform_vec(config.goal_lo, config.goal_hi);
    }
    set.params.push_back(std::move(beta));
  }
  return set;
}

}  // namespace ptoc
