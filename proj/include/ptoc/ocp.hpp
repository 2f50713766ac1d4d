#ifndef PTOC_OCP_HPP_
#define PTOC_OCP_HPP_

#include "ptoc/envs.hpp"
#include "ptoc/policy.hpp"
#include "ptoc/types.hpp"

namespace ptoc {

// A sampled optimal-control problem family: system, cost, horizon. Instance
// data (x0, goal) comes separately as ProblemParams.
struct Ocp {
  SystemSpec spec;
  CostWeights weights;
  int horizon{50};

  void validate() const;
};

// Uniform sampling box for problem parameters. The goal is fixed unless
// goal_lo/goal_hi are set, in which case it is drawn uniformly too.
struct SamplingConfig {
  Vec x0_lo;
  Vec x0_hi;
  GoalDesc goal;
  Vec goal_lo;  // empty = fixed goal
  Vec goal_hi;
};

// Closed-loop rollout with u_t = pi(x_t). Gains are left empty. Throws
// DivergedRollout (with the step index) on a non-finite state.
Trajectory rollout_policy(const Ocp& ocp, const ProblemParams& beta,
                          const PolicyNet& policy);

// Open-loop rollout under a fixed control sequence.
Trajectory rollout_controls(const Ocp& ocp, const ProblemParams& beta,
                            const std::vector<Vec>& us);

// Total trajectory cost R(beta; u) of rolling beta.x0 under us.
double eval_cost(const Ocp& ocp, const ProblemParams& beta,
                 const std::vector<Vec>& us);

// Cost of an already-rolled trajectory (no dynamics evaluations).
double trajectory_cost(const Ocp& ocp, const ProblemParams& beta,
                       const std::vector<Vec>& xs, const std::vector<Vec>& us);

// i.i.d. uniform draws from the sampling box; deterministic for a fixed seed.
SampleSet sample_params(const SamplingConfig& config, int n,
                        std::uint64_t seed);

}  // namespace ptoc

#endif  // PTOC_OCP_HPP_
