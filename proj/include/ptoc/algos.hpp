#ifndef PTOC_ALGOS_HPP_
#define PTOC_ALGOS_HPP_

#include <functional>

#include "ptoc/ddp.hpp"
#include "ptoc/learn.hpp"

namespace ptoc {

// Per-(sample, step) consensus bookkeeping, flat index i * T + t.
struct ConsensusState {
  int n_samples{0};
  int horizon{0};
  std::vector<Vec> lambda;   // control multipliers, nu each
  std::vector<Vec> gamma;    // state multipliers (MS), nx each
  std::vector<double> mu;    // penalty weights, > 0
  std::vector<Vec> shadow;   // learning-side states (MS), nx each
  double residual_u{std::numeric_limits<double>::quiet_NaN()};
  double residual_x{std::numeric_limits<double>::quiet_NaN()};

  int index(int i, int t) const { return i * horizon + t; }
};

struct PolicyInit {
  std::vector<int> hidden{64, 64};
  Activation activation{Activation::kRelu};
  std::uint64_t seed{0};
};

struct OuterLoopConfig {
  Ocp ocp;
  SampleSet train;
  SampleSet test;
  SamplingConfig sampling;  // for online PDDP resampling
  int outer_iters{20};
  double mu_init{10.0};
  bool multiple_shooting{false};
  bool resample_each_iter{false};     // PDDP only
  double early_stop_residual{0.0};    // 0 disables
  int workers{1};
  int eval_every{1};
  DdpSettings ddp;
  PolicyInit policy;
  FitConfig fit;  // primary is set by the algorithm
  std::uint64_t sobolev_seed{0};
};

struct IterationRecord {
  int k{0};
  std::uint64_t sim_calls{0};
  double train_cost{std::numeric_limits<double>::quiet_NaN()};
  double test_cost{std::numeric_limits<double>::quiet_NaN()};
  double consensus_u{std::numeric_limits<double>::quiet_NaN()};
  double consensus_x{std::numeric_limits<double>::quiet_NaN()};
  double oc_time_s{0.0};
  double learn_time_s{0.0};
  double ddp_iters_mean{0.0};
  std::uint64_t oc_policy_derivs{0};  // Jacobian/vjp sweeps in the OC phase
};

using IterationCallback = std::function<void(const IterationRecord&)>;

// Mean closed-loop policy cost on a sample set; +inf when a rollout
// diverges.
double mean_policy_cost(const Ocp& ocp, const SampleSet& samples,
                        const PolicyNet& net);

PolicyNet init_policy(const Ocp& ocp, const PolicyInit& init);

struct PddpResult {
  PolicyNet net;
  std::vector<IterationRecord> records;
};

// Alternates per-sample box-constrained DDP (warm-started from policy
// rollouts) with least-squares projection onto the policy class.
PddpResult run_pddp(const OuterLoopConfig& cfg,
                    const IterationCallback& on_iteration = {});

struct PlalResult {
  PolicyNet net;
  ConsensusState consensus;
  std::vector<IterationRecord> records;
};

// ADMM consensus loop: AL-augmented OC step, AL learning step, dual ascent.
// Multiple shooting decouples the OC states from the learning states so the
// OC phase never needs policy derivatives.
PlalResult run_plal(const OuterLoopConfig& cfg,
                    const IterationCallback& on_iteration = {});

// lambda <- lambda + mu (u - pi(x));  MS additionally
// gamma <- gamma + mu (x - sx) with pi evaluated at the shadow states.
// Residual norms are recomputed and stored.
void dual_update(ConsensusState& state,
                 const std::vector<Trajectory>& trajectories,
                 const PolicyNet& net, bool multiple_shooting);

struct WarmStartRow {
  int sample{0};
  int iters_cold{0};
  int iters_warm{0};
};

// DDP iteration counts from a midpoint (cold) start vs a policy-rollout
// warm start, per test problem.
std::vector<WarmStartRow> warmstart_benchmark(const Ocp& ocp,
                                              const PolicyNet& net,
                                              const SampleSet& test_set,
                                              const DdpSettings& settings);

}  // namespace ptoc

#endif  // PTOC_ALGOS_HPP_
