#include <doctest.h>

#include <cmath>
#include <numeric>

#include "ptoc/algos.hpp"
#include "ptoc/instrumentation.hpp"
#include "support/consensus_toy.hpp"

using namespace ptoc;

namespace {

OuterLoopConfig small_lqr_config(std::uint64_t seed = 0) {
  OuterLoopConfig cfg;
  cfg.ocp.spec = lqr_spec(0.1, 1.0);
  cfg.ocp.weights = default_weights(cfg.ocp.spec);
  cfg.ocp.horizon = 30;
  SamplingConfig sampling;
  sampling.x0_lo = Vec::Constant(2, -1.0);
  sampling.x0_hi = Vec::Ones(2);
  sampling.goal = default_goal(cfg.ocp.spec);
  cfg.sampling = sampling;
  cfg.train = sample_params(sampling, 4, split_seed(seed, 0));
  cfg.test = sample_params(sampling, 8, split_seed(seed, 3));
  cfg.outer_iters = 5;
  cfg.policy.hidden = {16, 16};
  cfg.policy.seed = split_seed(seed, 1);
  cfg.fit.epochs = 30;
  cfg.fit.batch_size = 32;
  cfg.fit.seed = split_seed(seed, 4);
  cfg.sobolev_seed = split_seed(seed, 2);
  return cfg;
}


}  // namespace

TEST_CASE("dual update: zero residuals leave multipliers unchanged") {
  PolicyNet net = PolicyNet::kaiming_init({2, 8, 1}, Activation::kTanh,
                                          Vec::Constant(1, -1.0),
                                          Vec::Constant(1, 1.0), 5);
  ConsensusState state;
  state.n_samples = 3;
  state.horizon = 2;
  state.lambda.assign(6, Vec::Constant(1, 0.7));
  state.mu.assign(6, 4.0);
  Rng rng(6);
  std::vector<Trajectory> trajs(3);
  for (int i = 0; i < 3; ++i) {
    trajs[i].xs.resize(3);
    trajs[i].us.resize(2);
    for (int t = 0; t < 2; ++t) {
      trajs[i].xs[t] = rng.normal_vec(2);
      trajs[i].us[t] = forward(net, trajs[i].xs[t]);
    }
    trajs[i].xs[2] = rng.normal_vec(2);
  }
  dual_update(state, trajs, net, false);
  CHECK(state.residual_u == 0.0);
  for (const auto& l : state.lambda) CHECK(l[0] == doctest::Approx(0.7));
}

TEST_CASE("dual update arithmetic: lambda = 0, mu = 2, r = 0.5 gives 1.0") {
  // a policy pinned to zero output by degenerate bounds
  PolicyNet net({1, 1}, Activation::kTanh, Vec::Zero(1), Vec::Zero(1));
  ConsensusState state;
  state.n_samples = 1;
  state.horizon = 1;
  state.lambda.assign(1, Vec::Zero(1));
  state.mu.assign(1, 2.0);
  std::vector<Trajectory> trajs(1);
  trajs[0].xs = {Vec::Zero(1), Vec::Zero(1)};
  trajs[0].us = {Vec::Constant(1, 0.5)};
  dual_update(state, trajs, net, false);
  CHECK(state.lambda[0][0] == doctest::Approx(1.0));
  CHECK(state.residual_u == doctest::Approx(0.5));
}

TEST_CASE("dual update grows affinely on a fixed residual") {
  PolicyNet net({1, 1}, Activation::kTanh, Vec::Zero(1), Vec::Zero(1));
  ConsensusState state;
  state.n_samples = 1;
  state.horizon = 1;
  state.lambda.assign(1, Vec::Constant(1, 0.25));
  state.mu.assign(1, 3.0);
  std::vector<Trajectory> trajs(1);
  trajs[0].xs = {Vec::Zero(1), Vec::Zero(1)};
  trajs[0].us = {Vec::Constant(1, 0.4)};
  for (int k = 1; k <= 5; ++k) {
    dual_update(state, trajs, net, false);
    CHECK(state.lambda[0][0] == doctest::Approx(0.25 + k * 3.0 * 0.4));
  }
}

TEST_CASE("pddp with one outer iteration is one OC batch plus one fit") {
  OuterLoopConfig cfg = small_lqr_config(11);
  cfg.outer_iters = 1;
  const auto before_batch = counters().solve_batch_calls.load();
  const auto before_fit = counters().fit_calls.load();
  run_pddp(cfg);
  CHECK(counters().solve_batch_calls.load() - before_batch == 1);
  CHECK(counters().fit_calls.load() - before_fit == 1);
}

TEST_CASE("pddp records are well-formed and the OC step never hurts") {
  OuterLoopConfig cfg = small_lqr_config(12);
  const auto result = run_pddp(cfg);
  REQUIRE(result.records.size() ==
          static_cast<std::size_t>(cfg.outer_iters) + 1);
  CHECK(result.records.front().k == 0);
  for (std::size_t i = 1; i < result.records.size(); ++i) {
    const auto& rec = result.records[i];
    CHECK(rec.k == static_cast<int>(i));
    CHECK(rec.sim_calls >= result.records[i - 1].sim_calls);
    CHECK(std::isfinite(rec.train_cost));
  }
  // learning should make the policy competitive on the test set
  CHECK(result.records.back().test_cost <
        result.records.front().test_cost);
}

TEST_CASE("both sobolev modes run through the training loops") {
  for (const auto mode :
       {SobolevConfig::Mode::kFull, SobolevConfig::Mode::kStochastic}) {
    OuterLoopConfig cfg = small_lqr_config(19);
    cfg.outer_iters = 2;
    cfg.fit.sobolev.mode = mode;
    cfg.fit.sobolev.weight = 0.1;
    const auto result = run_pddp(cfg);
    CHECK(result.records.size() == 3);
    CHECK(std::isfinite(result.records.back().test_cost));
  }
}

TEST_CASE("pddp online mode resamples the training set") {
  OuterLoopConfig cfg = small_lqr_config(13);
  cfg.outer_iters = 3;
  cfg.resample_each_iter = true;
  const auto result = run_pddp(cfg);  // must complete without failures
  CHECK(result.records.size() == 4);
}

TEST_CASE("plal on the constrained LQR closes the consensus gap") {
  OuterLoopConfig cfg = small_lqr_config(14);
  cfg.outer_iters = 12;
  cfg.mu_init = 10.0;
  cfg.fit.epochs = 40;
  const auto result = run_plal(cfg);
  REQUIRE(result.records.size() == 13);
  const double first = result.records[1].consensus_u;
  const double last = result.records.back().consensus_u;
  CHECK(std::isfinite(last));
  CHECK(last < first);
  CHECK(last < 0.05);
  CHECK(result.records.back().test_cost < result.records.front().test_cost);
}

TEST_CASE("plal rejects resampling and tiny mu") {
  OuterLoopConfig cfg = small_lqr_config(15);
  cfg.resample_each_iter = true;
  CHECK_THROWS_AS(run_plal(cfg), ConfigError);
  cfg.resample_each_iter = false;
  cfg.mu_init = 1e-9;
  CHECK_THROWS_AS(run_plal(cfg), ConfigError);
}

TEST_CASE("multiple shooting keeps policy derivatives out of the OC phase") {
  OuterLoopConfig cfg = small_lqr_config(16);
  cfg.outer_iters = 3;
  cfg.multiple_shooting = true;
  const auto result = run_plal(cfg);
  for (std::size_t i = 1; i < result.records.size(); ++i) {
    CHECK(result.records[i].oc_policy_derivs == 0);
  }

  // the single-shooting OC phase does differentiate the policy
  OuterLoopConfig cfg2 = small_lqr_config(16);
  cfg2.outer_iters = 2;
  const auto result2 = run_plal(cfg2);
  for (std::size_t i = 1; i < result2.records.size(); ++i) {
    CHECK(result2.records[i].oc_policy_derivs > 0);
  }
}

TEST_CASE("realizable consensus toy reaches 1e-6 residuals (single shooting)") {
  const auto [res_u, res_x] = ptoc_tests::run_consensus_toy(false, 48);
  CHECK(res_u < 1e-6);
  CHECK(std::isnan(res_x));
}

TEST_CASE("realizable consensus toy reaches 1e-6 residuals (multiple shooting)") {
  const auto [res_u, res_x] = ptoc_tests::run_consensus_toy(true, 48);
  CHECK(res_u < 1e-6);
  CHECK(res_x < 1e-6);
}

TEST_CASE("disabling box handling keeps the clone-loss floor honest") {
  OuterLoopConfig cfg = small_lqr_config(17);
  cfg.outer_iters = 2;
  cfg.ddp.respect_bounds = false;
  // tight box so the unconstrained OC targets leave it
  cfg.ocp.spec.u_min[0] = -0.2;
  cfg.ocp.spec.u_max[0] = 0.2;
  cfg.policy.hidden = {16};
  const auto result = run_pddp(cfg);  // internal floor assertion must hold
  CHECK(result.records.size() == 3);
}

TEST_CASE("pddp runs end to end on the double pendulum") {
  OuterLoopConfig cfg;
  cfg.ocp.spec = double_pendulum_spec();
  cfg.ocp.weights = default_weights(cfg.ocp.spec);
  cfg.ocp.horizon = 60;
  SamplingConfig sampling;
  sampling.x0_lo = Vec::Constant(4, -0.3);
  sampling.x0_hi = Vec::Constant(4, 0.3);
  sampling.goal = default_goal(cfg.ocp.spec);
  cfg.sampling = sampling;
  cfg.train = sample_params(sampling, 4, 1);
  cfg.test = sample_params(sampling, 4, 2);
  cfg.outer_iters = 2;
  cfg.policy.hidden = {16};
  cfg.fit.epochs = 10;
  const auto result = run_pddp(cfg);
  REQUIRE(result.records.size() == 3);
  CHECK(std::isfinite(result.records.back().train_cost));
  CHECK(result.records.back().test_cost < result.records.front().test_cost);
}

TEST_CASE("warmstart benchmark: zero policy equals the cold start") {
  Ocp ocp;
  ocp.spec = lqr_spec(0.1, 1.0);
  ocp.weights = default_weights(ocp.spec);
  ocp.horizon = 25;
  PolicyNet zero({2, 8, 1}, Activation::kRelu, ocp.spec.u_min, ocp.spec.u_max);
  SamplingConfig sampling;
  sampling.x0_lo = Vec::Constant(2, -1.0);
  sampling.x0_hi = Vec::Ones(2);
  sampling.goal = default_goal(ocp.spec);
  const SampleSet set = sample_params(sampling, 8, 3);
  DdpSettings settings;
  const auto rows = warmstart_benchmark(ocp, zero, set, settings);
  REQUIRE(rows.size() == 8);
  for (const auto& row : rows) {
    CHECK(row.iters_cold == row.iters_warm);
  }
}

TEST_CASE("warmstart benchmark: a trained policy never hurts the solver") {
  OuterLoopConfig cfg = small_lqr_config(18);
  cfg.outer_iters = 8;
  cfg.fit.epochs = 60;
  const auto trained = run_pddp(cfg);
  const SampleSet fresh = sample_params(cfg.sampling, 16, 777);
  const auto rows =
      warmstart_benchmark(cfg.ocp, trained.net, fresh, cfg.ddp);
  std::vector<int> cold, warm;
  for (const auto& row : rows) {
    cold.push_back(row.iters_cold);
    warm.push_back(row.iters_warm);
  }
  std::sort(cold.begin(), cold.end());
  std::sort(warm.begin(), warm.end());
  CHECK(warm[warm.size() / 2] <= cold[cold.size() / 2]);
}
