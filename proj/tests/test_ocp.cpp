#include <doctest.h>

#include <cmath>

#include "ptoc/ocp.hpp"
#include "ptoc/rng.hpp"

using namespace ptoc;

namespace {

Ocp lqr_ocp() {
  Ocp ocp;
  ocp.spec = lqr_spec();
  ocp.weights = default_weights(ocp.spec);
  ocp.horizon = 50;
  return ocp;
}

ProblemParams origin_beta(const Ocp& ocp) {
  ProblemParams beta;
  beta.x0 = Vec::Zero(ocp.spec.nx);
  beta.goal = default_goal(ocp.spec);
  return beta;
}

}  // namespace

TEST_CASE("zero-parameter policy on a symmetric box stays at the origin") {
  const Ocp ocp = lqr_ocp();
  PolicyNet net({2, 8, 1}, Activation::kRelu, ocp.spec.u_min, ocp.spec.u_max);
  const Trajectory traj = rollout_policy(ocp, origin_beta(ocp), net);
  CHECK(traj.cost == 0.0);
  for (const auto& u : traj.us) CHECK(u.norm() == 0.0);
  for (const auto& x : traj.xs) CHECK(x.norm() == 0.0);
  CHECK(traj.ks.empty());
  CHECK(traj.Ks.empty());
}

TEST_CASE("T=1 rollout cost unrolls the definition once") {
  Ocp ocp = lqr_ocp();
  ocp.horizon = 1;
  ProblemParams beta = origin_beta(ocp);
  beta.x0 << 0.4, -0.2;
  PolicyNet net = PolicyNet::kaiming_init({2, 8, 1}, Activation::kTanh,
                                          ocp.spec.u_min, ocp.spec.u_max, 3);
  const Trajectory traj = rollout_policy(ocp, beta, net);
  const Vec u0 = forward(net, beta.x0);
  const Vec x1 = step(ocp.spec, beta.x0, u0);
  const double expected =
      stage_cost(ocp.spec, ocp.weights, beta.goal, beta.x0, u0).value +
      terminal_cost(ocp.spec, ocp.weights, beta.goal, x1).value;
  CHECK(traj.cost == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("policy rollout cost equals stage-wise re-evaluation") {
  Ocp ocp;
  ocp.spec = pendulum_spec();
  ocp.weights = default_weights(ocp.spec);
  ocp.horizon = 60;
  ProblemParams beta;
  beta.x0 = Vec(2);
  beta.x0 << 0.4, 0.0;
  beta.goal = default_goal(ocp.spec);
  PolicyNet net = PolicyNet::kaiming_init({2, 32, 1}, Activation::kRelu,
                                          ocp.spec.u_min, ocp.spec.u_max, 0);
  const Trajectory traj = rollout_policy(ocp, beta, net);
  double re_eval = 0.0;
  for (int t = 0; t < ocp.horizon; ++t) {
    re_eval += stage_cost(ocp.spec, ocp.weights, beta.goal, traj.xs[t],
                          traj.us[t])
                   .value;
  }
  re_eval +=
      terminal_cost(ocp.spec, ocp.weights, beta.goal, traj.xs.back()).value;
  CHECK(std::abs(traj.cost - re_eval) < 1e-10);
}

TEST_CASE("eval_cost: zeros from the origin cost nothing") {
  const Ocp ocp = lqr_ocp();
  const std::vector<Vec> us(ocp.horizon, Vec::Zero(1));
  CHECK(eval_cost(ocp, origin_beta(ocp), us) == 0.0);
}

TEST_CASE("eval_cost is additive over stages") {
  const Ocp ocp = lqr_ocp();
  ProblemParams beta = origin_beta(ocp);
  beta.x0 << 0.7, 0.1;
  Rng rng(5);
  std::vector<Vec> us;
  for (int t = 0; t < ocp.horizon; ++t) us.push_back(0.3 * rng.normal_vec(1));
  const Trajectory traj = rollout_controls(ocp, beta, us);
  double sum = 0.0;
  for (int t = 0; t < ocp.horizon; ++t) {
    sum += stage_cost(ocp.spec, ocp.weights, beta.goal, traj.xs[t], us[t]).value;
  }
  sum += terminal_cost(ocp.spec, ocp.weights, beta.goal, traj.xs.back()).value;
  CHECK(std::abs(traj.cost - sum) < 1e-12 * std::max(1.0, sum));
}

TEST_CASE("eval_cost agrees with a recorded policy rollout") {
  const Ocp ocp = lqr_ocp();
  ProblemParams beta = origin_beta(ocp);
  beta.x0 << -0.5, 0.9;
  PolicyNet net = PolicyNet::kaiming_init({2, 16, 1}, Activation::kTanh,
                                          ocp.spec.u_min, ocp.spec.u_max, 9);
  const Trajectory traj = rollout_policy(ocp, beta, net);
  CHECK(eval_cost(ocp, beta, traj.us) == doctest::Approx(traj.cost).epsilon(1e-14));
}

TEST_CASE("eval_cost rejects wrong-length control sequences") {
  const Ocp ocp = lqr_ocp();
  const std::vector<Vec> us(ocp.horizon - 1, Vec::Zero(1));
  CHECK_THROWS_AS(eval_cost(ocp, origin_beta(ocp), us), std::invalid_argument);
}

TEST_CASE("diverged rollouts carry the step index") {
  Ocp ocp = lqr_ocp();
  ocp.spec.u_max[0] = 1e308;
  ocp.spec.u_min[0] = -1e308;
  ocp.spec.dt = 10.0;
  ocp.horizon = 8;
  ProblemParams beta = origin_beta(ocp);
  beta.x0 << 1.0, 1.0;
  std::vector<Vec> us(ocp.horizon, Vec::Constant(1, 1e308));
  try {
    eval_cost(ocp, beta, us);
    FAIL("expected DivergedRollout");
  } catch (const DivergedRollout& e) {
    CHECK(e.step() >= 1);
    CHECK(e.step() <= ocp.horizon);
  }
}

TEST_CASE("sample_params is reproducible from its seed") {
  SamplingConfig cfg;
  cfg.x0_lo = Vec::Constant(2, -1.0);
  cfg.x0_hi = Vec::Constant(2, 1.0);
  cfg.goal = GoalDesc{GoalDesc::Kind::kState, Vec::Zero(2)};
  const SampleSet a = sample_params(cfg, 32, 42);
  const SampleSet b = sample_params(cfg, 32, 42);
  REQUIRE(a.size() == b.size());
  for (int i = 0; i < a.size(); ++i) {
    CHECK((a.params[i].x0 - b.params[i].x0).norm() == 0.0);
  }
}

TEST_CASE("degenerate sampling box returns its single point") {
  SamplingConfig cfg;
  cfg.x0_lo = Vec::Constant(3, 0.25);
  cfg.x0_hi = Vec::Constant(3, 0.25);
  cfg.goal = GoalDesc{GoalDesc::Kind::kState, Vec::Zero(3)};
  const SampleSet set = sample_params(cfg, 1, 7);
  CHECK((set.params[0].x0 - Vec::Constant(3, 0.25)).norm() == 0.0);
}

TEST_CASE("sample mean approaches the box midpoint") {
  SamplingConfig cfg;
  cfg.x0_lo = Vec::Constant(2, -2.0);
  cfg.x0_hi = Vec::Constant(2, 6.0);
  cfg.goal = GoalDesc{GoalDesc::Kind::kState, Vec::Zero(2)};
  const int n = 1000;
  const SampleSet set = sample_params(cfg, n, 2024);
  Vec mean = Vec::Zero(2);
  for (const auto& beta : set.params) mean += beta.x0;
  mean /= n;
  // sigma of U(-2, 6) is 8/sqrt(12)
  const double three_sigma = 3.0 * (8.0 / std::sqrt(12.0)) / std::sqrt(n);
  for (int i = 0; i < 2; ++i) {
    CHECK(std::abs(mean[i] - 2.0) < three_sigma);
  }
}

TEST_CASE("empty sampling box is a config error") {
  SamplingConfig cfg;
  CHECK_THROWS_AS(sample_params(cfg, 4, 0), ConfigError);
  cfg.x0_lo = Vec::Constant(2, 1.0);
  cfg.x0_hi = Vec::Constant(2, -1.0);
  CHECK_THROWS_AS(sample_params(cfg, 4, 0), ConfigError);
}
