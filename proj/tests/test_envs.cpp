#include <doctest.h>

#include <cmath>

#include "ptoc/envs.hpp"
#include "ptoc/oracle.hpp"
#include "ptoc/rng.hpp"

using namespace ptoc;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// classical RK4 on the continuous pendulum dynamics, used as an
// integrator-independent reference
Vec pendulum_rk4(const SystemSpec& s, Vec x, double u, double dt, int substeps) {
  auto f = [&](const Vec& state) {
    Vec dx(2);
    dx[0] = state[1];
    dx[1] = (u - s.damping * state[1] -
             s.m1 * s.gravity * s.l1 * std::sin(state[0])) /
            (s.m1 * s.l1 * s.l1);
    return dx;
  };
  const double h = dt / substeps;
  for (int i = 0; i < substeps; ++i) {
    const Vec k1 = f(x);
    const Vec k2 = f(x + 0.5 * h * k1);
    const Vec k3 = f(x + 0.5 * h * k2);
    const Vec k4 = f(x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

double rel_err(const Mat& got, const Mat& want) {
  const double denom = std::max(1.0, want.norm());
  return (got - want).norm() / denom;
}

}  // namespace

TEST_CASE("lqr step holds the origin fixed") {
  const SystemSpec s = lqr_spec();
  const Vec next = step(s, vec2(0, 0), Vec::Zero(1));
  CHECK(next.norm() == 0.0);
}

TEST_CASE("pendulum stays at the stable equilibrium") {
  const SystemSpec s = pendulum_spec();
  const Vec next = step(s, vec2(0, 0), Vec::Zero(1));
  CHECK(next.norm() == 0.0);
}

TEST_CASE("pendulum semi-implicit Euler tracks RK4 over one step") {
  SystemSpec s = pendulum_spec();
  s.m1 = 1.0;
  s.l1 = 1.0;
  s.gravity = 9.81;
  s.dt = 0.05;
  s.damping = 0.0;
  const Vec x0 = vec2(M_PI / 2.0, 0.0);
  const Vec got = step(s, x0, Vec::Zero(1));
  const Vec ref = pendulum_rk4(s, x0, 0.0, s.dt, 64);
  CHECK(rel_err(got, ref) < 1e-2);
}

TEST_CASE("lqr derivatives equal the constant system matrices") {
  const SystemSpec s = lqr_spec();
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const Vec x = rng.normal_vec(2);
    const Vec u = rng.normal_vec(1);
    const DynamicsDerivs d = step_derivs(s, x, u);
    CHECK((d.fx - lqr_A(s)).norm() == 0.0);
    CHECK((d.fu - lqr_B(s)).norm() == 0.0);
  }
}

TEST_CASE("step derivatives match finite differences on every system") {
  const std::vector<SystemSpec> specs = {lqr_spec(), pendulum_spec(),
                                         double_pendulum_spec()};
  Rng rng(7);
  for (const SystemSpec& s : specs) {
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
      const Vec x = rng.normal_vec(s.nx);
      const Vec u = rng.normal_vec(s.nu);
      const DynamicsDerivs d = step_derivs(s, x, u);
      const Mat fx_fd = finite_diff_jac(
          [&](const Vec& xe) { return step(s, xe, u); }, x);
      const Mat fu_fd = finite_diff_jac(
          [&](const Vec& ue) { return step(s, x, ue); }, u);
      worst = std::max({worst, rel_err(d.fx, fx_fd), rel_err(d.fu, fu_fd)});
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("double pendulum derivatives at 100 random seeds") {
  const SystemSpec s = double_pendulum_spec();
  double worst = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const Vec x = rng.normal_vec(4);
    const Vec u = rng.normal_vec(2);
    const DynamicsDerivs d = step_derivs(s, x, u);
    const Mat fx_fd =
        finite_diff_jac([&](const Vec& xe) { return step(s, xe, u); }, x);
    const Mat fu_fd =
        finite_diff_jac([&](const Vec& ue) { return step(s, x, ue); }, u);
    worst = std::max({worst, rel_err(d.fx, fx_fd), rel_err(d.fu, fu_fd)});
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("undamped pendulum energy drift stays within 5% at dt=0.01") {
  for (SystemSpec s : {pendulum_spec(), double_pendulum_spec()}) {
    s.dt = 0.01;
    s.damping = 0.0;
    Vec x = Vec::Zero(s.nx);
    x[0] = s.nx == 2 ? 1.2 : 0.7;  // swing with meaningful energy
    if (s.nx == 4) x[1] = 0.4;
    const Vec u = Vec::Zero(s.nu);
    const double e0 = total_energy(s, x);
    REQUIRE(e0 > 0.0);
    double max_drift = 0.0;
    for (int t = 0; t < 100; ++t) {
      x = step(s, x, u);
      max_drift = std::max(max_drift, std::abs(total_energy(s, x) - e0));
    }
    CHECK(max_drift < 0.05 * e0);
  }
}

TEST_CASE("stage cost vanishes with zero gradients at the goal") {
  const SystemSpec s = pendulum_spec();
  const CostWeights w = default_weights(s);
  GoalDesc goal;
  goal.kind = GoalDesc::Kind::kEndEffector;
  const Vec x_up = vec2(M_PI, 0.0);
  goal.target = ee_pos(s, x_up);
  const CostTerms c = stage_cost(s, w, goal, x_up, Vec::Zero(1));
  CHECK(c.value == doctest::Approx(0.0));
  CHECK(c.lx.norm() == doctest::Approx(0.0));
  CHECK(c.lu.norm() == doctest::Approx(0.0));
}

TEST_CASE("lqr stage cost is the exact quadratic") {
  const SystemSpec s = lqr_spec();
  const CostWeights w = default_weights(s);
  const GoalDesc goal = default_goal(s);
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec x = rng.normal_vec(2);
    const Vec u = rng.normal_vec(1);
    const CostTerms c = stage_cost(s, w, goal, x, u);
    CHECK(c.value ==
          doctest::Approx(0.5 * x.dot(w.wp * x) + 0.5 * u.dot(w.wu * u)));
    CHECK((c.lxx - (w.wp + w.wx)).norm() == 0.0);
  }
}

TEST_CASE("pendulum cost gradient matches finite differences") {
  const SystemSpec s = pendulum_spec();
  const CostWeights w = default_weights(s);
  const GoalDesc goal = default_goal(s);
  Rng rng(13);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Vec x = rng.normal_vec(2);
    const Vec u = rng.normal_vec(1);
    const CostTerms c = stage_cost(s, w, goal, x, u);
    const Vec lx_fd = finite_diff_grad(
        [&](const Vec& xe) { return stage_cost(s, w, goal, xe, u).value; }, x);
    const Vec lu_fd = finite_diff_grad(
        [&](const Vec& ue) { return stage_cost(s, w, goal, x, ue).value; }, u);
    worst = std::max({worst, rel_err(c.lx, lx_fd), rel_err(c.lu, lu_fd)});
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("terminal cost scales the state terms and drops the control term") {
  const SystemSpec s = pendulum_spec();
  const CostWeights w = default_weights(s);
  const GoalDesc goal = default_goal(s);
  const Vec x = vec2(0.3, -0.2);
  const CostTerms stage = stage_cost(s, w, goal, x, Vec::Zero(1));
  const CostTerms term = terminal_cost(s, w, goal, x);
  CHECK(term.value == doctest::Approx(w.terminal_scale * stage.value));
  CHECK(term.lu.norm() == 0.0);
}

TEST_CASE("cost value is independent of term accumulation order") {
  const SystemSpec s = double_pendulum_spec();
  const CostWeights w = default_weights(s);
  const GoalDesc goal = default_goal(s);
  Rng rng(17);
  const Vec x = rng.normal_vec(4);
  const Vec u = rng.normal_vec(2);
  const double value = stage_cost(s, w, goal, x, u).value;
  // accumulate the three quadratic terms in the opposite order
  const Vec p = ee_pos(s, x);
  const double wu_term = 0.5 * u.dot(w.wu * u);
  const double wx_term = 0.5 * x.dot(w.wx * x);
  const double wp_term = 0.5 * (p - goal.target).dot(w.wp * (p - goal.target));
  const double reordered = wu_term + (wx_term + wp_term);
  CHECK(value == doctest::Approx(reordered).epsilon(1e-12));
}

TEST_CASE("dimension mismatches are rejected") {
  const SystemSpec s = lqr_spec();
  CHECK_THROWS_AS(step(s, Vec::Zero(3), Vec::Zero(1)), std::invalid_argument);
  CHECK_THROWS_AS(step(s, Vec::Zero(2), Vec::Zero(2)), std::invalid_argument);
}

TEST_CASE("spec validation rejects inverted bounds") {
  SystemSpec s = lqr_spec();
  s.u_min[0] = 2.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}
