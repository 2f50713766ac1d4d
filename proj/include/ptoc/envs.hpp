#ifndef PTOC_ENVS_HPP_
#define PTOC_ENVS_HPP_

#include "ptoc/types.hpp"

namespace ptoc {

enum class SystemKind { kLqr, kPendulum, kDoublePendulum };

// Analytic benchmark system. Angles are raw (no wrapping) with theta = 0 at
// the stable downward equilibrium; discrete dynamics are semi-implicit Euler
// (velocities first, then positions). The double pendulum is fully actuated
// with generalized torques on both absolute joint angles.
struct SystemSpec {
  SystemKind kind{SystemKind::kLqr};
  int nx{2};
  int nu{1};
  double dt{0.1};
  double m1{1.0};
  double l1{1.0};
  double m2{1.0};
  double l2{1.0};
  double gravity{9.81};
  double damping{0.0};
  Vec u_min;
  Vec u_max;

  void validate() const;
};

SystemSpec lqr_spec(double dt = 0.1, double u_bound = 1.0);
SystemSpec pendulum_spec(double dt = 0.05, double u_bound = 2.5);
SystemSpec double_pendulum_spec(double dt = 0.05, double u_bound = 5.0);

struct DynamicsDerivs {
  Mat fx;  // nx x nx
  Mat fu;  // nx x nu
};

struct CostTerms {
  double value{0.0};
  Vec lx;
  Vec lu;
  Mat lxx;
  Mat luu;
  Mat lxu;  // nx x nu
};

// Quadratic penalty weights for 0.5*|p(x)-p_bar|^2_Wp + 0.5*|u|^2_Wu
// + 0.5*|x|^2_Wx. Terminal stage reuses the state terms scaled by
// terminal_scale and drops the control term.
struct CostWeights {
  Mat wp;
  Mat wu;
  Mat wx;
  double terminal_scale{10.0};
};

// Discrete dynamics x_{t+1} = f(x_t, u_t). Controls are used as given;
// callers clamp when box feasibility is required.
Vec step(const SystemSpec& spec, const Vec& x, const Vec& u);

// Exact analytic Jacobians of step at (x, u).
DynamicsDerivs step_derivs(const SystemSpec& spec, const Vec& x, const Vec& u);

// Task map p(x): end-effector position for pendulums, identity for the LQR.
Vec ee_pos(const SystemSpec& spec, const Vec& x);
Mat ee_jac(const SystemSpec& spec, const Vec& x);

// Stage cost with exact first derivatives; lxx uses the Gauss-Newton
// approximation of the p(x) term.
CostTerms stage_cost(const SystemSpec& spec, const CostWeights& weights,
                     const GoalDesc& goal, const Vec& x, const Vec& u);

// Terminal cost: state terms only, scaled by weights.terminal_scale.
CostTerms terminal_cost(const SystemSpec& spec, const CostWeights& weights,
                        const GoalDesc& goal, const Vec& x);

// Total mechanical energy, zero at rest in the downward configuration.
// Defined for the pendulum systems only.
double total_energy(const SystemSpec& spec, const Vec& x);

// Constant (A, B) matrices of the LQR system.
Mat lqr_A(const SystemSpec& spec);
Mat lqr_B(const SystemSpec& spec);

// Default quadratic weights for each benchmark task.
CostWeights default_weights(const SystemSpec& spec);
GoalDesc default_goal(const SystemSpec& spec);

}  // namespace ptoc

#endif  // PTOC_ENVS_HPP_
