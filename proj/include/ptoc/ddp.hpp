#ifndef PTOC_DDP_HPP_
#define PTOC_DDP_HPP_

#include <optional>
#include <variant>

#include "ptoc/ocp.hpp"

namespace ptoc {

struct DdpSettings {
  int max_iters{50};
  // convergence on |sum_t k_t' Qu_t|, the expected directional derivative
  double grad_tol{1e-10};
  double ls_backtrack{0.5};
  double ls_alpha_min{0x1p-10};
  double ls_accept_ratio{0.0};  // accept when actual/expected > this
  // Levenberg-Marquardt schedule on Quu. Starts at reg_init; jumps to
  // reg_engage on the first failure, then multiplies.
  double reg_init{0.0};
  double reg_engage{1e-6};
  double reg_up{10.0};
  double reg_down{2.0};
  double reg_max{1e10};
  int boxqp_max_iters{100};
  double boxqp_tol{1e-12};
  bool respect_bounds{true};  // false = -C ablation: no clamp, no box-QP

  void validate() const;
};

// Per-step quadratic attractors with fixed references:
// 0.5 mu_t |u_t - u_ref_t|^2 and 0.5 mu_t |x_t - x_ref_t|^2.
// Empty vectors disable a term. `constant` is added to the reported
// objective (e.g. the -|lambda|^2/(2 mu) completion terms).
struct ExtraQuadCost {
  std::vector<double> mu;
  std::vector<Vec> u_ref;
  std::vector<Vec> x_ref;
  double constant{0.0};
};

// Penalty 0.5 mu_t |u_t + shift_t - pi(x_t)|^2 evaluated along the rollout,
// with shift_t = lambda_t / mu_t. Expanded by Gauss-Newton using the policy
// input Jacobian.
struct PolicyAttractor {
  const PolicyNet* net{nullptr};
  std::vector<double> mu;
  std::vector<Vec> shift;
  double constant{0.0};
};

using ExtraCost = std::variant<std::monostate, ExtraQuadCost, PolicyAttractor>;

struct DdpReport {
  int iterations{0};  // accepted steps
  double final_cost{0.0};  // objective including extra terms
  double final_grad{0.0};
  bool converged{false};
  std::vector<double> cost_trace;  // objective after each accepted step
  std::vector<double> ls_ratio_trace;  // actual/expected decrease per accept
};

struct BoxQpResult {
  Vec x;
  std::vector<bool> clamped;
  Eigen::LLT<Mat> free_llt;  // factorization of H_ff (regularized)
  std::vector<int> free_idx;
  bool failed{false};  // H_ff not positive definite
};

// min 0.5 x'Hx + g'x subject to lo <= x <= hi, projected-Newton iteration
// warm-started at x0 (clamped into the box).
BoxQpResult boxqp_solve(const Mat& H, const Vec& g, const Vec& lo,
                        const Vec& hi, const Vec& x0, int max_iters,
                        double tol);

// Stage expansions consumed by the backward pass.
struct StageExpansion {
  CostTerms cost;
  DynamicsDerivs dyn;
};

struct BackwardPassResult {
  std::vector<Vec> k;
  std::vector<Mat> K;
  double d1{0.0};  // sum k'Qu
  double d2{0.0};  // 0.5 sum k'Quu k
  bool failed{false};  // needs more regularization
};

// Control-bounded backward sweep. `bounds_lo/hi` are per-step boxes for
// u_t + du; regularization is added to Quu. K rows for clamped dimensions
// are zero.
BackwardPassResult backward_pass(const std::vector<StageExpansion>& stages,
                                 const CostTerms& terminal,
                                 const std::vector<Vec>& us, const Vec& lo,
                                 const Vec& hi, double reg,
                                 const DdpSettings& settings);

// Rollout of the incumbent plus alpha * k + K dx through the true dynamics,
// clamped into the box. Returns nullopt when a non-finite state appears.
std::optional<Trajectory> forward_pass(const Ocp& ocp,
                                       const ProblemParams& beta,
                                       const Trajectory& ref,
                                       const std::vector<Vec>& k,
                                       const std::vector<Mat>& K, double alpha,
                                       const DdpSettings& settings);

// Objective including extra terms for a given rolled trajectory (the
// trajectory's own cost field carries the base cost).
double augmented_cost(const Trajectory& traj, const ExtraCost& extra);

// Box-constrained iLQR solve from a warm start (clamped before the first
// rollout). The returned trajectory carries feedforwards and gains from a
// final backward sweep around the solution.
std::pair<Trajectory, DdpReport> solve(const Ocp& ocp,
                                       const ProblemParams& beta,
                                       const std::vector<Vec>& warm_start,
                                       const ExtraCost& extra,
                                       const DdpSettings& settings);

struct SolveOutcome {
  Trajectory traj;
  DdpReport report;
  bool ok{false};
  std::string error;
};

// Independent per-sample solves; results are ordered like the inputs and
// identical for any worker count. Failures are recorded per sample.
std::vector<SolveOutcome> solve_batch(const Ocp& ocp, const SampleSet& samples,
                                      const std::vector<std::vector<Vec>>& warm_starts,
                                      const std::vector<ExtraCost>& extras,
                                      const DdpSettings& settings,
                                      int workers = 1);

}  // namespace ptoc

#endif  // PTOC_DDP_HPP_
