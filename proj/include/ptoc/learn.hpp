#ifndef PTOC_LEARN_HPP_
#define PTOC_LEARN_HPP_

#include "ptoc/policy.hpp"
#include "ptoc/rng.hpp"
#include "ptoc/types.hpp"

namespace ptoc {

// One supervision tuple gathered from an OC solve. `x` is the
// dynamics-consistent state (the first-kind state in multiple shooting);
// the learning-side shadow states live in CloneDataset::shadow, aligned by
// row index, and are co-optimized with theta.
struct CloneRow {
  int sample{0};
  int t{0};
  Vec x;
  Vec u;
  Mat K;       // gain target, nu x nx; size 0 when absent
  Vec lambda;  // control-consensus multiplier (AL modes)
  double mu{0.0};
  Vec gamma;   // state-consensus multiplier (multiple shooting)
};

struct CloneDataset {
  int nx{0};
  int nu{0};
  std::vector<CloneRow> rows;
  std::vector<Vec> shadow;  // one entry per row in multiple-shooting mode

  int size() const { return static_cast<int>(rows.size()); }
};

struct SobolevConfig {
  enum class Mode { kOff, kFull, kStochastic };
  Mode mode{Mode::kOff};
  double weight{0.1};
  int directions{1};          // directions per point, stochastic mode
  bool unbiased_scale{false}; // multiply stochastic loss by nu
  std::uint64_t seed{0};      // direction stream
};

using Batch = std::vector<int>;

struct LossResult {
  double value{0.0};
  ParamGrad grad;
};

// sum over the batch of 0.5 |u_t - pi(x_t)|^2
LossResult clone_loss(const PolicyNet& net, const CloneDataset& data,
                      const Batch& batch);

// 0.5 sum |K_t - dpi/dx(x_t)|_F^2, Jacobians from basis-vector sweeps.
LossResult sobolev_loss_full(const PolicyNet& net, const CloneDataset& data,
                             const Batch& batch);

// 0.5 sum |K_t' v - d(v' pi)/dx (x_t)|^2 over fresh unit-sphere directions;
// exactly one reverse-over-reverse sweep per direction.
LossResult sobolev_loss_stochastic(const PolicyNet& net,
                                   const CloneDataset& data,
                                   const Batch& batch,
                                   const SobolevConfig& cfg, Rng& directions);

struct AlLossResult {
  double value{0.0};
  ParamGrad grad;
  std::vector<Vec> shadow_grad;  // aligned with batch order; MS mode only
};

// Augmented-Lagrangian policy loss. Non-MS:
//   sum lambda'(u - pi(x)) + mu/2 |u - pi(x)|^2, gradient w.r.t. theta.
// MS: sum mu/2 |u + lambda/mu - pi(sx)|^2 + mu/2 |x + gamma/mu - sx|^2
//   - (|lambda|^2 + |gamma|^2)/(2 mu), with gradients w.r.t. theta and the
//   shadow states sx.
AlLossResult al_policy_loss(const PolicyNet& net, const CloneDataset& data,
                            const Batch& batch, bool multiple_shooting);

// Lower bound on the clone loss when targets leave the control box:
// 0.5 * sum dist(u_t, [u_min, u_max])^2. The tanh output layer makes this a
// hard floor for any theta.
double clone_loss_floor(const CloneDataset& data, const Vec& u_min,
                        const Vec& u_max);

struct AdamConfig {
  double lr{1e-3};
  double beta1{0.9};
  double beta2{0.999};
  double eps{1e-8};
};

struct AdamState {
  AdamConfig cfg;
  std::int64_t step{0};
  Vec m;
  Vec v;

  explicit AdamState(AdamConfig c = {}) : cfg(c) {}
  void ensure_size(Eigen::Index n);
};

// Standard bias-corrected Adam update, in place.
void adam_step(AdamState& state, Vec& params, const Vec& grad);

enum class PrimaryLoss { kClone, kAl, kAlMs };

struct FitConfig {
  PrimaryLoss primary{PrimaryLoss::kClone};
  SobolevConfig sobolev;
  int epochs{20};
  int batch_size{64};
  AdamConfig adam;
  std::uint64_t seed{0};  // shuffling stream
};

struct FitReport {
  std::vector<double> epoch_loss;  // summed batch losses per epoch
};

// Mini-batch Adam over the shuffled dataset. In MS mode the shadow states in
// `data` are optimized jointly with theta by a second Adam state over the
// concatenated shadow vector. Deterministic for fixed seeds.
FitReport fit(PolicyNet& net, CloneDataset& data, const FitConfig& cfg);

}  // namespace ptoc

#endif  // PTOC_LEARN_HPP_
