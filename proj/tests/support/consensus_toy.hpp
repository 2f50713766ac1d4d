#ifndef PTOC_TESTS_CONSENSUS_TOY_HPP_
#define PTOC_TESTS_CONSENSUS_TOY_HPP_

#include <cmath>
#include <utility>

#include "ptoc/algos.hpp"

namespace ptoc_tests {

// Realizable consensus toy: targets generated by a frozen net, the OC step
// replaced by its closed form for R(u) = 0.5 |u - u_star|^2 so every
// trajectory-side optimum is exactly representable by the policy class.
// Returns the final (control, state) residual maxima; the state residual is
// NaN in single-shooting mode.
inline std::pair<double, double> run_consensus_toy(bool multiple_shooting,
                                                   int outer_iters) {
  using namespace ptoc;
  const int n = 16;
  const int nx = 2, nu = 1;
  const double mu = 10.0;
  const Vec lo = Vec::Constant(nu, -2.0), hi = Vec::Constant(nu, 2.0);

  PolicyNet frozen = PolicyNet::kaiming_init({nx, 8, nu}, Activation::kTanh,
                                             lo, hi, 1234);
  Rng rng(4321);
  std::vector<Vec> xs, u_star;
  for (int i = 0; i < n; ++i) {
    xs.push_back(rng.normal_vec(nx));
    u_star.push_back(forward(frozen, xs.back()));
  }

  // start near (not at) the frozen parameters
  PolicyNet net = frozen;
  {
    Vec theta = net.params_vector();
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      theta[i] += 0.05 * rng.normal();
    }
    net.set_params_vector(theta);
  }

  ConsensusState consensus;
  consensus.n_samples = n;
  consensus.horizon = 1;
  consensus.lambda.assign(n, Vec::Zero(nu));
  consensus.mu.assign(n, mu);
  if (multiple_shooting) {
    consensus.gamma.assign(n, Vec::Zero(nx));
    consensus.shadow = xs;
  }

  std::vector<Vec> us = u_star;
  std::vector<Trajectory> trajs(n);
  for (int k = 0; k < outer_iters; ++k) {
    // closed-form u step of min_u 0.5|u - u*|^2 + AL terms
    for (int i = 0; i < n; ++i) {
      const Vec anchor = multiple_shooting ? consensus.shadow[i] : xs[i];
      us[i] = (u_star[i] - consensus.lambda[i] + mu * forward(net, anchor)) /
              (1.0 + mu);
      trajs[i].xs = {xs[i], xs[i]};
      trajs[i].us = {us[i]};
    }

    CloneDataset data;
    data.nx = nx;
    data.nu = nu;
    for (int i = 0; i < n; ++i) {
      CloneRow row;
      row.sample = i;
      row.x = xs[i];
      row.u = us[i];
      row.lambda = consensus.lambda[i];
      row.mu = mu;
      if (multiple_shooting) row.gamma = consensus.gamma[i];
      data.rows.push_back(std::move(row));
      if (multiple_shooting) data.shadow.push_back(consensus.shadow[i]);
    }
    FitConfig fit_cfg;
    fit_cfg.primary =
        multiple_shooting ? PrimaryLoss::kAlMs : PrimaryLoss::kAl;
    fit_cfg.epochs = 400;
    fit_cfg.batch_size = n;
    // shrink Adam's noise ball as the consensus tightens
    fit_cfg.adam.lr = k < 20 ? 2e-3 : (k < 30 ? 2e-4 : 2e-5);
    fit_cfg.seed = split_seed(9, k);
    fit(net, data, fit_cfg);
    if (multiple_shooting) {
      consensus.shadow = data.shadow;
    }

    dual_update(consensus, trajs, net, multiple_shooting);
  }
  return {consensus.residual_u, consensus.residual_x};
}

}  // namespace ptoc_tests

#endif  // PTOC_TESTS_CONSENSUS_TOY_HPP_
