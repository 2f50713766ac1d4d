#include "ptoc/algos.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "ptoc/instrumentation.hpp"

namespace ptoc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Vec box_midpoint(const SystemSpec& spec) {
  return 0.5 * (spec.u_min + spec.u_max);
}

std::vector<Vec> midpoint_controls(const Ocp& ocp) {
  return std::vector<Vec>(ocp.horizon, box_midpoint(ocp.spec));
}

// Policy rollout warm starts; a diverged rollout falls back to midpoint
// controls.
struct WarmStarts {
  std::vector<std::vector<Vec>> us;
  std::vector<double> costs;  // +inf where the rollout diverged
  std::vector<Trajectory> trajectories;  // empty entry on divergence
};

WarmStarts policy_warm_starts(const Ocp& ocp, const SampleSet& samples,
                              const PolicyNet& net) {
  WarmStarts ws;
  ws.us.resize(samples.size());
  ws.costs.resize(samples.size());
  ws.trajectories.resize(samples.size());
  for (int i = 0; i < samples.size(); ++i) {
    try {
      Trajectory traj = rollout_policy(ocp, samples.params[i], net);
      ws.us[i] = traj.us;
      ws.costs[i] = traj.cost;
      ws.trajectories[i] = std::move(traj);
    } catch (const DivergedRollout&) {
      ws.us[i] = midpoint_controls(ocp);
      ws.costs[i] = std::numeric_limits<double>::infinity();
    }
  }
  return ws;
}

std::uint64_t policy_deriv_count() {
  return counters().policy_jacobian.load(std::memory_order_relaxed) +
         counters().policy_vjp.load(std::memory_order_relaxed) +
         counters().sobolev_sweeps.load(std::memory_order_relaxed);
}

void check_failure_rate(const std::vector<SolveOutcome>& outcomes) {
  int failures = 0;
  std::string first_error;
  for (const auto& o : outcomes) {
    if (!o.ok) {
      if (failures == 0) first_error = o.error;
      ++failures;
    }
  }
  if (2 * failures > static_cast<int>(outcomes.size())) {
    throw TrainingAbort("OC solver failed on " + std::to_string(failures) +
                        "/" + std::to_string(outcomes.size()) +
                        " samples; first error: " + first_error);
  }
}

double mean_ok_cost(const std::vector<SolveOutcome>& outcomes) {
  double sum = 0.0;
  int n = 0;
  for (const auto& o : outcomes) {
    if (o.ok) {
      sum += o.traj.cost;
      ++n;
    }
  }
  return n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

double mean_ddp_iters(const std::vector<SolveOutcome>& outcomes) {
  double sum = 0.0;
  int n = 0;
  for (const auto& o : outcomes) {
    if (o.ok) {
      sum += o.report.iterations;
      ++n;
    }
  }
  return n > 0 ? sum / n : 0.0;
}

// The tanh output layer keeps pi inside the box, so targets outside it put a
// hard floor under the clone loss. Violations indicate a broken network.
void assert_clone_floor(const PolicyNet& net, const CloneDataset& data,
                        const Ocp& ocp) {
  const double floor = clone_loss_floor(data, ocp.spec.u_min, ocp.spec.u_max);
  if (floor <= 0.0) return;
  Batch all(data.size());
  std::iota(all.begin(), all.end(), 0);
  const double loss = clone_loss(net, data, all).value;
  if (loss < floor - 1e-10) {
    throw std::logic_error("clone loss below its box-distance floor");
  }
}

}  // namespace

double mean_policy_cost(const Ocp& ocp, const SampleSet& samples,
                        const PolicyNet& net) {
  double sum = 0.0;
  for (int i = 0; i < samples.size(); ++i) {
    try {
      sum += rollout_policy(ocp, samples.params[i], net).cost;
    } catch (const DivergedRollout&) {
      return std::numeric_limits<double>::infinity();
    }
  }
  return sum / samples.size();
}

PolicyNet init_policy(const Ocp& ocp, const PolicyInit& init) {
  std::vector<int> sizes;
  sizes.push_back(ocp.spec.nx);
  sizes.insert(sizes.end(), init.hidden.begin(), init.hidden.end());
  sizes.push_back(ocp.spec.nu);
  return PolicyNet::kaiming_init(sizes, init.activation, ocp.spec.u_min,
                                 ocp.spec.u_max, init.seed);
}

PddpResult run_pddp(const OuterLoopConfig& cfg,
                    const IterationCallback& on_iteration) {
  if (cfg.outer_iters < 1 || cfg.train.size() < 1) {
    throw ConfigError("run_pddp: outer_iters and train set must be nonempty");
  }
  PddpResult result{init_policy(cfg.ocp, cfg.policy), {}};
  PolicyNet& net = result.net;
  SampleSet samples = cfg.train;

  IterationRecord rec0;
  rec0.k = 0;
  rec0.train_cost = mean_policy_cost(cfg.ocp, samples, net);
  rec0.test_cost = mean_policy_cost(cfg.ocp, cfg.test, net);
  rec0.sim_calls = counters().sim_steps.load();
  result.records.push_back(rec0);
  if (on_iteration) on_iteration(rec0);

  for (int k = 1; k <= cfg.outer_iters; ++k) {
    if (cfg.resample_each_iter && k > 1) {
      samples = sample_params(cfg.sampling, cfg.train.size(),
                              split_seed(cfg.train.seed, k));
    }

    IterationRecord rec;
    rec.k = k;

    const auto oc_start = Clock::now();
    const std::uint64_t derivs_before = policy_deriv_count();
    const WarmStarts warm = policy_warm_starts(cfg.ocp, samples, net);
    std::vector<ExtraCost> extras(samples.size());
    const auto outcomes =
        solve_batch(cfg.ocp, samples, warm.us, extras, cfg.ddp, cfg.workers);
    check_failure_rate(outcomes);
    for (const auto& o : outcomes) {
      // DDP starts from the (clamped) warm rollout and only accepts
      // improving steps
      if (o.ok && o.report.final_cost > o.report.cost_trace.front() + 1e-9) {
        throw std::logic_error("OC step worsened its warm start");
      }
    }
    rec.oc_time_s = seconds_since(oc_start);
    rec.oc_policy_derivs = policy_deriv_count() - derivs_before;
    rec.train_cost = mean_ok_cost(outcomes);
    rec.ddp_iters_mean = mean_ddp_iters(outcomes);

    const auto learn_start = Clock::now();
    CloneDataset data;
    data.nx = cfg.ocp.spec.nx;
    data.nu = cfg.ocp.spec.nu;
    for (int i = 0; i < samples.size(); ++i) {
      if (!outcomes[i].ok) continue;
      const Trajectory& traj = outcomes[i].traj;
      for (int t = 0; t < cfg.ocp.horizon; ++t) {
        CloneRow row;
        row.sample = i;
        row.t = t;
        row.x = traj.xs[t];
        row.u = traj.us[t];
        row.K = traj.Ks[t];
        data.rows.push_back(std::move(row));
      }
    }
    FitConfig fit_cfg = cfg.fit;
    fit_cfg.primary = PrimaryLoss::kClone;
    fit_cfg.seed = split_seed(cfg.fit.seed, k);
    fit_cfg.sobolev.seed = split_seed(cfg.sobolev_seed, k);
    fit(net, data, fit_cfg);
    if (!cfg.ddp.respect_bounds) assert_clone_floor(net, data, cfg.ocp);
    rec.learn_time_s = seconds_since(learn_start);

    if (k % cfg.eval_every == 0 || k == cfg.outer_iters) {
      rec.test_cost = mean_policy_cost(cfg.ocp, cfg.test, net);
    }
    rec.sim_calls = counters().sim_steps.load();
    result.records.push_back(rec);
    if (on_iteration) on_iteration(rec);
  }
  return result;
}

void dual_update(ConsensusState& state,
                 const std::vector<Trajectory>& trajectories,
                 const PolicyNet& net, bool multiple_shooting) {
  double res_u = 0.0;
  double res_x = 0.0;
  for (int i = 0; i < state.n_samples; ++i) {
    const Trajectory& traj = trajectories[i];
    for (int t = 0; t < state.horizon; ++t) {
      const int idx = state.index(i, t);
      const double mu = state.mu[idx];
      const Vec& eval_state =
          multiple_shooting ? state.shadow[idx] : traj.xs[t];
      const Vec r = traj.us[t] - forward(net, eval_state);
      state.lambda[idx] += mu * r;
      res_u = std::max(res_u, r.norm());
      if (multiple_shooting) {
        const Vec s = traj.xs[t] - state.shadow[idx];
        state.gamma[idx] += mu * s;
        res_x = std::max(res_x, s.norm());
      }
    }
  }
  state.residual_u = res_u;
  state.residual_x = multiple_shooting
                         ? res_x
                         : std::numeric_limits<double>::quiet_NaN();
}

PlalResult run_plal(const OuterLoopConfig& cfg,
                    const IterationCallback& on_iteration) {
  if (cfg.outer_iters < 1 || cfg.train.size() < 1) {
    throw ConfigError("run_plal: outer_iters and train set must be nonempty");
  }
  if (cfg.mu_init < 1e-6) {
    throw ConfigError("run_plal: mu below 1e-6 is not supported");
  }
  if (cfg.resample_each_iter) {
    throw ConfigError("run_plal: re-sampling under multipliers is unsupported");
  }
  const bool ms = cfg.multiple_shooting;
  const int T = cfg.ocp.horizon;
  const int N = cfg.train.size();

  PlalResult result{init_policy(cfg.ocp, cfg.policy), {}, {}};
  PolicyNet& net = result.net;
  ConsensusState& consensus = result.consensus;

  consensus.n_samples = N;
  consensus.horizon = T;
  consensus.lambda.assign(N * T, Vec::Zero(cfg.ocp.spec.nu));
  consensus.mu.assign(N * T, cfg.mu_init);
  if (ms) {
    consensus.gamma.assign(N * T, Vec::Zero(cfg.ocp.spec.nx));
    consensus.shadow.assign(N * T, Vec::Zero(cfg.ocp.spec.nx));
  }

  IterationRecord rec0;
  rec0.k = 0;
  rec0.train_cost = mean_policy_cost(cfg.ocp, cfg.train, net);
  rec0.test_cost = mean_policy_cost(cfg.ocp, cfg.test, net);
  rec0.sim_calls = counters().sim_steps.load();
  result.records.push_back(rec0);
  if (on_iteration) on_iteration(rec0);

  // initial warm starts and shadow states from policy rollouts
  WarmStarts warm = policy_warm_starts(cfg.ocp, cfg.train, net);
  std::vector<std::vector<Vec>> prev_us = warm.us;
  if (ms) {
    for (int i = 0; i < N; ++i) {
      const bool have_traj = !warm.trajectories[i].xs.empty();
      for (int t = 0; t < T; ++t) {
        consensus.shadow[consensus.index(i, t)] =
            have_traj ? warm.trajectories[i].xs[t] : cfg.train.params[i].x0;
      }
    }
  }

  std::vector<double> residual_history;
  for (int k = 1; k <= cfg.outer_iters; ++k) {
    IterationRecord rec;
    rec.k = k;

    // --- OC phase: per-sample DDP on the augmented Lagrangian
    const auto oc_start = Clock::now();
    const std::uint64_t derivs_before = policy_deriv_count();
    std::vector<ExtraCost> extras(N);
    for (int i = 0; i < N; ++i) {
      if (!ms) {
        PolicyAttractor pa;
        pa.net = &net;
        pa.mu.resize(T);
        pa.shift.resize(T);
        double constant = 0.0;
        for (int t = 0; t < T; ++t) {
          const int idx = consensus.index(i, t);
          pa.mu[t] = consensus.mu[idx];
          pa.shift[t] = consensus.lambda[idx] / consensus.mu[idx];
          constant -= consensus.lambda[idx].squaredNorm() /
                      (2.0 * consensus.mu[idx]);
        }
        pa.constant = constant;
        extras[i] = std::move(pa);
      } else {
        ExtraQuadCost eq;
        eq.mu.resize(T);
        eq.u_ref.resize(T);
        eq.x_ref.resize(T);
        double constant = 0.0;
        for (int t = 0; t < T; ++t) {
          const int idx = consensus.index(i, t);
          const double mu = consensus.mu[idx];
          eq.mu[t] = mu;
          eq.u_ref[t] = forward(net, consensus.shadow[idx]) -
                        consensus.lambda[idx] / mu;
          eq.x_ref[t] = consensus.shadow[idx] - consensus.gamma[idx] / mu;
          constant -= (consensus.lambda[idx].squaredNorm() +
                       consensus.gamma[idx].squaredNorm()) /
                      (2.0 * mu);
        }
        eq.constant = constant;
        extras[i] = std::move(eq);
      }
    }
    const auto outcomes =
        solve_batch(cfg.ocp, cfg.train, prev_us, extras, cfg.ddp, cfg.workers);
    check_failure_rate(outcomes);
    rec.oc_time_s = seconds_since(oc_start);
    rec.oc_policy_derivs = policy_deriv_count() - derivs_before;
    rec.train_cost = mean_ok_cost(outcomes);
    rec.ddp_iters_mean = mean_ddp_iters(outcomes);

    std::vector<Trajectory> trajectories(N);
    for (int i = 0; i < N; ++i) {
      if (outcomes[i].ok) {
        trajectories[i] = outcomes[i].traj;
        prev_us[i] = outcomes[i].traj.us;
      } else {
        // keep the previous iterate for failed samples
        trajectories[i] = rollout_controls(cfg.ocp, cfg.train.params[i],
                                           prev_us[i]);
      }
    }

    // --- learning phase
    const auto learn_start = Clock::now();
    CloneDataset data;
    data.nx = cfg.ocp.spec.nx;
    data.nu = cfg.ocp.spec.nu;
    for (int i = 0; i < N; ++i) {
      const Trajectory& traj = trajectories[i];
      for (int t = 0; t < T; ++t) {
        const int idx = consensus.index(i, t);
        CloneRow row;
        row.sample = i;
        row.t = t;
        row.x = traj.xs[t];
        row.u = traj.us[t];
        row.K = traj.Ks.empty() ? Mat() : traj.Ks[t];
        row.lambda = consensus.lambda[idx];
        row.mu = consensus.mu[idx];
        if (ms) row.gamma = consensus.gamma[idx];
        data.rows.push_back(std::move(row));
        if (ms) data.shadow.push_back(consensus.shadow[idx]);
      }
    }
    FitConfig fit_cfg = cfg.fit;
    fit_cfg.primary = ms ? PrimaryLoss::kAlMs : PrimaryLoss::kAl;
    fit_cfg.seed = split_seed(cfg.fit.seed, k);
    fit_cfg.sobolev.seed = split_seed(cfg.sobolev_seed, k);
    fit(net, data, fit_cfg);
    if (ms) {
      for (int i = 0, r = 0; i < N; ++i) {
        for (int t = 0; t < T; ++t, ++r) {
          consensus.shadow[consensus.index(i, t)] = data.shadow[r];
        }
      }
    }
    if (!cfg.ddp.respect_bounds) assert_clone_floor(net, data, cfg.ocp);
    rec.learn_time_s = seconds_since(learn_start);

    // --- dual ascent
    dual_update(consensus, trajectories, net, ms);
    rec.consensus_u = consensus.residual_u;
    rec.consensus_x = consensus.residual_x;

    if (k % cfg.eval_every == 0 || k == cfg.outer_iters) {
      rec.test_cost = mean_policy_cost(cfg.ocp, cfg.test, net);
    }
    rec.sim_calls = counters().sim_steps.load();
    result.records.push_back(rec);
    if (on_iteration) on_iteration(rec);

    residual_history.push_back(consensus.residual_u);
    const std::size_t h = residual_history.size();
    // Bounded controls and a tanh policy cap the residual at the box
    // diameter, so growth below that scale is re-exploration, not
    // divergence; only unbounded (-C) runs can genuinely blow up.
    const double box_diameter =
        (cfg.ocp.spec.u_max - cfg.ocp.spec.u_min).norm();
    if (h >= 6 &&
        residual_history[h - 1] > 10.0 * residual_history[h - 6] &&
        residual_history[h - 6] > 1e-12 &&
        residual_history[h - 1] > box_diameter) {
      throw TrainingAbort("consensus residual diverging (x10 over 5 iters)");
    }
    if (cfg.early_stop_residual > 0.0 &&
        consensus.residual_u < cfg.early_stop_residual &&
        (!ms || consensus.residual_x < cfg.early_stop_residual)) {
      break;
    }
  }
  return result;
}

std::vector<WarmStartRow> warmstart_benchmark(const Ocp& ocp,
                                              const PolicyNet& net,
                                              const SampleSet& test_set,
                                              const DdpSettings& settings) {
  std::vector<WarmStartRow> rows;
  rows.reserve(test_set.size());
  for (int i = 0; i < test_set.size(); ++i) {
    const ProblemParams& beta = test_set.params[i];
    std::vector<Vec> cold = midpoint_controls(ocp);
    std::vector<Vec> warm;
    try {
      warm = rollout_policy(ocp, beta, net).us;
    } catch (const DivergedRollout&) {
      warm = cold;
    }
    const auto cold_solve = solve(ocp, beta, cold, {}, settings);
    const auto warm_solve = solve(ocp, beta, warm, {}, settings);
    rows.push_back(
        {i, cold_solve.second.iterations, warm_solve.second.iterations});
  }
  return rows;
}

}  // namespace ptoc
