#include "ptoc/ddp.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "ptoc/instrumentation.hpp"

namespace ptoc {

namespace {

Vec clamp(const Vec& v, const Vec& lo, const Vec& hi) {
  return v.cwiseMax(lo).cwiseMin(hi);
}

double quad_obj(const Mat& H, const Vec& g, const Vec& x) {
  return 0.5 * x.dot(H * x) + g.dot(x);
}

}  // namespace

void DdpSettings::validate() const {
  if (max_iters < 1 || boxqp_max_iters < 1) {
    throw ConfigError("solver iteration caps must be >= 1");
  }
  if (!(ls_backtrack > 0.0 && ls_backtrack < 1.0)) {
    throw ConfigError("ls_backtrack must lie in (0, 1)");
  }
  if (ls_alpha_min <= 0.0 || grad_tol <= 0.0 || boxqp_tol <= 0.0) {
    throw ConfigError("solver tolerances must be positive");
  }
  if (reg_init < 0.0 || reg_engage <= 0.0 || reg_up <= 1.0 ||
      reg_down <= 1.0 || reg_max <= 0.0) {
    throw ConfigError("invalid regularization schedule");
  }
}

BoxQpResult boxqp_solve(const Mat& H, const Vec& g, const Vec& lo,
                        const Vec& hi, const Vec& x0, int max_iters,
                        double tol) {
  const int n = static_cast<int>(g.size());
  BoxQpResult res;
  res.x = clamp(x0, lo, hi);
  res.clamped.assign(n, false);

  auto classify = [&](const Vec& grad) {
    res.free_idx.clear();
    for (int i = 0; i < n; ++i) {
      const bool at_lo = res.x[i] <= lo[i] && grad[i] > 0.0;
      const bool at_hi = res.x[i] >= hi[i] && grad[i] < 0.0;
      res.clamped[i] = at_lo || at_hi;
      if (!res.clamped[i]) res.free_idx.push_back(i);
    }
  };

  auto factor_free = [&]() -> bool {
    const int nf = static_cast<int>(res.free_idx.size());
    Mat Hff(nf, nf);
    for (int a = 0; a < nf; ++a) {
      for (int b = 0; b < nf; ++b) {
        Hff(a, b) = H(res.free_idx[a], res.free_idx[b]);
      }
    }
    res.free_llt.compute(Hff);
    return res.free_llt.info() == Eigen::Success;
  };

  double obj = quad_obj(H, g, res.x);
  for (int iter = 0; iter < max_iters; ++iter) {
    const Vec grad = g + H * res.x;
    classify(grad);
    if (res.free_idx.empty()) return res;

    double gf_norm = 0.0;
    for (int i : res.free_idx) gf_norm = std::max(gf_norm, std::abs(grad[i]));
    if (gf_norm < tol) break;

    if (!factor_free()) {
      res.failed = true;
      return res;
    }
    const int nf = static_cast<int>(res.free_idx.size());
    Vec gf(nf);
    for (int a = 0; a < nf; ++a) gf[a] = grad[res.free_idx[a]];
    const Vec df = res.free_llt.solve(-gf);

    Vec dir = Vec::Zero(n);
    for (int a = 0; a < nf; ++a) dir[res.free_idx[a]] = df[a];

    // backtracking along the projected arc
    bool accepted = false;
    double step = 1.0;
    for (int ls = 0; ls < 24; ++ls) {
      const Vec x_try = clamp(res.x + step * dir, lo, hi);
      const double obj_try = quad_obj(H, g, x_try);
      if (obj_try < obj - 1e-16 * std::abs(obj)) {
        res.x = x_try;
        obj = obj_try;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }

  // leave a factorization and free set consistent with the final point
  const Vec grad = g + H * res.x;
  classify(grad);
  if (!res.free_idx.empty() && !factor_free()) res.failed = true;
  return res;
}

namespace {

void fold_extra(const ExtraCost& extra, int t, const Vec& x, const Vec& u,
                CostTerms& c) {
  if (std::holds_alternative<ExtraQuadCost>(extra)) {
    const auto& eq = std::get<ExtraQuadCost>(extra);
    const double mu = eq.mu.empty() ? 0.0 : eq.mu[t];
    if (mu <= 0.0) return;
    if (!eq.u_ref.empty()) {
      const Vec r = u - eq.u_ref[t];
      c.value += 0.5 * mu * r.squaredNorm();
      c.lu += mu * r;
      c.luu += mu * Mat::Identity(u.size(), u.size());
    }
    if (!eq.x_ref.empty()) {
      const Vec s = x - eq.x_ref[t];
      c.value += 0.5 * mu * s.squaredNorm();
      c.lx += mu * s;
      c.lxx += mu * Mat::Identity(x.size(), x.size());
    }
  } else if (std::holds_alternative<PolicyAttractor>(extra)) {
    const auto& pa = std::get<PolicyAttractor>(extra);
    const double mu = pa.mu[t];
    if (mu <= 0.0) return;
    const Vec rho = u + pa.shift[t] - forward(*pa.net, x);
    const Mat J = input_jacobian(*pa.net, x);
    c.value += 0.5 * mu * rho.squaredNorm();
    c.lu += mu * rho;
    c.lx -= mu * J.transpose() * rho;
    c.luu += mu * Mat::Identity(u.size(), u.size());
    c.lxx += mu * J.transpose() * J;
    c.lxu -= mu * J.transpose();
  }
}

double extra_value(const ExtraCost& extra, const Trajectory& traj) {
  double v = 0.0;
  if (std::holds_alternative<ExtraQuadCost>(extra)) {
    const auto& eq = std::get<ExtraQuadCost>(extra);
    for (int t = 0; t < traj.horizon(); ++t) {
      const double mu = eq.mu.empty() ? 0.0 : eq.mu[t];
      if (mu <= 0.0) continue;
      if (!eq.u_ref.empty()) {
        v += 0.5 * mu * (traj.us[t] - eq.u_ref[t]).squaredNorm();
      }
      if (!eq.x_ref.empty()) {
        v += 0.5 * mu * (traj.xs[t] - eq.x_ref[t]).squaredNorm();
      }
    }
    v += eq.constant;
  } else if (std::holds_alternative<PolicyAttractor>(extra)) {
    const auto& pa = std::get<PolicyAttractor>(extra);
    for (int t = 0; t < traj.horizon(); ++t) {
      if (pa.mu[t] <= 0.0) continue;
      const Vec rho =
          traj.us[t] + pa.shift[t] - forward(*pa.net, traj.xs[t]);
      v += 0.5 * pa.mu[t] * rho.squaredNorm();
    }
    v += pa.constant;
  }
  return v;
}

}  // namespace

double augmented_cost(const Trajectory& traj, const ExtraCost& extra) {
  return traj.cost + extra_value(extra, traj);
}

BackwardPassResult backward_pass(const std::vector<StageExpansion>& stages,
                                 const CostTerms& terminal,
                                 const std::vector<Vec>& us, const Vec& lo,
                                 const Vec& hi, double reg,
                                 const DdpSettings& settings) {
  const int T = static_cast<int>(stages.size());
  const int nu = static_cast<int>(us[0].size());

  BackwardPassResult bp;
  bp.k.resize(T);
  bp.K.resize(T);

  Vec Vx = terminal.lx;
  Mat Vxx = terminal.lxx;

  for (int t = T - 1; t >= 0; --t) {
    const CostTerms& c = stages[t].cost;
    const Mat& fx = stages[t].dyn.fx;
    const Mat& fu = stages[t].dyn.fu;

    const Vec Qx = c.lx + fx.transpose() * Vx;
    const Vec Qu = c.lu + fu.transpose() * Vx;
    const Mat Qxx = c.lxx + fx.transpose() * Vxx * fx;
    const Mat Quu = c.luu + fu.transpose() * Vxx * fu;
    const Mat Qux = c.lxu.transpose() + fu.transpose() * Vxx * fx;
    const Mat Quu_reg = Quu + reg * Mat::Identity(nu, nu);

    Vec k(nu);
    Mat K(nu, Qux.cols());
    if (settings.respect_bounds) {
      const Vec dlo = lo - us[t];
      const Vec dhi = hi - us[t];
      const BoxQpResult qp =
          boxqp_solve(Quu_reg, Qu, dlo, dhi, Vec::Zero(nu),
                      settings.boxqp_max_iters, settings.boxqp_tol);
      if (qp.failed) {
        bp.failed = true;
        return bp;
      }
      k = qp.x;
      K.setZero();
      const int nf = static_cast<int>(qp.free_idx.size());
      if (nf > 0) {
        Mat Qux_f(nf, Qux.cols());
        for (int a = 0; a < nf; ++a) Qux_f.row(a) = Qux.row(qp.free_idx[a]);
        const Mat Kf = -qp.free_llt.solve(Qux_f);
        for (int a = 0; a < nf; ++a) K.row(qp.free_idx[a]) = Kf.row(a);
      }
    } else {
      Eigen::LLT<Mat> llt(Quu_reg);
      if (llt.info() != Eigen::Success) {
        bp.failed = true;
        return bp;
      }
      k = llt.solve(-Qu);
      K = llt.solve(-Qux);
    }

    bp.d1 += k.dot(Qu);
    bp.d2 += 0.5 * k.dot(Quu_reg * k);

    Vx = Qx + K.transpose() * Quu_reg * k + K.transpose() * Qu +
         Qux.transpose() * k;
    Mat Vxx_next = Qxx + K.transpose() * Quu_reg * K + K.transpose() * Qux +
                   Qux.transpose() * K;
    Vxx = 0.5 * (Vxx_next + Vxx_next.transpose());

    bp.k[t] = std::move(k);
    bp.K[t] = std::move(K);
  }
  return bp;
}

std::optional<Trajectory> forward_pass(const Ocp& ocp,
                                       const ProblemParams& beta,
                                       const Trajectory& ref,
                                       const std::vector<Vec>& k,
                                       const std::vector<Mat>& K, double alpha,
                                       const DdpSettings& settings) {
  const int T = ocp.horizon;
  Trajectory traj;
  traj.xs.resize(T + 1);
  traj.us.resize(T);
  traj.xs[0] = ref.xs[0];
  double cost = 0.0;
  for (int t = 0; t < T; ++t) {
    Vec u = ref.us[t] + alpha * k[t] + K[t] * (traj.xs[t] - ref.xs[t]);
    if (settings.respect_bounds) {
      u = clamp(u, ocp.spec.u_min, ocp.spec.u_max);
    }
    if (!u.allFinite()) return std::nullopt;
    traj.us[t] = u;
    cost += stage_cost(ocp.spec, ocp.weights, beta.goal, traj.xs[t], u).value;
    traj.xs[t + 1] = step(ocp.spec, traj.xs[t], u);
    if (!traj.xs[t + 1].allFinite()) return std::nullopt;
  }
  cost += terminal_cost(ocp.spec, ocp.weights, beta.goal, traj.xs[T]).value;
  if (!std::isfinite(cost)) return std::nullopt;
  traj.cost = cost;
  return traj;
}

std::pair<Trajectory, DdpReport> solve(const Ocp& ocp,
                                       const ProblemParams& beta,
                                       const std::vector<Vec>& warm_start,
                                       const ExtraCost& extra,
                                       const DdpSettings& settings) {
  ocp.validate();
  settings.validate();
  const int T = ocp.horizon;
  if (static_cast<int>(warm_start.size()) != T) {
    throw std::invalid_argument("warm start length must equal horizon");
  }

  std::vector<Vec> us0(warm_start);
  if (settings.respect_bounds) {
    for (auto& u : us0) u = clamp(u, ocp.spec.u_min, ocp.spec.u_max);
  }
  Trajectory traj = rollout_controls(ocp, beta, us0);
  double obj = augmented_cost(traj, extra);

  DdpReport report;
  report.cost_trace.push_back(obj);

  double reg = settings.reg_init;
  auto bump_reg = [&](double r) {
    return r < settings.reg_engage ? settings.reg_engage : r * settings.reg_up;
  };

  BackwardPassResult bp;
  const int pass_cap = 2 * settings.max_iters + 64;
  for (int pass = 0; pass < pass_cap; ++pass) {
    // expansions around the incumbent
    std::vector<StageExpansion> stages(T);
    for (int t = 0; t < T; ++t) {
      stages[t].cost = stage_cost(ocp.spec, ocp.weights, beta.goal, traj.xs[t],
                                  traj.us[t]);
      fold_extra(extra, t, traj.xs[t], traj.us[t], stages[t].cost);
      stages[t].dyn = step_derivs(ocp.spec, traj.xs[t], traj.us[t]);
    }
    const CostTerms term =
        terminal_cost(ocp.spec, ocp.weights, beta.goal, traj.xs[T]);

    bp = backward_pass(stages, term, traj.us, ocp.spec.u_min, ocp.spec.u_max,
                       reg, settings);
    while (bp.failed) {
      reg = bump_reg(reg);
      if (reg > settings.reg_max) {
        throw SolverFailure("Quu not positive definite at maximum regularization");
      }
      bp = backward_pass(stages, term, traj.us, ocp.spec.u_min,
                         ocp.spec.u_max, reg, settings);
    }

    report.final_grad = std::abs(bp.d1);
    if (report.final_grad < settings.grad_tol) {
      report.converged = true;
      break;
    }
    if (report.iterations >= settings.max_iters) break;

    bool accepted = false;
    for (double alpha = 1.0; alpha >= settings.ls_alpha_min;
         alpha *= settings.ls_backtrack) {
      const auto cand = forward_pass(ocp, beta, traj, bp.k, bp.K, alpha,
                                     settings);
      if (!cand) continue;  // diverged candidate: rejected, not an error
      const double cand_obj = augmented_cost(*cand, extra);
      const double actual = obj - cand_obj;
      const double expected = -(alpha * bp.d1 + alpha * alpha * bp.d2);
      const bool accept = expected > 0.0
                              ? actual / expected > settings.ls_accept_ratio
                              : actual > 0.0;
      if (accept) {
        traj = *cand;
        obj = cand_obj;
        report.iterations += 1;
        report.cost_trace.push_back(obj);
        if (expected > 0.0) report.ls_ratio_trace.push_back(actual / expected);
        reg = reg / settings.reg_down;
        if (reg < settings.reg_init) reg = settings.reg_init;
        if (reg < 1e-12) reg = 0.0;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      reg = bump_reg(reg);
      if (reg > settings.reg_max) break;  // stalled; return best iterate
    }
  }

  traj.ks = bp.k;
  traj.Ks = bp.K;
  traj.cost = trajectory_cost(ocp, beta, traj.xs, traj.us);
  report.final_cost = obj;
  return {traj, report};
}

std::vector<SolveOutcome> solve_batch(
    const Ocp& ocp, const SampleSet& samples,
    const std::vector<std::vector<Vec>>& warm_starts,
    const std::vector<ExtraCost>& extras, const DdpSettings& settings,
    int workers) {
  const int n = samples.size();
  if (static_cast<int>(warm_starts.size()) != n ||
      static_cast<int>(extras.size()) != n) {
    throw std::invalid_argument("solve_batch: misaligned input lists");
  }
  counters().solve_batch_calls.fetch_add(1, std::memory_order_relaxed);

  std::vector<SolveOutcome> results(n);
  auto run_one = [&](int i) {
    try {
      auto [traj, report] =
          solve(ocp, samples.params[i], warm_starts[i], extras[i], settings);
      results[i].traj = std::move(traj);
      results[i].report = std::move(report);
      results[i].ok = true;
    } catch (const std::exception& e) {
      results[i].ok = false;
      results[i].error = e.what();
    }
  };

  const int nworkers = std::max(1, std::min(workers, n));
  if (nworkers == 1) {
    for (int i = 0; i < n; ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nworkers);
    for (int w = 0; w < nworkers; ++w) {
      pool.emplace_back([&, w]() {
        for (int i = w; i < n; i += nworkers) run_one(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  return results;
}

}  // namespace ptoc
