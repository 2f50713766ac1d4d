#include "ptoc/learn.hpp"

#include <cmath>
#include <numeric>

#include "ptoc/instrumentation.hpp"

namespace ptoc {

LossResult clone_loss(const PolicyNet& net, const CloneDataset& data,
                      const Batch& batch) {
  if (batch.empty()) throw std::invalid_argument("clone_loss: empty batch");
  LossResult out;
  out.grad = net.zero_grad();
  for (int idx : batch) {
    const CloneRow& row = data.rows[idx];
    const Vec pred = forward(net, row.x);
    const Vec r = row.u - pred;
    out.value += 0.5 * r.squaredNorm();
    out.grad.add_scaled(backward_params(net, row.x, -r), 1.0);
  }
  return out;
}

LossResult sobolev_loss_full(const PolicyNet& net, const CloneDataset& data,
                             const Batch& batch) {
  LossResult out;
  out.grad = net.zero_grad();
  Vec e = Vec::Zero(net.output_dim());
  for (int idx : batch) {
    const CloneRow& row = data.rows[idx];
    if (row.K.size() == 0) {
      throw std::invalid_argument("sobolev_loss_full: gains missing");
    }
    for (int j = 0; j < net.output_dim(); ++j) {
      e[j] = 1.0;
      const Vec q = row.K.row(j).transpose() - input_vjp(net, row.x, e);
      out.value += 0.5 * q.squaredNorm();
      out.grad.add_scaled(sobolev_backward_params(net, row.x, e, -q), 1.0);
      e[j] = 0.0;
    }
  }
  return out;
}

LossResult sobolev_loss_stochastic(const PolicyNet& net,
                                   const CloneDataset& data,
                                   const Batch& batch,
                                   const SobolevConfig& cfg, Rng& directions) {
  const double scale = cfg.unbiased_scale ? net.output_dim() : 1.0;
  LossResult out;
  out.grad = net.zero_grad();
  for (int idx : batch) {
    const CloneRow& row = data.rows[idx];
    if (row.K.size() == 0) {
      throw std::invalid_argument("sobolev_loss_stochastic: gains missing");
    }
    for (int rep = 0; rep < cfg.directions; ++rep) {
      const Vec v = directions.unit_sphere(net.output_dim());
      const Vec q = row.K.transpose() * v - input_vjp(net, row.x, v);
      out.value += 0.5 * scale * q.squaredNorm();
      out.grad.add_scaled(sobolev_backward_params(net, row.x, v, -q), scale);
    }
  }
  return out;
}

AlLossResult al_policy_loss(const PolicyNet& net, const CloneDataset& data,
                            const Batch& batch, bool multiple_shooting) {
  AlLossResult out;
  out.grad = net.zero_grad();
  for (int idx : batch) {
    const CloneRow& row = data.rows[idx];
    if (row.mu <= 0.0) {
      throw std::invalid_argument("al_policy_loss: mu must be positive");
    }
    if (!multiple_shooting) {
      const Vec r = row.u - forward(net, row.x);
      out.value += row.lambda.dot(r) + 0.5 * row.mu * r.squaredNorm();
      const Vec upstream = -(row.lambda + row.mu * r);
      out.grad.add_scaled(backward_params(net, row.x, upstream), 1.0);
    } else {
      const Vec& sx = data.shadow[idx];
      const Vec rho = row.u + row.lambda / row.mu - forward(net, sx);
      const Vec s = row.x + row.gamma / row.mu - sx;
      out.value += 0.5 * row.mu * rho.squaredNorm() +
                   0.5 * row.mu * s.squaredNorm() -
                   (row.lambda.squaredNorm() + row.gamma.squaredNorm()) /
                       (2.0 * row.mu);
      out.grad.add_scaled(backward_params(net, sx, (-row.mu) * rho), 1.0);
      out.shadow_grad.push_back(-row.mu * input_vjp(net, sx, rho) -
                                row.mu * s);
    }
  }
  return out;
}

double clone_loss_floor(const CloneDataset& data, const Vec& u_min,
                        const Vec& u_max) {
  double floor = 0.0;
  for (const auto& row : data.rows) {
    for (Eigen::Index i = 0; i < row.u.size(); ++i) {
      const double d =
          std::max({0.0, row.u[i] - u_max[i], u_min[i] - row.u[i]});
      floor += 0.5 * d * d;
    }
  }
  return floor;
}

void AdamState::ensure_size(Eigen::Index n) {
  if (m.size() != n) {
    m = Vec::Zero(n);
    v = Vec::Zero(n);
    step = 0;
  }
}

void adam_step(AdamState& state, Vec& params, const Vec& grad) {
  if (params.size() != grad.size()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  state.ensure_size(params.size());
  state.step += 1;
  state.m = state.cfg.beta1 * state.m + (1.0 - state.cfg.beta1) * grad;
  state.v = state.cfg.beta2 * state.v.array().matrix() +
            (1.0 - state.cfg.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(state.cfg.beta1, state.step);
  const double bc2 = 1.0 - std::pow(state.cfg.beta2, state.step);
  params.array() -= state.cfg.lr * (state.m.array() / bc1) /
                    ((state.v.array() / bc2).sqrt() + state.cfg.eps);
}

FitReport fit(PolicyNet& net, CloneDataset& data, const FitConfig& cfg) {
  if (data.size() == 0) throw std::invalid_argument("fit: empty dataset");
  counters().fit_calls.fetch_add(1, std::memory_order_relaxed);

  FitReport report;
  if (cfg.epochs == 0) return report;

  const bool ms = cfg.primary == PrimaryLoss::kAlMs;
  if (ms && static_cast<int>(data.shadow.size()) != data.size()) {
    throw std::invalid_argument("fit: shadow states misaligned with rows");
  }

  Rng shuffler(cfg.seed);
  Rng directions(cfg.sobolev.seed);

  Vec theta = net.params_vector();
  AdamState theta_state(cfg.adam);

  // shadow states flattened into one vector; rows outside the current batch
  // receive zero gradient.
  Vec shadow_flat;
  AdamState shadow_state(cfg.adam);
  if (ms) {
    shadow_flat.resize(static_cast<Eigen::Index>(data.size()) * data.nx);
    for (int i = 0; i < data.size(); ++i) {
      shadow_flat.segment(i * data.nx, data.nx) = data.shadow[i];
    }
  }

  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const int batch_size = std::max(1, cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffler.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t stop = std::min(order.size(), start + batch_size);
      const Batch batch(order.begin() + start, order.begin() + stop);

      double loss = 0.0;
      ParamGrad grad = net.zero_grad();
      std::vector<Vec> shadow_grad;

      switch (cfg.primary) {
        case PrimaryLoss::kClone: {
          auto res = clone_loss(net, data, batch);
          loss += res.value;
          grad.add_scaled(res.grad, 1.0);
          break;
        }
        case PrimaryLoss::kAl:
        case PrimaryLoss::kAlMs: {
          auto res = al_policy_loss(net, data, batch, ms);
          loss += res.value;
          grad.add_scaled(res.grad, 1.0);
          shadow_grad = std::move(res.shadow_grad);
          break;
        }
      }

      if (cfg.sobolev.mode == SobolevConfig::Mode::kFull) {
        auto res = sobolev_loss_full(net, data, batch);
        loss += cfg.sobolev.weight * res.value;
        grad.add_scaled(res.grad, cfg.sobolev.weight);
      } else if (cfg.sobolev.mode == SobolevConfig::Mode::kStochastic) {
        auto res =
            sobolev_loss_stochastic(net, data, batch, cfg.sobolev, directions);
        loss += cfg.sobolev.weight * res.value;
        grad.add_scaled(res.grad, cfg.sobolev.weight);
      }

      if (!std::isfinite(loss)) {
        throw TrainingAbort("non-finite loss in epoch " +
                            std::to_string(epoch));
      }
      epoch_loss += loss;

      const Vec grad_flat = to_vector(grad);
      adam_step(theta_state, theta, grad_flat);
      net.set_params_vector(theta);

      if (ms) {
        Vec sg = Vec::Zero(shadow_flat.size());
        for (std::size_t b = 0; b < batch.size(); ++b) {
          sg.segment(batch[b] * data.nx, data.nx) = shadow_grad[b];
        }
        adam_step(shadow_state, shadow_flat, sg);
        // later batches must see the moved shadow states
        for (int i = 0; i < data.size(); ++i) {
          data.shadow[i] = shadow_flat.segment(i * data.nx, data.nx);
        }
      }
    }
    report.epoch_loss.push_back(epoch_loss);
  }
  return report;
}

}  // namespace ptoc
