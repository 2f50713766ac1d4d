#include "ptoc/oracle.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace ptoc {

RiccatiSolution riccati_solve(const Mat& A, const Mat& B, const Mat& Q,
                              const Mat& R, const Mat& Qf, int T,
                              const Vec& x0) {
  const int nx = static_cast<int>(A.rows());
  const int nu = static_cast<int>(B.cols());
  if (T < 1) throw std::invalid_argument("riccati_solve: T must be >= 1");

  Eigen::LDLT<Mat> r_check(R);
  if (r_check.info() != Eigen::Success || !r_check.isPositive() ||
      (R.diagonal().array() <= 0.0).any()) {
    throw std::invalid_argument("riccati_solve: R must be positive definite");
  }

  RiccatiSolution sol;
  sol.P.assign(T + 1, Mat::Zero(nx, nx));
  sol.K.assign(T, Mat::Zero(nu, nx));
  sol.P[T] = Qf;
  for (int t = T - 1; t >= 0; --t) {
    const Mat& Pn = sol.P[t + 1];
    const Mat BtP = B.transpose() * Pn;
    const Mat S = R + BtP * B;
    sol.K[t] = S.ldlt().solve(BtP * A);
    Mat P = Q + A.transpose() * Pn * A - A.transpose() * Pn * B * sol.K[t];
    sol.P[t] = 0.5 * (P + P.transpose());
  }

  sol.xs.assign(T + 1, Vec::Zero(nx));
  sol.us.assign(T, Vec::Zero(nu));
  sol.xs[0] = x0;
  sol.cost = 0.0;
  for (int t = 0; t < T; ++t) {
    sol.us[t] = -sol.K[t] * sol.xs[t];
    sol.cost += 0.5 * sol.xs[t].dot(Q * sol.xs[t]) +
                0.5 * sol.us[t].dot(R * sol.us[t]);
    sol.xs[t + 1] = A * sol.xs[t] + B * sol.us[t];
  }
  sol.cost += 0.5 * sol.xs[T].dot(Qf * sol.xs[T]);
  return sol;
}

std::vector<Vec> direct_solve_box(const Mat& A, const Mat& B, const Mat& Q,
                                  const Mat& R, const Mat& Qf, int T,
                                  const Vec& x0, const Vec& xbar,
                                  const Vec& lo, const Vec& hi, double tol,
                                  int max_iters) {
  const int nx = static_cast<int>(A.rows());
  const int nu = static_cast<int>(B.cols());
  const int n = T * nu;

  // x_t = A^t x0 + sum_s A^(t-1-s) B u_s; stack states x_1..x_T.
  Mat F = Mat::Zero(T * nx, nx);   // free response rows
  Mat G = Mat::Zero(T * nx, n);    // forced response
  Mat At = Mat::Identity(nx, nx);
  for (int t = 1; t <= T; ++t) {
    At = A * At;  // A^t
    F.middleRows((t - 1) * nx, nx) = At;
    Mat As = Mat::Identity(nx, nx);
    for (int s = t - 1; s >= 0; --s) {
      G.block((t - 1) * nx, s * nu, nx, nu) = As * B;
      As = A * As;
    }
  }

  Mat Qblk = Mat::Zero(T * nx, T * nx);
  for (int t = 1; t < T; ++t) {
    Qblk.block(t * nx - nx, t * nx - nx, nx, nx) = Q;
  }
  Qblk.bottomRightCorner(nx, nx) = Qf;
  Mat Rblk = Mat::Zero(n, n);
  for (int t = 0; t < T; ++t) Rblk.block(t * nu, t * nu, nu, nu) = R;

  Vec xbar_stack(T * nx);
  for (int t = 0; t < T; ++t) xbar_stack.segment(t * nx, nx) = xbar;

  const Mat H = G.transpose() * Qblk * G + Rblk;
  const Vec g = G.transpose() * Qblk * (F * x0 - xbar_stack);

  Vec lo_stack(n), hi_stack(n);
  for (int t = 0; t < T; ++t) {
    lo_stack.segment(t * nu, nu) = lo;
    hi_stack.segment(t * nu, nu) = hi;
  }

  const double L =
      Eigen::SelfAdjointEigenSolver<Mat>(H).eigenvalues().maxCoeff();
  const double step = 1.0 / std::max(L, 1e-12);

  auto project = [&](const Vec& v) {
    return v.cwiseMax(lo_stack).cwiseMin(hi_stack);
  };

  // FISTA with gradient-mapping stopping rule.
  Vec u = project(Vec::Zero(n));
  Vec y = u;
  double tk = 1.0;
  for (int it = 0; it < max_iters; ++it) {
    const Vec grad_y = H * y + g;
    const Vec u_next = project(y - step * grad_y);

    const Vec grad_u = H * u_next + g;
    const Vec mapping = (u_next - project(u_next - step * grad_u)) / step;
    if (mapping.lpNorm<Eigen::Infinity>() < tol) {
      u = u_next;
      std::vector<Vec> out(T);
      for (int t = 0; t < T; ++t) out[t] = u.segment(t * nu, nu);
      return out;
    }

    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
    y = u_next + ((tk - 1.0) / t_next) * (u_next - u);
    u = u_next;
    tk = t_next;
  }
  throw SolverFailure("direct_solve_box: no convergence within iteration cap");
}

Vec boxqp_enumerate(const Mat& H, const Vec& g, const Vec& lo, const Vec& hi) {
  const int n = static_cast<int>(g.size());
  if (n > 12) {
    throw std::invalid_argument("boxqp_enumerate: dimension above 12 refused");
  }

  auto objective = [&](const Vec& x) {
    return 0.5 * x.dot(H * x) + g.dot(x);
  };

  long patterns = 1;
  for (int i = 0; i < n; ++i) patterns *= 3;

  Vec best;
  double best_obj = std::numeric_limits<double>::infinity();
  std::vector<int> code(n);  // 0 = lo, 1 = free, 2 = hi
  for (long p = 0; p < patterns; ++p) {
    long rem = p;
    for (int i = 0; i < n; ++i) {
      code[i] = static_cast<int>(rem % 3);
      rem /= 3;
    }
    std::vector<int> free_idx;
    Vec x(n);
    for (int i = 0; i < n; ++i) {
      if (code[i] == 0) {
        x[i] = lo[i];
      } else if (code[i] == 2) {
        x[i] = hi[i];
      } else {
        free_idx.push_back(i);
      }
    }
    const int nf = static_cast<int>(free_idx.size());
    if (nf > 0) {
      Mat Hff(nf, nf);
      Vec rhs(nf);
      for (int a = 0; a < nf; ++a) {
        rhs[a] = -g[free_idx[a]];
        for (int b = 0; b < nf; ++b) Hff(a, b) = H(free_idx[a], free_idx[b]);
        for (int i = 0; i < n; ++i) {
          if (code[i] != 1) rhs[a] -= H(free_idx[a], i) * x[i];
        }
      }
      const Vec xf = Hff.ldlt().solve(rhs);
      bool feasible = true;
      for (int a = 0; a < nf; ++a) {
        if (xf[a] < lo[free_idx[a]] - 1e-12 ||
            xf[a] > hi[free_idx[a]] + 1e-12) {
          feasible = false;
          break;
        }
      }
      if (!feasible) continue;
      for (int a = 0; a < nf; ++a) {
        x[free_idx[a]] =
            std::min(std::max(xf[a], lo[free_idx[a]]), hi[free_idx[a]]);
      }
    }
    const double obj = objective(x);
    if (obj < best_obj) {
      best_obj = obj;
      best = x;
    }
  }
  return best;
}

Vec finite_diff_grad(const std::function<double(const Vec&)>& fn, const Vec& x,
                     double h) {
  Vec grad(x.size());
  Vec xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double hi = h * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + hi;
    const double fp = fn(xp);
    xp[i] = x[i] - hi;
    const double fm = fn(xp);
    xp[i] = x[i];
    grad[i] = (fp - fm) / (2.0 * hi);
  }
  return grad;
}

Mat finite_diff_jac(const std::function<Vec(const Vec&)>& fn, const Vec& x,
                    double h) {
  Vec xp = x;
  Mat jac;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double hi = h * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + hi;
    const Vec fp = fn(xp);
    xp[i] = x[i] - hi;
    const Vec fm = fn(xp);
    xp[i] = x[i];
    if (jac.size() == 0) jac.resize(fp.size(), x.size());
    jac.col(i) = (fp - fm) / (2.0 * hi);
  }
  return jac;
}

}  // namespace ptoc
