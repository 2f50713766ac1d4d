#ifndef PTOC_ORACLE_HPP_
#define PTOC_ORACLE_HPP_

#include <functional>

#include "ptoc/types.hpp"

// Independent verification engines used by tests. These share no numerical
// kernels with the solver modules beyond basic Eigen linear algebra and run
// at toy dimensions only.

namespace ptoc {

struct RiccatiSolution {
  std::vector<Mat> P;   // T+1 value matrices
  std::vector<Mat> K;   // T gain matrices, u* = -K x
  std::vector<Vec> xs;  // rollout from x0
  std::vector<Vec> us;
  double cost{0.0};
};

// Finite-horizon LQR via backward Riccati recursion, then a forward rollout
// of u*_t = -K_t x_t. Cost is 0.5 x'Qx + 0.5 u'Ru per stage, 0.5 x'Qf x
// terminal.
RiccatiSolution riccati_solve(const Mat& A, const Mat& B, const Mat& Q,
                              const Mat& R, const Mat& Qf, int T,
                              const Vec& x0);

// Dense direct transcription of the box-constrained LQ problem: the cost is
// expressed as an explicit quadratic in the stacked controls and minimized by
// accelerated projected gradient descent to gradient-mapping norm < tol.
// Target state xbar enters every stage and the terminal term.
std::vector<Vec> direct_solve_box(const Mat& A, const Mat& B, const Mat& Q,
                                  const Mat& R, const Mat& Qf, int T,
                                  const Vec& x0, const Vec& xbar,
                                  const Vec& lo, const Vec& hi, double tol,
                                  int max_iters = 200000);

// Global minimizer of 0.5 x'Hx + g'x over [lo, hi] by enumerating all 3^n
// lo/free/hi clamp patterns. Refuses dimensions above 12.
Vec boxqp_enumerate(const Mat& H, const Vec& g, const Vec& lo, const Vec& hi);

// Central finite differences with relative step h_i = h * max(1, |x_i|).
Vec finite_diff_grad(const std::function<double(const Vec&)>& fn, const Vec& x,
                     double h = 1e-5);
Mat finite_diff_jac(const std::function<Vec(const Vec&)>& fn, const Vec& x,
                    double h = 1e-5);

}  // namespace ptoc

#endif  // PTOC_ORACLE_HPP_
