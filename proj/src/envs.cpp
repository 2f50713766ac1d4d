#include "ptoc/envs.hpp"

#include <cmath>

#include "ptoc/instrumentation.hpp"

namespace ptoc {

namespace {

void check_dims(const SystemSpec& spec, const Vec& x, const Vec& u) {
  if (x.size() != spec.nx || u.size() != spec.nu) {
    throw std::invalid_argument("state/control dimension mismatch");
  }
}

// Double pendulum acceleration and its exact partials. Point masses on
// massless rods, absolute angles measured from the downward vertical:
//   M(q) qdd = u - c(q, w) - grav(q) - damping * w
// with M = [(m1+m2) l1^2, m2 l1 l2 cos(d); m2 l1 l2 cos(d), m2 l2^2],
// d = th1 - th2, c = m2 l1 l2 sin(d) * (w2^2, -w1^2).
struct DoublePendAccel {
  Eigen::Vector2d a;
  Eigen::Matrix2d a_q;   // d(a)/d(th1, th2)
  Eigen::Matrix2d a_w;   // d(a)/d(w1, w2)
  Eigen::Matrix2d a_u;   // d(a)/d(u1, u2)
};

DoublePendAccel double_pend_accel(const SystemSpec& s, const Vec& x,
                                  const Vec& u, bool with_derivs) {
  const double th1 = x[0], th2 = x[1], w1 = x[2], w2 = x[3];
  const double d = th1 - th2;
  const double sd = std::sin(d), cd = std::cos(d);
  const double m12 = s.m1 + s.m2;
  const double k = s.m2 * s.l1 * s.l2;

  Eigen::Matrix2d M;
  M << m12 * s.l1 * s.l1, k * cd, k * cd, s.m2 * s.l2 * s.l2;

  Eigen::Vector2d c(k * sd * w2 * w2, -k * sd * w1 * w1);
  Eigen::Vector2d grav(m12 * s.gravity * s.l1 * std::sin(th1),
                       s.m2 * s.gravity * s.l2 * std::sin(th2));
  Eigen::Vector2d r = Eigen::Vector2d(u[0], u[1]) - c - grav -
                      s.damping * Eigen::Vector2d(w1, w2);

  Eigen::Matrix2d Minv = M.inverse();

  DoublePendAccel out;
  out.a = Minv * r;
  if (!with_derivs) return out;

  // a = Minv r  =>  da/ds = Minv (dr/ds - dM/ds a)
  Eigen::Matrix2d dM_d;  // dM/dd (d = th1 - th2)
  dM_d << 0.0, -k * sd, -k * sd, 0.0;

  Eigen::Vector2d dr_th1 =
      -Eigen::Vector2d(k * cd * w2 * w2, -k * cd * w1 * w1) -
      Eigen::Vector2d(m12 * s.gravity * s.l1 * std::cos(th1), 0.0);
  Eigen::Vector2d dr_th2 =
      Eigen::Vector2d(k * cd * w2 * w2, -k * cd * w1 * w1) -
      Eigen::Vector2d(0.0, s.m2 * s.gravity * s.l2 * std::cos(th2));

  out.a_q.col(0) = Minv * (dr_th1 - dM_d * out.a);
  out.a_q.col(1) = Minv * (dr_th2 + dM_d * out.a);

  Eigen::Vector2d dr_w1(-s.damping, 2.0 * k * sd * w1);
  Eigen::Vector2d dr_w2(-2.0 * k * sd * w2, -s.damping);
  out.a_w.col(0) = Minv * dr_w1;
  out.a_w.col(1) = Minv * dr_w2;

  out.a_u = Minv;
  return out;
}

double pend_accel(const SystemSpec& s, double th, double w, double tau) {
  const double inertia = s.m1 * s.l1 * s.l1;
  return (tau - s.damping * w - s.m1 * s.gravity * s.l1 * std::sin(th)) /
         inertia;
}

}  // namespace

void SystemSpec::validate() const {
  if (nx <= 0 || nu <= 0) throw ConfigError("system dimensions must be positive");
  if (dt <= 0.0) throw ConfigError("dt must be positive");
  if (u_min.size() != nu || u_max.size() != nu) {
    throw ConfigError("control bounds must have dimension nu");
  }
  for (int i = 0; i < nu; ++i) {
    if (!(u_min[i] < u_max[i])) {
      throw ConfigError("u_min must be elementwise below u_max");
    }
  }
}

SystemSpec lqr_spec(double dt, double u_bound) {
  SystemSpec s;
  s.kind = SystemKind::kLqr;
  s.nx = 2;
  s.nu = 1;
  s.dt = dt;
  s.u_min = Vec::Constant(1, -u_bound);
  s.u_max = Vec::Constant(1, u_bound);
  return s;
}

SystemSpec pendulum_spec(double dt, double u_bound) {
  SystemSpec s;
  s.kind = SystemKind::kPendulum;
  s.nx = 2;
  s.nu = 1;
  s.dt = dt;
  s.u_min = Vec::Constant(1, -u_bound);
  s.u_max = Vec::Constant(1, u_bound);
  return s;
}

SystemSpec double_pendulum_spec(double dt, double u_bound) {
  SystemSpec s;
  s.kind = SystemKind::kDoublePendulum;
  s.nx = 4;
  s.nu = 2;
  s.dt = dt;
  s.u_min = Vec::Constant(2, -u_bound);
  s.u_max = Vec::Constant(2, u_bound);
  return s;
}

Vec step(const SystemSpec& spec, const Vec& x, const Vec& u) {
  check_dims(spec, x, u);
  counters().sim_steps.fetch_add(1, std::memory_order_relaxed);

  const double dt = spec.dt;
  Vec next(spec.nx);
  switch (spec.kind) {
    case SystemKind::kLqr: {
      const double v = x[1] + dt * u[0];
      next[1] = v;
      next[0] = x[0] + dt * v;
      break;
    }
    case SystemKind::kPendulum: {
      const double a = pend_accel(spec, x[0], x[1], u[0]);
      const double w = x[1] + dt * a;
      next[1] = w;
      next[0] = x[0] + dt * w;
      break;
    }
    case SystemKind::kDoublePendulum: {
      const auto acc = double_pend_accel(spec, x, u, false);
      Eigen::Vector2d w = x.segment<2>(2) + dt * acc.a;
      next.segment<2>(2) = w;
      next.segment<2>(0) = x.segment<2>(0) + dt * w;
      break;
    }
  }
  return next;
}

DynamicsDerivs step_derivs(const SystemSpec& spec, const Vec& x, const Vec& u) {
  check_dims(spec, x, u);

  const double dt = spec.dt;
  DynamicsDerivs d;
  d.fx = Mat::Zero(spec.nx, spec.nx);
  d.fu = Mat::Zero(spec.nx, spec.nu);

  switch (spec.kind) {
    case SystemKind::kLqr: {
      d.fx << 1.0, dt, 0.0, 1.0;
      d.fu << dt * dt, dt;
      break;
    }
    case SystemKind::kPendulum: {
      const double inertia = spec.m1 * spec.l1 * spec.l1;
      const double a_th =
          -spec.m1 * spec.gravity * spec.l1 * std::cos(x[0]) / inertia;
      const double a_w = -spec.damping / inertia;
      const double a_u = 1.0 / inertia;
      d.fx << 1.0 + dt * dt * a_th, dt * (1.0 + dt * a_w), dt * a_th,
          1.0 + dt * a_w;
      d.fu << dt * dt * a_u, dt * a_u;
      break;
    }
    case SystemKind::kDoublePendulum: {
      const auto acc = double_pend_accel(spec, x, u, true);
      const Eigen::Matrix2d I = Eigen::Matrix2d::Identity();
      d.fx.block<2, 2>(0, 0) = I + dt * dt * acc.a_q;
      d.fx.block<2, 2>(0, 2) = dt * (I + dt * acc.a_w);
      d.fx.block<2, 2>(2, 0) = dt * acc.a_q;
      d.fx.block<2, 2>(2, 2) = I + dt * acc.a_w;
      d.fu.block<2, 2>(0, 0) = dt * dt * acc.a_u;
      d.fu.block<2, 2>(2, 0) = dt * acc.a_u;
      break;
    }
  }
  return d;
}

Vec ee_pos(const SystemSpec& spec, const Vec& x) {
  switch (spec.kind) {
    case SystemKind::kLqr:
      return x;
    case SystemKind::kPendulum: {
      Vec p(2);
      p << spec.l1 * std::sin(x[0]), -spec.l1 * std::cos(x[0]);
      return p;
    }
    case SystemKind::kDoublePendulum: {
      Vec p(2);
      p << spec.l1 * std::sin(x[0]) + spec.l2 * std::sin(x[1]),
          -spec.l1 * std::cos(x[0]) - spec.l2 * std::cos(x[1]);
      return p;
    }
  }
  throw std::logic_error("unreachable");
}

Mat ee_jac(const SystemSpec& spec, const Vec& x) {
  switch (spec.kind) {
    case SystemKind::kLqr:
      return Mat::Identity(spec.nx, spec.nx);
    case SystemKind::kPendulum: {
      Mat J = Mat::Zero(2, 2);
      J(0, 0) = spec.l1 * std::cos(x[0]);
      J(1, 0) = spec.l1 * std::sin(x[0]);
      return J;
    }
    case SystemKind::kDoublePendulum: {
      Mat J = Mat::Zero(2, 4);
      J(0, 0) = spec.l1 * std::cos(x[0]);
      J(0, 1) = spec.l2 * std::cos(x[1]);
      J(1, 0) = spec.l1 * std::sin(x[0]);
      J(1, 1) = spec.l2 * std::sin(x[1]);
      return J;
    }
  }
  throw std::logic_error("unreachable");
}

namespace {

CostTerms quadratic_cost(const SystemSpec& spec, const Mat& wp, const Mat& wx,
                         const Mat* wu, const GoalDesc& goal, const Vec& x,
                         const Vec& u) {
  CostTerms c;
  c.lx = Vec::Zero(spec.nx);
  c.lu = Vec::Zero(spec.nu);
  c.lxx = Mat::Zero(spec.nx, spec.nx);
  c.luu = Mat::Zero(spec.nu, spec.nu);
  c.lxu = Mat::Zero(spec.nx, spec.nu);

  // task term 0.5 * |p(x) - p_bar|^2_Wp, Gauss-Newton on lxx
  Vec residual;
  Mat J;
  if (goal.kind == GoalDesc::Kind::kState) {
    residual = x - goal.target;
    J = Mat::Identity(spec.nx, spec.nx);
  } else {
    residual = ee_pos(spec, x) - goal.target;
    J = ee_jac(spec, x);
  }
  const Vec wr = wp * residual;
  c.value += 0.5 * residual.dot(wr);
  c.lx += J.transpose() * wr;
  c.lxx += J.transpose() * wp * J;

  // state regularization 0.5 * |x|^2_Wx
  const Vec wxx = wx * x;
  c.value += 0.5 * x.dot(wxx);
  c.lx += wxx;
  c.lxx += wx;

  if (wu != nullptr) {
    const Vec wuu = (*wu) * u;
    c.value += 0.5 * u.dot(wuu);
    c.lu += wuu;
    c.luu += *wu;
  }
  return c;
}

}  // namespace

CostTerms stage_cost(const SystemSpec& spec, const CostWeights& weights,
                     const GoalDesc& goal, const Vec& x, const Vec& u) {
  return quadratic_cost(spec, weights.wp, weights.wx, &weights.wu, goal, x, u);
}

CostTerms terminal_cost(const SystemSpec& spec, const CostWeights& weights,
                        const GoalDesc& goal, const Vec& x) {
  const double s = weights.terminal_scale;
  const Vec u0 = Vec::Zero(spec.nu);
  return quadratic_cost(spec, (s * weights.wp).eval(), (s * weights.wx).eval(),
                        nullptr, goal, x, u0);
}

double total_energy(const SystemSpec& spec, const Vec& x) {
  switch (spec.kind) {
    case SystemKind::kPendulum: {
      const double kin = 0.5 * spec.m1 * spec.l1 * spec.l1 * x[1] * x[1];
      const double pot =
          spec.m1 * spec.gravity * spec.l1 * (1.0 - std::cos(x[0]));
      return kin + pot;
    }
    case SystemKind::kDoublePendulum: {
      const double th1 = x[0], th2 = x[1], w1 = x[2], w2 = x[3];
      const double kin =
          0.5 * (spec.m1 + spec.m2) * spec.l1 * spec.l1 * w1 * w1 +
          0.5 * spec.m2 * spec.l2 * spec.l2 * w2 * w2 +
          spec.m2 * spec.l1 * spec.l2 * w1 * w2 * std::cos(th1 - th2);
      const double pot =
          (spec.m1 + spec.m2) * spec.gravity * spec.l1 * (1.0 - std::cos(th1)) +
          spec.m2 * spec.gravity * spec.l2 * (1.0 - std::cos(th2));
      return kin + pot;
    }
    default:
      throw std::invalid_argument("total_energy: pendulum systems only");
  }
}

Mat lqr_A(const SystemSpec& spec) {
  Mat A(2, 2);
  A << 1.0, spec.dt, 0.0, 1.0;
  return A;
}

Mat lqr_B(const SystemSpec& spec) {
  Mat B(2, 1);
  B << spec.dt * spec.dt, spec.dt;
  return B;
}

CostWeights default_weights(const SystemSpec& spec) {
  CostWeights w;
  switch (spec.kind) {
    case SystemKind::kLqr:
      w.wp = Mat::Identity(2, 2);
      w.wu = 0.1 * Mat::Identity(1, 1);
      w.wx = Mat::Zero(2, 2);
      break;
    case SystemKind::kPendulum:
      w.wp = 10.0 * Mat::Identity(2, 2);
      w.wu = 0.01 * Mat::Identity(1, 1);
      w.wx = Mat::Zero(2, 2);
      w.wx(1, 1) = 0.1;  // joint velocity only
      break;
    case SystemKind::kDoublePendulum:
      w.wp = 10.0 * Mat::Identity(2, 2);
      w.wu = 0.01 * Mat::Identity(2, 2);
      w.wx = Mat::Zero(4, 4);
      w.wx(2, 2) = 0.1;
      w.wx(3, 3) = 0.1;
      break;
  }
  return w;
}

GoalDesc default_goal(const SystemSpec& spec) {
  GoalDesc g;
  switch (spec.kind) {
    case SystemKind::kLqr:
      g.kind = GoalDesc::Kind::kState;
      g.target = Vec::Zero(2);
      break;
    case SystemKind::kPendulum:
      g.kind = GoalDesc::Kind::kEndEffector;
      g.target = Vec(2);
      g.target << 0.0, spec.l1;  // upright
      break;
    case SystemKind::kDoublePendulum:
      g.kind = GoalDesc::Kind::kEndEffector;
      g.target = Vec(2);
      g.target << 0.0, spec.l1 + spec.l2;
      break;
  }
  return g;
}

}  // namespace ptoc
