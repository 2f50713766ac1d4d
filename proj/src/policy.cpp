#include "ptoc/policy.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "ptoc/instrumentation.hpp"
#include "ptoc/rng.hpp"

namespace ptoc {

namespace {

constexpr char kMagic[8] = {'P', 'T', 'O', 'C', 'P', 'O', 'L', '1'};
constexpr std::uint32_t kVersion = 1;

inline Vec act(const Vec& z, Activation a) {
  if (a == Activation::kTanh) return z.array().tanh();
  return z.cwiseMax(0.0);
}

// relu'(0) is defined as 0.
inline Vec act_prime(const Vec& z, Activation a) {
  if (a == Activation::kTanh) {
    return 1.0 - z.array().tanh().square();
  }
  return (z.array() > 0.0).cast<double>();
}

inline Vec act_second(const Vec& z, Activation a) {
  if (a == Activation::kTanh) {
    const Eigen::ArrayXd t = z.array().tanh();
    return -2.0 * t * (1.0 - t.square());
  }
  return Vec::Zero(z.size());
}

struct ForwardTrace {
  std::vector<Vec> z;  // pre-activations per layer
  std::vector<Vec> h;  // h[0] = x, h[l] = act(z[l]) for hidden layers
  Vec t;               // tanh(z_last)
};

ForwardTrace run_forward(const PolicyNet& net, const Vec& x) {
  const int L = net.num_layers();
  ForwardTrace tr;
  tr.z.resize(L);
  tr.h.resize(L);
  tr.h[0] = x;
  for (int l = 0; l < L; ++l) {
    tr.z[l] = net.weights()[l] * tr.h[l] + net.biases()[l];
    if (l + 1 < L) tr.h[l + 1] = act(tr.z[l], net.activation());
  }
  tr.t = tr.z[L - 1].array().tanh();
  return tr;
}

}  // namespace

void ParamGrad::set_zero() {
  for (auto& m : w) m.setZero();
  for (auto& v : b) v.setZero();
}

void ParamGrad::add_scaled(const ParamGrad& other, double scale) {
  for (std::size_t l = 0; l < w.size(); ++l) {
    w[l] += scale * other.w[l];
    b[l] += scale * other.b[l];
  }
}

PolicyNet::PolicyNet(const std::vector<int>& layer_sizes, Activation activation,
                     Vec u_min, Vec u_max)
    : layer_sizes_(layer_sizes),
      activation_(activation),
      u_min_(std::move(u_min)),
      u_max_(std::move(u_max)) {
  if (layer_sizes_.size() < 2) {
    throw std::invalid_argument("policy needs at least input and output sizes");
  }
  if (u_min_.size() != layer_sizes_.back() ||
      u_max_.size() != layer_sizes_.back()) {
    throw std::invalid_argument("control bounds must match the output size");
  }
  const int L = static_cast<int>(layer_sizes_.size()) - 1;
  weights_.resize(L);
  biases_.resize(L);
  for (int l = 0; l < L; ++l) {
    weights_[l] = Mat::Zero(layer_sizes_[l + 1], layer_sizes_[l]);
    biases_[l] = Vec::Zero(layer_sizes_[l + 1]);
  }
}

PolicyNet PolicyNet::kaiming_init(const std::vector<int>& layer_sizes,
                                  Activation activation, const Vec& u_min,
                                  const Vec& u_max, std::uint64_t seed) {
  PolicyNet net(layer_sizes, activation, u_min, u_max);
  Rng rng(seed);
  for (int l = 0; l < net.num_layers(); ++l) {
    const double fan_in = static_cast<double>(layer_sizes[l]);
    const double wb = std::sqrt(6.0 / fan_in);
    const double bb = 1.0 / std::sqrt(fan_in);
    Mat& W = net.weights_[l];
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      for (Eigen::Index j = 0; j < W.cols(); ++j) {
        W(i, j) = rng.uniform(-wb, wb);
      }
    }
    Vec& b = net.biases_[l];
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = rng.uniform(-bb, bb);
  }
  return net;
}

std::int64_t PolicyNet::num_params() const {
  std::int64_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
    n += static_cast<std::int64_t>(layer_sizes_[l] + 1) * layer_sizes_[l + 1];
  }
  return n;
}

ParamGrad PolicyNet::zero_grad() const {
  ParamGrad g;
  g.w.reserve(weights_.size());
  g.b.reserve(biases_.size());
  for (const auto& W : weights_) g.w.push_back(Mat::Zero(W.rows(), W.cols()));
  for (const auto& b : biases_) g.b.push_back(Vec::Zero(b.size()));
  return g;
}

Vec PolicyNet::params_vector() const {
  Vec theta(num_params());
  Eigen::Index pos = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const Mat& W = weights_[l];
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      for (Eigen::Index j = 0; j < W.cols(); ++j) theta[pos++] = W(i, j);
    }
    theta.segment(pos, biases_[l].size()) = biases_[l];
    pos += biases_[l].size();
  }
  return theta;
}

void PolicyNet::set_params_vector(const Vec& theta) {
  if (theta.size() != num_params()) {
    throw std::invalid_argument("parameter vector size mismatch");
  }
  Eigen::Index pos = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Mat& W = weights_[l];
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = theta[pos++];
    }
    biases_[l] = theta.segment(pos, biases_[l].size());
    pos += biases_[l].size();
  }
}

Vec to_vector(const ParamGrad& grad) {
  Eigen::Index n = 0;
  for (const auto& W : grad.w) n += W.size();
  for (const auto& b : grad.b) n += b.size();
  Vec out(n);
  Eigen::Index pos = 0;
  for (std::size_t l = 0; l < grad.w.size(); ++l) {
    const Mat& W = grad.w[l];
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      for (Eigen::Index j = 0; j < W.cols(); ++j) out[pos++] = W(i, j);
    }
    out.segment(pos, grad.b[l].size()) = grad.b[l];
    pos += grad.b[l].size();
  }
  return out;
}

Vec forward(const PolicyNet& net, const Vec& x) {
  if (x.size() != net.input_dim()) {
    throw std::invalid_argument("forward: input dimension mismatch");
  }
  const int L = net.num_layers();
  Vec h = x;
  for (int l = 0; l + 1 < L; ++l) {
    h = act(net.weights()[l] * h + net.biases()[l], net.activation());
  }
  const Vec zL = net.weights()[L - 1] * h + net.biases()[L - 1];
  const Vec c = 0.5 * (net.u_min() + net.u_max());
  const Vec r = 0.5 * (net.u_max() - net.u_min());
  return c.array() + r.array() * zL.array().tanh();
}

ParamGrad backward_params(const PolicyNet& net, const Vec& x,
                          const Vec& upstream) {
  if (upstream.size() != net.output_dim()) {
    throw std::invalid_argument("backward_params: upstream dimension mismatch");
  }
  const int L = net.num_layers();
  const ForwardTrace tr = run_forward(net, x);
  const Vec r = 0.5 * (net.u_max() - net.u_min());

  ParamGrad grad = net.zero_grad();
  Vec d = (r.array() * (1.0 - tr.t.array().square()) * upstream.array());
  for (int l = L - 1; l >= 0; --l) {
    grad.w[l] = d * tr.h[l].transpose();
    grad.b[l] = d;
    if (l > 0) {
      d = act_prime(tr.z[l - 1], net.activation())
              .cwiseProduct(net.weights()[l].transpose() * d);
    }
  }
  return grad;
}

Vec input_vjp(const PolicyNet& net, const Vec& x, const Vec& v) {
  if (v.size() != net.output_dim()) {
    throw std::invalid_argument("input_vjp: seed dimension mismatch");
  }
  counters().policy_vjp.fetch_add(1, std::memory_order_relaxed);

  const int L = net.num_layers();
  const ForwardTrace tr = run_forward(net, x);
  const Vec r = 0.5 * (net.u_max() - net.u_min());

  Vec a = (r.array() * (1.0 - tr.t.array().square()) * v.array());
  for (int l = L - 1; l > 0; --l) {
    a = act_prime(tr.z[l - 1], net.activation())
            .cwiseProduct(net.weights()[l].transpose() * a);
  }
  return net.weights()[0].transpose() * a;
}

Mat input_jacobian(const PolicyNet& net, const Vec& x) {
  counters().policy_jacobian.fetch_add(1, std::memory_order_relaxed);
  Mat J(net.output_dim(), net.input_dim());
  Vec e = Vec::Zero(net.output_dim());
  for (int j = 0; j < net.output_dim(); ++j) {
    e[j] = 1.0;
    J.row(j) = input_vjp(net, x, e).transpose();
    e[j] = 0.0;
  }
  return J;
}

// Gradient with respect to theta of S = upstream' * d(v' pi(x))/dx.
// The computation graph is the forward chain followed by the reverse sweep
// of input_vjp; a second reverse pass over that extended graph yields dS.
// Adjoint-chain notation: a_L = r (1 - t^2) v, e_l = W_{l+1}' a_{l+1},
// a_l = act'(z_l) e_l, g = W_1' a_1, S = upstream' g.
ParamGrad sobolev_backward_params(const PolicyNet& net, const Vec& x,
                                  const Vec& v, const Vec& upstream) {
  if (v.size() != net.output_dim() || upstream.size() != net.input_dim()) {
    throw std::invalid_argument("sobolev_backward_params: dimension mismatch");
  }
  counters().sobolev_sweeps.fetch_add(1, std::memory_order_relaxed);

  const int L = net.num_layers();
  const Activation sigma = net.activation();
  const ForwardTrace tr = run_forward(net, x);
  const Vec r = 0.5 * (net.u_max() - net.u_min());

  // first reverse sweep, keeping e_l
  std::vector<Vec> a(L), e(L);  // a[l], e[l] for layer index l in [0, L)
  a[L - 1] = (r.array() * (1.0 - tr.t.array().square()) * v.array());
  for (int l = L - 2; l >= 0; --l) {
    e[l] = net.weights()[l + 1].transpose() * a[l + 1];
    a[l] = act_prime(tr.z[l], sigma).cwiseProduct(e[l]);
  }

  ParamGrad grad = net.zero_grad();
  std::vector<Vec> zbar(L);
  for (int l = 0; l < L; ++l) zbar[l] = Vec::Zero(tr.z[l].size());

  // phase A: reverse over the adjoint chain, ascending
  Vec abar = net.weights()[0] * upstream;  // dS/da_0..ascending carrier
  grad.w[0] += a[0] * upstream.transpose();
  for (int l = 0; l + 1 < L; ++l) {
    const Vec ebar = act_prime(tr.z[l], sigma).cwiseProduct(abar);
    zbar[l] += act_second(tr.z[l], sigma).cwiseProduct(e[l]).cwiseProduct(abar);
    grad.w[l + 1] += a[l + 1] * ebar.transpose();
    abar = net.weights()[l + 1] * ebar;
  }
  // a_L = r (1 - t^2) v  =>  dz_L += abar .* r .* v .* (-2 t (1 - t^2))
  zbar[L - 1] += (abar.array() * r.array() * v.array() * (-2.0) *
                  tr.t.array() * (1.0 - tr.t.array().square()))
                     .matrix();

  // phase B: reverse over the primal chain, descending
  for (int l = L - 1; l >= 0; --l) {
    grad.w[l] += zbar[l] * tr.h[l].transpose();
    grad.b[l] += zbar[l];
    if (l > 0) {
      zbar[l - 1] += act_prime(tr.z[l - 1], sigma)
                         .cwiseProduct(net.weights()[l].transpose() * zbar[l]);
    }
  }
  return grad;
}

namespace {

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n,
                    std::uint64_t hash = 0xcbf29ce484222325ULL) {
  for (std::size_t i = 0; i < n; ++i) {
    hash ^= data[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

template <typename T>
void put(std::string& buf, const T& value) {
  const char* p = reinterpret_cast<const char*>(&value);
  buf.append(p, sizeof(T));
}

template <typename T>
T take(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size()) {
    throw std::runtime_error("checkpoint truncated");
  }
  T value;
  std::memcpy(&value, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

}  // namespace

void save_policy(const PolicyNet& net, const std::string& path) {
  std::string buf;
  buf.append(kMagic, sizeof(kMagic));
  put(buf, kVersion);
  put(buf, static_cast<std::uint32_t>(net.activation()));
  const auto& sizes = net.layer_sizes();
  put(buf, static_cast<std::uint32_t>(sizes.size()));
  for (int s : sizes) put(buf, static_cast<std::uint32_t>(s));
  for (Eigen::Index i = 0; i < net.u_min().size(); ++i) put(buf, net.u_min()[i]);
  for (Eigen::Index i = 0; i < net.u_max().size(); ++i) put(buf, net.u_max()[i]);
  const Vec theta = net.params_vector();
  for (Eigen::Index i = 0; i < theta.size(); ++i) put(buf, theta[i]);

  const std::uint64_t checksum =
      fnv1a(reinterpret_cast<const std::uint8_t*>(buf.data()), buf.size());
  put(buf, checksum);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

PolicyNet load_policy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());

  if (buf.size() < sizeof(kMagic) + sizeof(std::uint64_t)) {
    throw std::runtime_error("checkpoint truncated");
  }
  const std::size_t payload = buf.size() - sizeof(std::uint64_t);
  std::size_t pos = payload;
  const std::uint64_t stored = take<std::uint64_t>(buf, pos);
  const std::uint64_t actual =
      fnv1a(reinterpret_cast<const std::uint8_t*>(buf.data()), payload);
  if (stored != actual) throw std::runtime_error("checkpoint checksum mismatch");

  pos = 0;
  if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a policy checkpoint");
  }
  pos += sizeof(kMagic);
  const auto version = take<std::uint32_t>(buf, pos);
  if (version != kVersion) {
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version));
  }
  const auto act_code = take<std::uint32_t>(buf, pos);
  if (act_code > 1) throw std::runtime_error("unknown activation code");
  const auto n_sizes = take<std::uint32_t>(buf, pos);
  if (n_sizes < 2 || n_sizes > 64) {
    throw std::runtime_error("invalid layer-count header");
  }
  std::vector<int> sizes(n_sizes);
  for (auto& s : sizes) {
    const auto v = take<std::uint32_t>(buf, pos);
    if (v == 0 || v > 1000000) throw std::runtime_error("invalid layer size");
    s = static_cast<int>(v);
  }
  const int nu = sizes.back();
  Vec u_min(nu), u_max(nu);
  for (int i = 0; i < nu; ++i) u_min[i] = take<double>(buf, pos);
  for (int i = 0; i < nu; ++i) u_max[i] = take<double>(buf, pos);

  PolicyNet net(sizes, static_cast<Activation>(act_code), u_min, u_max);
  Vec theta(net.num_params());
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = take<double>(buf, pos);
  if (pos != payload) throw std::runtime_error("checkpoint has trailing bytes");
  net.set_params_vector(theta);
  return net;
}

}  // namespace ptoc
