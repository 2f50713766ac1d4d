#ifndef PTOC_POLICY_HPP_
#define PTOC_POLICY_HPP_

#include <cstdint>
#include <string>

#include "ptoc/types.hpp"

namespace ptoc {

enum class Activation { kRelu, kTanh };

// Gradient (or accumulation buffer) shaped like the network parameters.
struct ParamGrad {
  std::vector<Mat> w;
  std::vector<Vec> b;

  void set_zero();
  void add_scaled(const ParamGrad& other, double scale);
};

// Multilayer perceptron policy with a final tanh squashed into the control
// box: u = c + r .* tanh(z_L), c = (u_min + u_max)/2, r = (u_max - u_min)/2.
// Derivatives are hand-rolled for this fixed chain; see policy.cpp.
class PolicyNet {
 public:
  PolicyNet() = default;
  PolicyNet(const std::vector<int>& layer_sizes, Activation activation,
            Vec u_min, Vec u_max);

  // Kaiming-uniform fan-in initialization, deterministic from seed.
  static PolicyNet kaiming_init(const std::vector<int>& layer_sizes,
                                Activation activation, const Vec& u_min,
                                const Vec& u_max, std::uint64_t seed);

  int input_dim() const { return layer_sizes_.front(); }
  int output_dim() const { return layer_sizes_.back(); }
  int num_layers() const { return static_cast<int>(weights_.size()); }
  std::int64_t num_params() const;
  const std::vector<int>& layer_sizes() const { return layer_sizes_; }
  Activation activation() const { return activation_; }
  const Vec& u_min() const { return u_min_; }
  const Vec& u_max() const { return u_max_; }

  const std::vector<Mat>& weights() const { return weights_; }
  const std::vector<Vec>& biases() const { return biases_; }
  std::vector<Mat>& weights() { return weights_; }
  std::vector<Vec>& biases() { return biases_; }

  ParamGrad zero_grad() const;

  // Flat parameter view (row-major per layer, weights then bias), matching
  // the checkpoint layout.
  Vec params_vector() const;
  void set_params_vector(const Vec& theta);

 private:
  std::vector<int> layer_sizes_;
  Activation activation_{Activation::kRelu};
  std::vector<Mat> weights_;
  std::vector<Vec> biases_;
  Vec u_min_, u_max_;
};

Vec to_vector(const ParamGrad& grad);

// u = pi_theta(x)
Vec forward(const PolicyNet& net, const Vec& x);

// d(upstream' * pi_theta(x)) / d(theta)
ParamGrad backward_params(const PolicyNet& net, const Vec& x,
                          const Vec& upstream);

// d(v' * pi_theta(x)) / d(x) in a single reverse sweep.
Vec input_vjp(const PolicyNet& net, const Vec& x, const Vec& v);

// Full Jacobian d(pi_theta)/d(x) (nu x nx), assembled from nu reverse sweeps.
Mat input_jacobian(const PolicyNet& net, const Vec& x);

// d(upstream' * input_vjp(net, x, v)) / d(theta): the mixed second
// derivative used by stochastic Sobolev training. One reverse-over-reverse
// sweep per call.
ParamGrad sobolev_backward_params(const PolicyNet& net, const Vec& x,
                                  const Vec& v, const Vec& upstream);

// Checkpoint container: versioned header, architecture descriptor,
// little-endian float64 parameter blocks, FNV-1a checksum.
void save_policy(const PolicyNet& net, const std::string& path);
PolicyNet load_policy(const std::string& path);

}  // namespace ptoc

#endif  // PTOC_POLICY_HPP_
