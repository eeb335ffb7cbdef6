#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "sacr2/types.hpp"

namespace sacr2::nn {

enum class Activation { kRelu, kTanh };

/// Dense feed-forward network. weights[l] is (fan_in x fan_out); rows of a
/// batch are samples. Hidden layers share one activation, output is linear.
struct Mlp {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  Activation activation = Activation::kRelu;

  static Mlp create(const std::vector<int>& dims, Activation activation, Rng& rng);

  int num_layers() const { return int(weights.size()); }
  int input_dim() const { return int(weights.front().rows()); }
  int output_dim() const { return int(weights.back().cols()); }
  Scalar squared_weight_norm() const;  // weights only, biases excluded
};

struct ForwardCache {
  Matrix input;
  std::vector<Matrix> pre;   // pre-activations per layer
  std::vector<Matrix> post;  // hidden activations (num_layers - 1 entries)
};

/// Batched forward pass; fills `cache` when given so backward() can run.
Matrix forward(const Mlp& net, const MatrixRef& input, ForwardCache* cache = nullptr);

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static Gradients zeros_like(const Mlp& net);
  /// Adds the gradient of coeff * ||W||^2 (weight matrices only).
  void add_l2(const Mlp& net, Scalar coeff);
};

/// Reverse-mode pass. Accumulates parameter gradients into `grads` when
/// non-null (callers zero-initialize) and returns the input gradient.
Matrix backward(const Mlp& net, const ForwardCache& cache, const MatrixRef& d_output,
                Gradients* grads);

struct AdamState {
  std::vector<Matrix> m_w, v_w;
  std::vector<Vector> m_b, v_b;
  long step = 0;
  Scalar lr = 3e-4;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;

  static AdamState create(const Mlp& net, Scalar lr);
};

/// Bias-corrected Adam update in place.
void adam_step(Mlp& net, const Gradients& grads, AdamState& state);

/// target <- tau * source + (1 - tau) * target, elementwise.
void polyak_update(Mlp& target, const Mlp& source, Scalar tau);

// Squashed-Gaussian policy head. The backing net emits [mean | log_std]
// (output dim 2 * action_dim); log_std is clamped to [-20, 2], actions are
// tanh of the reparameterized pre-squash sample.
inline constexpr Scalar kLogStdMin = -20.0;
inline constexpr Scalar kLogStdMax = 2.0;
inline constexpr Scalar kSquashEps = 1e-6;

struct PolicyNet {
  Mlp net;
  int action_dim = 0;

  static PolicyNet create(int obs_dim, int action_dim, const std::vector<int>& hidden,
                          Activation activation, Rng& rng);
};

struct PolicySample {
  Matrix mean;
  Matrix log_std;      // clamped
  Matrix pre_squash;   // u = mean + exp(log_std) * noise
  Matrix action;       // tanh(u), strictly inside (-1, 1)
  Vector log_prob;     // Gaussian log-density minus squash correction
  Matrix noise;
  Matrix std_dev;
  Matrix clamp_pass;   // 1 where log_std gradient flows, 0 where clamped
  ForwardCache cache;

  Matrix deterministic_action() const { return mean.array().tanh().matrix(); }
};

/// Reparameterized sample: noise is supplied by the caller so the whole head
/// is a deterministic function of (params, obs, noise).
PolicySample policy_sample(const PolicyNet& policy, const MatrixRef& obs,
                           const MatrixRef& noise);

/// Backward through the head given upstream gradients w.r.t. the action, the
/// log-probability, and (optionally, for losses on tanh(mean)) the mean.
/// Accumulates into `grads`.
void policy_backward(const PolicyNet& policy, const PolicySample& sample,
                     const MatrixRef& d_action, const VectorRef& d_log_prob,
                     const MatrixRef& d_mean_extra, Gradients* grads);

// Checkpoint format: versioned flat numeric dump with a shape manifest.
// Values round-trip exactly.
void save_mlp(std::ostream& out, const std::string& name, const Mlp& net);
Mlp load_mlp(std::istream& in, const std::string& expected_name);

}  // namespace sacr2::nn
