#include "sacr2/nn.hpp"

#include <cmath>
#include <istream>
#include <ostream>

namespace sacr2::nn {

Mlp Mlp::create(const std::vector<int>& dims, Activation activation, Rng& rng) {
  if (dims.size() < 2) throw ContractViolation("Mlp::create: need at least two dims");
  Mlp net;
  net.activation = activation;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l], fan_out = dims[l + 1];
    if (fan_in < 1 || fan_out < 1)
      throw ContractViolation("Mlp::create: layer dims must be positive");
    const Scalar bound = Scalar(1) / std::sqrt(Scalar(fan_in));
    Matrix w(fan_in, fan_out);
    for (int c = 0; c < fan_out; ++c)
      for (int r = 0; r < fan_in; ++r) w(r, c) = rng.uniform(-bound, bound);
    Vector b(fan_out);
    for (int i = 0; i < fan_out; ++i) b[i] = rng.uniform(-bound, bound);
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  return net;
}

Scalar Mlp::squared_weight_norm() const {
  Scalar total = 0;
  for (const Matrix& w : weights) total += w.squaredNorm();
  return total;
}

namespace {
Matrix apply_activation(const Matrix& pre, Activation activation) {
  if (activation == Activation::kRelu) return pre.cwiseMax(Scalar(0));
  return pre.array().tanh().matrix();
}

// derivative expressed through the activation output
Matrix activation_grad(const Matrix& post, Activation activation) {
  if (activation == Activation::kRelu)
    return (post.array() > Scalar(0)).cast<Scalar>().matrix();
  return (Scalar(1) - post.array().square()).matrix();
}
}  // namespace

Matrix forward(const Mlp& net, const MatrixRef& input, ForwardCache* cache) {
  if (input.cols() != net.input_dim())
    throw ContractViolation("forward: input width mismatch");
  if (cache) {
    cache->input = input;
    cache->pre.clear();
    cache->post.clear();
  }
  Matrix x = input;
  const int layers = net.num_layers();
  for (int l = 0; l < layers; ++l) {
    Matrix pre = (x * net.weights[size_t(l)]).rowwise() +
                 net.biases[size_t(l)].transpose();
    if (l < layers - 1) {
      x = apply_activation(pre, net.activation);
      if (cache) {
        cache->pre.push_back(std::move(pre));
        cache->post.push_back(x);
      }
    } else {
      if (cache) cache->pre.push_back(pre);
      x = std::move(pre);
    }
  }
  return x;
}

Gradients Gradients::zeros_like(const Mlp& net) {
  Gradients g;
  for (const Matrix& w : net.weights) g.weights.push_back(Matrix::Zero(w.rows(), w.cols()));
  for (const Vector& b : net.biases) g.biases.push_back(Vector::Zero(b.size()));
  return g;
}

void Gradients::add_l2(const Mlp& net, Scalar coeff) {
  for (size_t l = 0; l < weights.size(); ++l)
    weights[l] += (Scalar(2) * coeff) * net.weights[l];
}

Matrix backward(const Mlp& net, const ForwardCache& cache, const MatrixRef& d_output,
                Gradients* grads) {
  const int layers = net.num_layers();
  if (int(cache.pre.size()) != layers)
    throw ContractViolation("backward: cache does not match network");
  Matrix delta = d_output;  // gradient w.r.t. pre-activation of the top layer
  Matrix d_input;
  for (int l = layers - 1; l >= 0; --l) {
    const Matrix& layer_in = (l == 0) ? cache.input : cache.post[size_t(l - 1)];
    if (grads) {
      grads->weights[size_t(l)].noalias() += layer_in.transpose() * delta;
      grads->biases[size_t(l)] += delta.colwise().sum();
    }
    d_input.noalias() = delta * net.weights[size_t(l)].transpose();
    if (l > 0)
      delta = d_input.cwiseProduct(
          activation_grad(cache.post[size_t(l - 1)], net.activation));
  }
  return d_input;
}

AdamState AdamState::create(const Mlp& net, Scalar lr) {
  AdamState s;
  s.lr = lr;
  for (const Matrix& w : net.weights) {
    s.m_w.push_back(Matrix::Zero(w.rows(), w.cols()));
    s.v_w.push_back(Matrix::Zero(w.rows(), w.cols()));
  }
  for (const Vector& b : net.biases) {
    s.m_b.push_back(Vector::Zero(b.size()));
    s.v_b.push_back(Vector::Zero(b.size()));
  }
  return s;
}

namespace {
template <typename T>
void adam_tensor(T& param, const T& grad, T& m, T& v, Scalar lr, Scalar b1, Scalar b2,
                 Scalar eps, Scalar bias1, Scalar bias2) {
  m = b1 * m + (Scalar(1) - b1) * grad;
  v.array() = b2 * v.array() + (Scalar(1) - b2) * grad.array().square();
  param.array() -=
      lr * (m.array() / bias1) / ((v.array() / bias2).sqrt() + eps);
}
}  // namespace

void adam_step(Mlp& net, const Gradients& grads, AdamState& state) {
  if (grads.weights.size() != net.weights.size())
    throw ContractViolation("adam_step: gradient shape mismatch");
  ++state.step;
  const Scalar bias1 = Scalar(1) - std::pow(state.beta1, Scalar(state.step));
  const Scalar bias2 = Scalar(1) - std::pow(state.beta2, Scalar(state.step));
  for (size_t l = 0; l < net.weights.size(); ++l) {
    adam_tensor(net.weights[l], grads.weights[l], state.m_w[l], state.v_w[l],
                state.lr, state.beta1, state.beta2, state.eps, bias1, bias2);
    adam_tensor(net.biases[l], grads.biases[l], state.m_b[l], state.v_b[l], state.lr,
                state.beta1, state.beta2, state.eps, bias1, bias2);
  }
}

void polyak_update(Mlp& target, const Mlp& source, Scalar tau) {
  if (!(tau >= 0 && tau <= 1)) throw ContractViolation("polyak_update: tau outside [0, 1]");
  if (target.weights.size() != source.weights.size())
    throw ContractViolation("polyak_update: layer count mismatch");
  for (size_t l = 0; l < target.weights.size(); ++l) {
    if (target.weights[l].rows() != source.weights[l].rows() ||
        target.weights[l].cols() != source.weights[l].cols())
      throw ContractViolation("polyak_update: layer shape mismatch");
    target.weights[l] = tau * source.weights[l] + (Scalar(1) - tau) * target.weights[l];
    target.biases[l] = tau * source.biases[l] + (Scalar(1) - tau) * target.biases[l];
  }
}

PolicyNet PolicyNet::create(int obs_dim, int action_dim, const std::vector<int>& hidden,
                            Activation activation, Rng& rng) {
  std::vector<int> dims;
  dims.push_back(obs_dim);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(2 * action_dim);
  PolicyNet p;
  p.net = Mlp::create(dims, activation, rng);
  p.action_dim = action_dim;
  return p;
}

PolicySample policy_sample(const PolicyNet& policy, const MatrixRef& obs,
                           const MatrixRef& noise) {
  const int adim = policy.action_dim;
  if (noise.rows() != obs.rows() || noise.cols() != adim)
    throw ContractViolation("policy_sample: noise shape mismatch");
  PolicySample s;
  const Matrix head = forward(policy.net, obs, &s.cache);
  s.mean = head.leftCols(adim);
  const Matrix raw_log_std = head.rightCols(adim);
  s.clamp_pass = ((raw_log_std.array() > kLogStdMin) &&
                  (raw_log_std.array() < kLogStdMax))
                     .cast<Scalar>()
                     .matrix();
  s.log_std = raw_log_std.array().max(kLogStdMin).min(kLogStdMax).matrix();
  s.std_dev = s.log_std.array().exp().matrix();
  s.noise = noise;
  s.pre_squash = s.mean + s.std_dev.cwiseProduct(s.noise);
  // tanh rounds to exactly +/-1 for |u| > ~19; keep actions strictly interior
  const Scalar limit = Scalar(1) - Scalar(1e-12);
  s.action = s.pre_squash.array().tanh().max(-limit).min(limit).matrix();

  const Scalar log_2pi = std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
  // Gaussian log density of u under N(mean, std): (u - mean)/std == noise.
  Vector gauss = (-Scalar(0.5) * s.noise.array().square() - s.log_std.array() -
                  Scalar(0.5) * log_2pi)
                     .rowwise()
                     .sum()
                     .matrix();
  Vector squash = (Scalar(1) - s.action.array().square() + kSquashEps)
                      .log()
                      .rowwise()
                      .sum()
                      .matrix();
  s.log_prob = gauss - squash;
  return s;
}

void policy_backward(const PolicyNet& policy, const PolicySample& sample,
                     const MatrixRef& d_action, const VectorRef& d_log_prob,
                     const MatrixRef& d_mean_extra, Gradients* grads) {
  const int batch = int(sample.mean.rows());
  const int adim = policy.action_dim;

  // d(log_prob)/du from the squash correction -log(1 - tanh(u)^2 + eps)
  Matrix dlogp_du =
      (Scalar(2) * sample.action.array() * (Scalar(1) - sample.action.array().square()) /
       (Scalar(1) - sample.action.array().square() + kSquashEps))
          .matrix();

  Matrix d_u(batch, adim);
  d_u.setZero();
  if (d_action.size() > 0)
    d_u += d_action.cwiseProduct(
        (Scalar(1) - sample.action.array().square()).matrix());
  if (d_log_prob.size() > 0)
    d_u.array() += dlogp_du.array().colwise() * d_log_prob.col(0).array();

  Matrix d_mean = d_u;
  if (d_mean_extra.size() > 0) d_mean += d_mean_extra;

  // u = mean + exp(log_std) * noise; the Gaussian density term contributes
  // -1 per component to d(log_prob)/d(log_std).
  Matrix d_log_std = d_u.cwiseProduct(sample.std_dev.cwiseProduct(sample.noise));
  if (d_log_prob.size() > 0)
    d_log_std.array() -= d_log_prob.replicate(1, adim).array();
  d_log_std = d_log_std.cwiseProduct(sample.clamp_pass);

  Matrix d_head(batch, 2 * adim);
  d_head.leftCols(adim) = d_mean;
  d_head.rightCols(adim) = d_log_std;
  backward(policy.net, sample.cache, d_head, grads);
}

void save_mlp(std::ostream& out, const std::string& name, const Mlp& net) {
  out << "SACR2NETS v1 " << name << ' ' << net.num_layers() << ' '
      << (net.activation == Activation::kRelu ? "relu" : "tanh") << '\n';
  for (int l = 0; l < net.num_layers(); ++l) {
    const Matrix& w = net.weights[size_t(l)];
    out << "layer " << w.rows() << ' ' << w.cols() << '\n';
    for (int r = 0; r < w.rows(); ++r)
      for (int c = 0; c < w.cols(); ++c)
        out << format_double(w(r, c)) << (c + 1 == w.cols() ? '\n' : ' ');
    const Vector& b = net.biases[size_t(l)];
    for (int i = 0; i < b.size(); ++i)
      out << format_double(b[i]) << (i + 1 == b.size() ? '\n' : ' ');
  }
}

Mlp load_mlp(std::istream& in, const std::string& expected_name) {
  std::string magic, version, name, act;
  int layers = 0;
  if (!(in >> magic >> version >> name >> layers >> act) || magic != "SACR2NETS")
    throw IoError("load_mlp: not a checkpoint stream");
  if (version != "v1") throw IoError("load_mlp: unsupported version " + version);
  if (name != expected_name)
    throw IoError("load_mlp: expected tensor group '" + expected_name + "', found '" +
                  name + "'");
  Mlp net;
  net.activation = act == "relu" ? Activation::kRelu : Activation::kTanh;
  if (act != "relu" && act != "tanh") throw IoError("load_mlp: unknown activation " + act);
  for (int l = 0; l < layers; ++l) {
    std::string tag;
    long rows = 0, cols = 0;
    if (!(in >> tag >> rows >> cols) || tag != "layer" || rows < 1 || cols < 1)
      throw IoError("load_mlp: bad layer manifest");
    Matrix w(rows, cols);
    for (long r = 0; r < rows; ++r)
      for (long c = 0; c < cols; ++c)
        if (!(in >> w(r, c))) throw IoError("load_mlp: truncated weights");
    Vector b(cols);
    for (long i = 0; i < cols; ++i)
      if (!(in >> b[i])) throw IoError("load_mlp: truncated biases");
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  return net;
}

}  // namespace sacr2::nn
