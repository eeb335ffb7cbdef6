#include "sacr2/gradcheck.hpp"

#include <cmath>
#include <functional>

namespace sacr2 {

namespace {

Scalar rel_error(Scalar a, Scalar b) {
  return std::abs(a - b) / std::max({Scalar(1), std::abs(a), std::abs(b)});
}

/// Central-difference derivative of `loss` w.r.t. every parameter of `net`,
/// compared against `analytic`. The loss closure sees the perturbed net.
Scalar fd_check_net(nn::Mlp& net, const nn::Gradients& analytic,
                    const std::function<Scalar()>& loss) {
  Scalar worst = 0;
  const Scalar h = kGradCheckStep;
  for (size_t l = 0; l < net.weights.size(); ++l) {
    Matrix& w = net.weights[l];
    for (int r = 0; r < w.rows(); ++r)
      for (int c = 0; c < w.cols(); ++c) {
        const Scalar saved = w(r, c);
        w(r, c) = saved + h;
        const Scalar up = loss();
        w(r, c) = saved - h;
        const Scalar down = loss();
        w(r, c) = saved;
        worst = std::max(worst,
                         rel_error((up - down) / (2 * h), analytic.weights[l](r, c)));
      }
    Vector& b = net.biases[l];
    for (int i = 0; i < b.size(); ++i) {
      const Scalar saved = b[i];
      b[i] = saved + h;
      const Scalar up = loss();
      b[i] = saved - h;
      const Scalar down = loss();
      b[i] = saved;
      worst = std::max(worst, rel_error((up - down) / (2 * h), analytic.biases[l][i]));
    }
  }
  return worst;
}

}  // namespace

GradCheckProblem make_gradcheck_problem(std::uint64_t seed, bool relu_hidden) {
  GradCheckProblem p;
  p.config.hidden_units = 8;
  p.config.hidden_layers = 2;
  p.config.gamma = 0.97;
  p.config.alpha = 0.3;
  p.config.lambda_n = 1.0;
  p.config.n_step = 3;
  p.config.lambda_bc = 2.0;
  p.config.q_filter = false;
  p.config.l2_actor = 1e-3;
  p.config.l2_critic = 1e-3;

  const int obs_dim = 3, act_dim = 2, batch = 5;
  Rng rng = Rng::stream(seed, 0xfd);
  p.nets = AgentNets::create(obs_dim, act_dim, p.config, rng);
  if (!relu_hidden) {
    // rebuild with tanh hidden units (smooth everywhere, strictest check)
    Rng rng2 = Rng::stream(seed, 0xfe);
    p.nets.actor = nn::PolicyNet::create(obs_dim, act_dim, p.config.hidden_dims(),
                                         nn::Activation::kTanh, rng2);
    std::vector<int> cd = {obs_dim + act_dim, 8, 8, 1};
    p.nets.critic1 = nn::Mlp::create(cd, nn::Activation::kTanh, rng2);
    p.nets.critic2 = nn::Mlp::create(cd, nn::Activation::kTanh, rng2);
    p.nets.target1 = p.nets.critic1;
    p.nets.target2 = p.nets.critic2;
  }

  TrainBatch& b = p.batch;
  b.obs = rng.normal_matrix(batch, obs_dim);
  b.act = rng.normal_matrix(batch, act_dim).array().tanh().matrix();
  b.obs_next = rng.normal_matrix(batch, obs_dim);
  b.rew.resize(batch);
  b.done.resize(batch);
  b.is_demo.resize(batch);
  b.is_weights.resize(batch);
  for (int i = 0; i < batch; ++i) {
    b.rew[i] = rng.uniform(-1, 1);
    b.done[i] = i == 2 ? 1 : 0;
    b.is_demo[i] = i % 2 == 0 ? 1 : 0;
    b.is_weights[i] = rng.uniform(0.5, 1.0);
  }
  b.has_nstep = true;
  b.obs_n = rng.normal_matrix(batch, obs_dim);
  b.return_n.resize(batch);
  b.done_n.resize(batch);
  b.discount_n.resize(batch);
  for (int i = 0; i < batch; ++i) {
    b.return_n[i] = rng.uniform(-1, 1);
    b.done_n[i] = i == 4 ? 1 : 0;
    Scalar d = 1;
    const int m = 1 + i % 3;
    for (int k = 0; k < m; ++k) d *= p.config.gamma;
    b.discount_n[i] = d;
  }
  b.noise_bootstrap = rng.normal_matrix(batch, act_dim);
  b.noise_actor = rng.normal_matrix(batch, act_dim);
  return p;
}

std::vector<GradCheckReport> run_gradcheck_suites() {
  std::vector<GradCheckReport> reports;

  // MLP core: loss = sum(P .* forward(x)) against a fixed projection P.
  for (const bool relu : {false, true}) {
    Rng rng = Rng::stream(7, relu ? 0xa1 : 0xa2);
    nn::Mlp net = nn::Mlp::create({4, 6, 6, 3},
                                  relu ? nn::Activation::kRelu : nn::Activation::kTanh,
                                  rng);
    const Matrix x = rng.normal_matrix(5, 4);
    const Matrix proj = rng.normal_matrix(5, 3);
    nn::ForwardCache cache;
    nn::forward(net, x, &cache);
    nn::Gradients analytic = nn::Gradients::zeros_like(net);
    nn::backward(net, cache, proj, &analytic);
    auto loss = [&]() { return (proj.array() * nn::forward(net, x).array()).sum(); };
    reports.push_back({relu ? "mlp_backward_relu" : "mlp_backward_tanh",
                       fd_check_net(net, analytic, loss)});
  }

  for (const bool relu : {false, true}) {
    const char* suffix = relu ? "_relu" : "_tanh";
    GradCheckProblem p = make_gradcheck_problem(11, relu);

    {  // critic loss w.r.t. both critics (1-step + n-step + L2)
      nn::Gradients g1, g2;
      critic_loss(p.batch, p.nets, p.config, &g1, &g2);
      auto loss = [&]() { return critic_loss(p.batch, p.nets, p.config).loss; };
      Scalar worst = fd_check_net(p.nets.critic1, g1, loss);
      worst = std::max(worst, fd_check_net(p.nets.critic2, g2, loss));
      reports.push_back({std::string("critic_loss") + suffix, worst});
    }
    {  // actor loss (entropy + Q + BC + L2) w.r.t. the actor
      nn::Gradients ga;
      actor_loss(p.batch, p.nets, p.config, &ga);
      auto loss = [&]() { return actor_loss(p.batch, p.nets, p.config).loss; };
      reports.push_back(
          {std::string("actor_loss") + suffix, fd_check_net(p.nets.actor.net, ga, loss)});
    }
    {  // bc loss in isolation: analytic gradient recovered as the lambda_bc
      // difference of two actor gradients
      nn::Gradients with_bc, without_bc;
      actor_loss(p.batch, p.nets, p.config, &with_bc);
      SacConfig no_bc = p.config;
      no_bc.lambda_bc = 0;
      actor_loss(p.batch, p.nets, no_bc, &without_bc);
      nn::Gradients analytic = nn::Gradients::zeros_like(p.nets.actor.net);
      for (size_t l = 0; l < analytic.weights.size(); ++l) {
        analytic.weights[l] =
            (with_bc.weights[l] - without_bc.weights[l]) / p.config.lambda_bc;
        analytic.biases[l] =
            (with_bc.biases[l] - without_bc.biases[l]) / p.config.lambda_bc;
      }
      auto loss = [&]() { return bc_loss(p.batch, p.nets, p.config); };
      reports.push_back({std::string("bc_loss") + suffix,
                         fd_check_net(p.nets.actor.net, analytic, loss)});
    }
  }
  return reports;
}

}  // namespace sacr2
