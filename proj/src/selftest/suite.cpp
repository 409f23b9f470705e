#include "nasrl/selftest/suite.hpp"

#include <cmath>
#include <sstream>

#include "nasrl/autodiff/ops.hpp"
#include "nasrl/nas/search.hpp"
#include "nasrl/ppo/ppo.hpp"
#include "nasrl/rng.hpp"
#include "nasrl/selftest/oracles.hpp"
#include "nasrl/simd/kernels.hpp"

namespace nasrl::selftest {

using ad::PadMode;
using ad::Tensor;

namespace {

Tensor random_tensor(Rng& rng, ad::Shape shape, bool grad = false, double scale = 1.0) {
  std::vector<double> v(ad::shape_numel(shape));
  for (double& x : v) x = rng.uniform(-scale, scale);
  return Tensor::from(std::move(shape), std::move(v), grad);
}

std::string format(double x) {
  std::ostringstream s;
  s.precision(3);
  s << x;
  return s.str();
}

struct ConvLayer {
  std::size_t out, kernel, stride;
  PadMode mode;
};

// A random conv stack with policy and value heads, plus the minibatch its
// loss reads.
struct RandomNetwork {
  Tensor input;
  std::vector<ConvLayer> convs;
  std::size_t pool_kernel = 0, pool_stride = 1;
  std::size_t flat = 0, actions = 0;
  bool ppo_head = false;
  std::vector<Tensor> params;
  ppo::Minibatch mb;

  Tensor forward_logits(Tensor& values) const {
    Tensor h = input;
    std::size_t p = 0;
    for (const auto& c : convs) {
      h = ad::tanh(ad::conv2d(h, params[p], params[p + 1], c.stride, c.mode));
      p += 2;
    }
    if (pool_kernel) h = ad::maxpool2d(h, pool_kernel, pool_stride);
    h = ad::reshape(h, {input.shape()[0], flat});
    values = ad::reshape(ad::linear(h, params[p + 2], params[p + 3]), {input.shape()[0]});
    return ad::linear(h, params[p], params[p + 1]);
  }

  Tensor loss() const {
    Tensor values;
    const Tensor logits = forward_logits(values);
    if (ppo_head) return ppo::ppo_loss(logits, values, mb, ppo::PpoConfig{}).total;
    const Tensor logp = ad::log_softmax(logits);
    const Tensor nll = ad::neg(ad::sum(ad::gather(logp, mb.actions)));
    return ad::add(nll, ad::add(ad::scale(ad::sum(ad::entropy_from_log_probs(logp)), 0.1),
                                ad::sum(ad::square(values))));
  }
};

RandomNetwork random_network(Rng& rng) {
  RandomNetwork net;
  const std::size_t n = 2, c = 1 + rng.uniform_int(3), hw = 4 + rng.uniform_int(4);
  net.input = random_tensor(rng, {n, c, hw, hw});
  std::size_t channels = c, size = hw;
  const std::size_t depth = 1 + rng.uniform_int(2);
  for (std::size_t d = 0; d < depth; ++d) {
    ConvLayer l{2 + rng.uniform_int(2), 1 + rng.uniform_int(4), 1 + rng.uniform_int(2),
                rng.uniform() < 0.7 ? PadMode::same_size : PadMode::valid};
    if (l.mode == PadMode::valid && l.kernel > size) l.mode = PadMode::same_size;
    net.params.push_back(random_tensor(rng, {l.out, channels, l.kernel, l.kernel}, true, 0.6));
    net.params.push_back(random_tensor(rng, {l.out}, true, 0.3));
    size = ad::conv_out_size(size, l.kernel, l.stride, l.mode);
    channels = l.out;
    net.convs.push_back(l);
  }
  if (size >= 2 && rng.uniform() < 0.5) {
    net.pool_kernel = 2;
    net.pool_stride = 1 + rng.uniform_int(2);
    size = ad::conv_out_size(size, net.pool_kernel, net.pool_stride, PadMode::same_size);
  }
  net.flat = channels * size * size;
  net.actions = 2 + rng.uniform_int(3);
  net.params.push_back(random_tensor(rng, {net.actions, net.flat}, true, 0.5));
  net.params.push_back(random_tensor(rng, {net.actions}, true, 0.2));
  net.params.push_back(random_tensor(rng, {1, net.flat}, true, 0.5));
  net.params.push_back(random_tensor(rng, {1}, true, 0.2));
  net.ppo_head = rng.uniform() < 0.5;

  for (std::size_t i = 0; i < n; ++i) {
    net.mb.actions.push_back(rng.uniform_int(net.actions));
    net.mb.advantages.push_back(rng.normal());
    net.mb.returns.push_back(rng.uniform(-1, 1));
  }
  // Behaviour log-probs put each ratio well inside or well outside the clip
  // interval so no finite-difference step crosses a kink.
  ad::NoGradGuard no_grad;
  Tensor values;
  const Tensor logp = ad::gather(ad::log_softmax(net.forward_logits(values)), net.mb.actions);
  const double ranges[3][2] = {{0.95, 1.05}, {1.2, 1.4}, {0.6, 0.8}};
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = ranges[rng.uniform_int(3)];
    net.mb.old_log_probs.push_back(logp[i] - std::log(rng.uniform(r[0], r[1])));
  }
  return net;
}

}  // namespace

CheckOutcome gradient_suite(std::size_t networks, std::uint64_t seed, double tolerance) {
  Rng rng(seed);
  double worst = 0.0;
  std::size_t entries = 0, ppo_heads = 0, pools = 0;
  for (std::size_t i = 0; i < networks; ++i) {
    RandomNetwork net = random_network(rng);
    auto r = check_gradients([&] { return net.loss(); }, net.params, 1e-5);
    worst = std::max(worst, r.max_rel_error);
    entries += r.entries;
    ppo_heads += net.ppo_head;
    pools += net.pool_kernel != 0;
  }
  return {"gradient check", worst < tolerance,
          std::to_string(networks) + " networks (" + std::to_string(ppo_heads) + " PPO heads, " +
              std::to_string(pools) + " with pooling), " + std::to_string(entries) +
              " entries, max rel error " + format(worst)};
}

CheckOutcome gae_oracle_suite(std::size_t batches, std::uint64_t seed, double tolerance) {
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t t = 0; t < batches; ++t) {
    ppo::RolloutBatch b;
    b.steps = 2 + rng.uniform_int(30);
    b.envs = 1 + rng.uniform_int(8);
    for (std::size_t i = 0; i < b.steps * b.envs; ++i) {
      b.rewards.push_back(rng.uniform(-1, 1));
      b.values.push_back(rng.uniform(-1, 1));
      b.dones.push_back(rng.uniform() < 0.1 ? 1.0 : 0.0);
    }
    for (std::size_t e = 0; e < b.envs; ++e) b.bootstrap_values.push_back(rng.uniform(-1, 1));
    const double gamma = rng.uniform(0.9, 1.0), lambda = rng.uniform(0.0, 1.0);
    const auto got = ppo::compute_gae(b, gamma, lambda, false);
    const auto ref = reference_gae(b.rewards, b.values, b.dones, b.bootstrap_values, b.steps,
                                   b.envs, gamma, lambda);
    for (std::size_t i = 0; i < ref.size(); ++i)
      worst = std::max(worst, std::abs(got.advantages[i] - ref[i]));
    const auto norm = ppo::compute_gae(b, gamma, lambda, true);
    const auto ref_norm = reference_normalize(ref);
    for (std::size_t i = 0; i < ref.size(); ++i)
      worst = std::max(worst, std::abs(norm.advantages[i] - ref_norm[i]));
  }
  return {"GAE oracle", worst < tolerance,
          std::to_string(batches) + " batches, max abs error " + format(worst)};
}

CheckOutcome ppo_loss_oracle_suite(std::size_t batches, std::uint64_t seed, double tolerance) {
  Rng rng(seed);
  const ppo::PpoConfig cfg;
  double worst = 0.0;
  for (std::size_t t = 0; t < batches; ++t) {
    const std::size_t n = 1 + rng.uniform_int(64), a = 2 + rng.uniform_int(5);
    std::vector<double> logits, values;
    ppo::Minibatch mb;
    for (std::size_t i = 0; i < n * a; ++i) logits.push_back(rng.uniform(-3, 3));
    for (std::size_t i = 0; i < n; ++i) {
      values.push_back(rng.uniform(-1, 1));
      mb.actions.push_back(rng.uniform_int(a));
      mb.old_log_probs.push_back(-rng.uniform(0.1, 2.5));
      mb.advantages.push_back(rng.normal());
      mb.returns.push_back(rng.uniform(-2, 2));
    }
    const auto terms = ppo::ppo_loss(Tensor::from({n, a}, logits), Tensor::from({n}, values), mb, cfg);
    const double ref =
        reference_ppo_loss(logits, a, values, mb.actions, mb.old_log_probs, mb.advantages,
                           mb.returns, cfg.clip, cfg.value_loss_coef, cfg.entropy_coef);
    worst = std::max(worst, std::abs(terms.total.item() - ref));
  }
  return {"PPO loss oracle", worst < tolerance,
          std::to_string(batches) + " batches, max abs error " + format(worst)};
}

CheckOutcome conv_pool_oracle_suite(std::size_t cases, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t t = 0; t < cases; ++t) {
    const std::size_t c = 1 + rng.uniform_int(4), h = 3 + rng.uniform_int(10);
    const std::size_t co = 1 + rng.uniform_int(4), k = 1 + rng.uniform_int(std::min<std::size_t>(h, 8));
    const std::size_t s = 1 + rng.uniform_int(4);
    const Tensor x = random_tensor(rng, {c, h, h});
    const Tensor w = random_tensor(rng, {co, c, k, k});
    const std::size_t out = ad::conv_out_size(h, k, s, PadMode::same_size);
    const std::size_t pad = ((out - 1) * s + k > h ? (out - 1) * s + k - h : 0) / 2;
    const Tensor y = ad::conv2d(x, w, s, PadMode::same_size);
    const auto ref = reference_conv2d(x.data(), c, h, h, w.data(), co, k, s, pad, pad, out, out);
    for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(y[i] - ref[i]));
    const Tensor p = ad::maxpool2d(x, k, s);
    const auto pref = reference_maxpool(x.data(), c, h, h, k, s, pad, pad, out, out);
    for (std::size_t i = 0; i < pref.size(); ++i) worst = std::max(worst, std::abs(p[i] - pref[i]));
  }
  return {"conv/pool oracle", worst < 1e-12,
          std::to_string(cases) + " shapes, max abs error " + format(worst)};
}

CheckOutcome simd_equivalence_suite(std::uint64_t seed) {
  const auto& ref = simd::scalar_kernels();
  const auto& act = simd::active_kernels();
  Rng rng(seed);
  double worst = 0.0;
  const std::size_t shapes[][3] = {{1, 1, 1}, {3, 5, 7}, {8, 8, 8}, {13, 17, 29}, {6, 400, 300}, {12, 9, 700}};
  auto fill = [&](std::size_t len) {
    std::vector<double> v(len);
    for (double& x : v) x = rng.uniform(-1, 1);
    return v;
  };
  for (const auto& sh : shapes) {
    const std::size_t m = sh[0], n = sh[1], k = sh[2];
    const auto a = fill(m * k), b_nt = fill(n * k), b_nn = fill(k * n), c0 = fill(m * n);
    auto diff = [&](const std::vector<double>& x, const std::vector<double>& y) {
      double d = 0;
      for (std::size_t i = 0; i < x.size(); ++i)
        d = std::max(d, std::abs(x[i] - y[i]) / std::max(1.0, std::abs(y[i])));
      return d;
    };
    std::vector<double> r(m * n), g(m * n);
    ref.gemm_nt(a.data(), b_nt.data(), r.data(), m, n, k);
    act.gemm_nt(a.data(), b_nt.data(), g.data(), m, n, k);
    worst = std::max(worst, diff(g, r));
    r = c0;
    g = c0;
    ref.gemm_nn_acc(a.data(), b_nn.data(), r.data(), m, n, k);
    act.gemm_nn_acc(a.data(), b_nn.data(), g.data(), m, n, k);
    worst = std::max(worst, diff(g, r));
    r = c0;
    g = c0;
    ref.gemm_tn_acc(a.data(), b_nn.data(), r.data(), m, n, k);  // a read as [k, m]
    act.gemm_tn_acc(a.data(), b_nn.data(), g.data(), m, n, k);
    worst = std::max(worst, diff(g, r));
    worst = std::max(worst, std::abs(ref.dot(a.data(), a.data(), a.size()) -
                                     act.dot(a.data(), a.data(), a.size())) /
                                std::max(1.0, double(a.size())));
  }
  return {"SIMD equivalence", worst < 1e-12,
          std::string(act.name) + " vs scalar, max rel error " + format(worst)};
}

CheckOutcome best_of_k_oracle_suite(std::size_t trials, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> table;
  for (int i = 0; i < 25; ++i) table.push_back(rng.uniform(0, 100));
  const double exact = exact_best_of_k_mean(table, 3);
  const auto s = nas::best_of_k(table, 3, trials, rng);
  const double sigma = s.std / std::sqrt(double(trials));
  const double z = sigma > 0 ? std::abs(s.mean - exact) / sigma : 0.0;
  return {"best-of-K oracle", std::abs(s.mean - exact) <= 3 * sigma,
          "K=3 over 25 entries, " + std::to_string(trials) + " trials: mean " + format(s.mean) +
              " vs exact " + format(exact) + " (" + format(z) + " sigma)"};
}

std::vector<CheckOutcome> run_selftest(std::ostream& log) {
  std::vector<CheckOutcome> all{gradient_suite(24, 101),          gae_oracle_suite(100, 102),
                                ppo_loss_oracle_suite(100, 103),  conv_pool_oracle_suite(60, 104),
                                simd_equivalence_suite(105),      best_of_k_oracle_suite(1000, 106)};
  for (const auto& c : all) log << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
  return all;
}

}  // namespace nasrl::selftest
