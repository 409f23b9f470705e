#include "nasrl/selftest/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nasrl::selftest {

GradCheckResult check_gradients(const std::function<ad::Tensor()>& loss_fn,
                                std::span<ad::Tensor> params, double h) {
  for (auto& p : params) p.zero_grad();
  ad::backward(loss_fn());
  std::vector<std::vector<double>> analytic;
  for (auto& p : params) {
    if (p.has_grad())
      analytic.emplace_back(p.grad().begin(), p.grad().end());
    else
      analytic.emplace_back(p.numel(), 0.0);
  }

  GradCheckResult result;
  ad::NoGradGuard no_grad;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto data = params[t].mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + h;
      const double up = loss_fn().item();
      data[i] = saved - h;
      const double down = loss_fn().item();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[t][i];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      result.max_rel_error = std::max(result.max_rel_error, err);
      ++result.entries;
    }
  }
  return result;
}

std::vector<double> reference_conv2d(std::span<const double> input, std::size_t c,
                                     std::size_t h, std::size_t w,
                                     std::span<const double> weight, std::size_t co,
                                     std::size_t k, std::size_t stride, std::size_t pad_top,
                                     std::size_t pad_left, std::size_t out_h, std::size_t out_w) {
  std::vector<double> out(co * out_h * out_w, 0.0);
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t y = 0; y < out_h; ++y)
      for (std::size_t x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (std::size_t i = 0; i < c; ++i)
          for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long iy = static_cast<long>(y * stride + ky) - static_cast<long>(pad_top);
              const long ix = static_cast<long>(x * stride + kx) - static_cast<long>(pad_left);
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w))
                continue;
              acc += input[(i * h + iy) * w + ix] * weight[((o * c + i) * k + ky) * k + kx];
            }
        out[(o * out_h + y) * out_w + x] = acc;
      }
  return out;
}

std::vector<double> reference_maxpool(std::span<const double> input, std::size_t c,
                                      std::size_t h, std::size_t w, std::size_t k,
                                      std::size_t stride, std::size_t pad_top,
                                      std::size_t pad_left, std::size_t out_h,
                                      std::size_t out_w) {
  std::vector<double> out(c * out_h * out_w);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t y = 0; y < out_h; ++y)
      for (std::size_t x = 0; x < out_w; ++x) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t ky = 0; ky < k; ++ky)
          for (std::size_t kx = 0; kx < k; ++kx) {
            const long iy = static_cast<long>(y * stride + ky) - static_cast<long>(pad_top);
            const long ix = static_cast<long>(x * stride + kx) - static_cast<long>(pad_left);
            if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w))
              continue;
            best = std::max(best, input[(i * h + iy) * w + ix]);
          }
        out[(i * out_h + y) * out_w + x] = best;
      }
  return out;
}

std::vector<double> reference_gae(std::span<const double> rewards, std::span<const double> values,
                                  std::span<const double> dones,
                                  std::span<const double> bootstrap, std::size_t steps,
                                  std::size_t envs, double gamma, double lambda) {
  auto value_after = [&](std::size_t t, std::size_t e) {
    return t + 1 < steps ? values[(t + 1) * envs + e] : bootstrap[e];
  };
  std::vector<double> adv(steps * envs, 0.0);
  for (std::size_t e = 0; e < envs; ++e)
    for (std::size_t t = 0; t < steps; ++t) {
      double acc = 0.0;
      double weight = 1.0;
      for (std::size_t u = t; u < steps; ++u) {
        const std::size_t i = u * envs + e;
        const bool ended = dones[i] != 0.0;
        const double delta =
            rewards[i] + (ended ? 0.0 : gamma * value_after(u, e)) - values[i];
        acc += weight * delta;
        if (ended) break;
        weight *= gamma * lambda;
      }
      adv[t * envs + e] = acc;
    }
  return adv;
}

std::vector<double> reference_normalize(std::span<const double> x) {
  long double mean = 0;
  for (double v : x) mean += v;
  mean /= x.size();
  long double var = 0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double std = std::sqrt(static_cast<double>(var / x.size()));
  std::vector<double> out;
  for (double v : x) out.push_back(static_cast<double>((v - mean) / (std + 1e-8)));
  return out;
}

double reference_ppo_loss(std::span<const double> logits, std::size_t actions,
                          std::span<const double> values, std::span<const std::size_t> taken,
                          std::span<const double> old_log_probs,
                          std::span<const double> advantages, std::span<const double> returns,
                          double clip, double value_coef, double entropy_coef) {
  const std::size_t n = values.size();
  double surrogate = 0.0, value = 0.0, entropy = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const double* row = logits.data() + s * actions;
    double hi = row[0];
    for (std::size_t a = 1; a < actions; ++a) hi = std::max(hi, row[a]);
    double z = 0.0;
    for (std::size_t a = 0; a < actions; ++a) z += std::exp(row[a] - hi);
    const double log_z = hi + std::log(z);
    double h = 0.0;
    for (std::size_t a = 0; a < actions; ++a) {
      const double lp = row[a] - log_z;
      h -= std::exp(lp) * lp;
    }
    const double ratio = std::exp(row[taken[s]] - log_z - old_log_probs[s]);
    const double bounded = std::min(std::max(ratio, 1.0 - clip), 1.0 + clip);
    surrogate += std::min(ratio * advantages[s], bounded * advantages[s]);
    value += (values[s] - returns[s]) * (values[s] - returns[s]);
    entropy += h;
  }
  return -surrogate / n + value_coef * value / n - entropy_coef * entropy / n;
}

double exact_best_of_k_mean(std::span<const double> values, std::size_t k) {
  const std::size_t n = values.size();
  std::vector<std::size_t> pick(k);
  for (std::size_t i = 0; i < k; ++i) pick[i] = i;
  long double total = 0;
  std::size_t subsets = 0;
  while (true) {
    double best = values[pick[0]];
    for (std::size_t i = 1; i < k; ++i) best = std::max(best, values[pick[i]]);
    total += best;
    ++subsets;
    // Advance to the next combination in lexicographic order.
    std::size_t i = k;
    while (i > 0 && pick[i - 1] == n - k + i - 1) --i;
    if (i == 0) break;
    ++pick[i - 1];
    for (std::size_t j = i; j < k; ++j) pick[j] = pick[j - 1] + 1;
  }
  return static_cast<double>(total / subsets);
}

}  // namespace nasrl::selftest
