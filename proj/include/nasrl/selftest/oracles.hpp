#pragma once

// Independent reference computations used by the test suites and by
// `nasrl selftest`. Everything here is written as plain scalar loops and
// never calls into the SIMD kernels or the autodiff tape being checked.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "nasrl/autodiff/tensor.hpp"

namespace nasrl::selftest {

struct GradCheckResult {
  double max_rel_error = 0.0;  // |analytic - numeric| / max(1, |analytic|)
  std::size_t entries = 0;
};

// Central differences of `loss_fn` w.r.t. every entry of `params`, compared
// with one backward pass. `loss_fn` must rebuild its graph on every call.
GradCheckResult check_gradients(const std::function<ad::Tensor()>& loss_fn,
                                std::span<ad::Tensor> params, double h = 1e-4);

// Direct 7-loop convolution of a single [C,H,W] image with explicit zero
// padding (pad_top, pad_left; the bottom/right padding is implied by the
// output size).
std::vector<double> reference_conv2d(std::span<const double> input, std::size_t c,
                                     std::size_t h, std::size_t w,
                                     std::span<const double> weight, std::size_t co,
                                     std::size_t k, std::size_t stride, std::size_t pad_top,
                                     std::size_t pad_left, std::size_t out_h, std::size_t out_w);

// Window scan for max-pooling with the same padding convention.
std::vector<double> reference_maxpool(std::span<const double> input, std::size_t c,
                                      std::size_t h, std::size_t w, std::size_t k,
                                      std::size_t stride, std::size_t pad_top,
                                      std::size_t pad_left, std::size_t out_h,
                                      std::size_t out_w);

// Generalized advantage estimates written as the explicit forward sum
// A_t = sum_l (gamma*lambda)^l * delta_{t+l}, truncated at the first episode
// end. Inputs are time-major [steps * envs]; returns raw (unnormalized)
// advantages.
std::vector<double> reference_gae(std::span<const double> rewards, std::span<const double> values,
                                  std::span<const double> dones,
                                  std::span<const double> bootstrap, std::size_t steps,
                                  std::size_t envs, double gamma, double lambda);

// Zero-mean, unit-variance (population) normalization.
std::vector<double> reference_normalize(std::span<const double> x);

// Clipped PPO objective for `logits` [n * actions] computed sample by sample.
double reference_ppo_loss(std::span<const double> logits, std::size_t actions,
                          std::span<const double> values, std::span<const std::size_t> taken,
                          std::span<const double> old_log_probs,
                          std::span<const double> advantages, std::span<const double> returns,
                          double clip, double value_coef, double entropy_coef);

// Expected maximum of a uniformly chosen K-subset of `values`, by visiting
// every subset.
double exact_best_of_k_mean(std::span<const double> values, std::size_t k);

}  // namespace nasrl::selftest
