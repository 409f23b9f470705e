#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nasrl/autodiff/tensor.hpp"
#include "nasrl/rng.hpp"

namespace nasrl::ad {

// Categorical distribution over the last axis of [A] or [N,A] logits.
// Throws NumericError on non-finite logits.
class Categorical {
 public:
  explicit Categorical(const Tensor& logits);

  std::size_t batch() const { return batch_; }
  std::size_t num_actions() const { return actions_; }
  bool batched() const { return batched_; }

  // One draw per row by inverse-CDF on a single uniform variate.
  std::vector<std::size_t> sample(Rng& rng) const;
  std::size_t sample_one(Rng& rng) const;

  // [N] for batched logits, scalar otherwise.
  Tensor log_prob(std::span<const std::size_t> actions) const;
  Tensor log_prob(std::size_t action) const;
  Tensor entropy() const;

  const Tensor& log_probs() const { return log_probs_; }
  std::vector<double> probs() const;

 private:
  Tensor log_probs_;
  std::size_t batch_ = 0;
  std::size_t actions_ = 0;
  bool batched_ = false;
};

}  // namespace nasrl::ad
