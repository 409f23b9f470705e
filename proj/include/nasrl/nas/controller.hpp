#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "json.hpp"
#include "nasrl/autodiff/optim.hpp"
#include "nasrl/autodiff/tensor.hpp"
#include "nasrl/rng.hpp"
#include "nasrl/supernet/search_space.hpp"

namespace nasrl::nas {

enum class ControllerKind {
  recurrent,    // embedding -> LSTM cell -> per-slot projection
  independent,  // one free logit vector per slot
};

struct ControllerConfig {
  ControllerKind kind = ControllerKind::recurrent;
  std::size_t hidden = 64;
  double learning_rate = 0.001;
  double entropy_coef = 0.0001;
  double baseline_momentum = 0.2;
  // Length of the cosine learning-rate schedule, in controller updates.
  std::size_t total_updates = 1;

  void validate() const;
};

nlohmann::json to_json(const ControllerConfig& c);
ControllerConfig controller_config_from_json(const nlohmann::json& j);

// Autoregressive distribution over the architectures of a search space,
// trained with REINFORCE against an exponential-moving-average baseline.
class Controller {
 public:
  Controller(const supernet::SearchSpace& space, ControllerConfig config, std::uint64_t seed);

  struct Sample {
    supernet::Architecture architecture;
    ad::Tensor log_prob;  // scalar, sum over slots
    ad::Tensor entropy;   // scalar, sum of per-slot entropies along the path
  };

  // Draws one option per slot, each conditioned on the earlier choices.
  Sample sample(Rng& rng) const;
  // Log-probability and path entropy of a given architecture (differentiable).
  Sample evaluate(const supernet::Architecture& arch) const;
  double probability(const supernet::Architecture& arch) const;

  // -mean((R - b) * log p(arch)) - entropy_coef * mean(entropy), with `b` the
  // given baseline.
  ad::Tensor reinforce_loss(const std::vector<supernet::Architecture>& archs,
                            const std::vector<double>& rewards, double baseline) const;

  // One REINFORCE step on a batch of (architecture, reward) pairs, then the
  // baseline update b <- (1 - m) b + m mean(R). The baseline starts at the
  // mean of the first batch.
  void update(const std::vector<supernet::Architecture>& archs, const std::vector<double>& rewards);

  std::optional<double> baseline() const { return baseline_; }
  std::size_t updates() const { return optimizer_.step_count(); }
  std::vector<ad::Tensor> parameters() const;
  const supernet::SearchSpace& space() const { return space_; }
  const ControllerConfig& config() const { return config_; }

  // Pushes slot `slot`'s logits towards option `option` (used to build
  // saturated controllers in tests).
  void bias_slot(std::size_t slot, std::size_t option, double amount);

 private:
  struct State {
    ad::Tensor h, c;
  };
  // Logits of `slot` given the recurrent state; advances the state.
  ad::Tensor slot_logits(std::size_t slot, std::optional<std::size_t> previous, State& state) const;
  Sample walk(const supernet::Architecture* fixed, Rng* rng) const;

  supernet::SearchSpace space_;
  ControllerConfig config_;
  // recurrent kind
  ad::Tensor start_;                     // [H]
  std::vector<ad::Tensor> embeddings_;   // slot s > 0: [options of slot s-1, H]
  ad::Tensor w_input_, w_hidden_, b_gates_;  // [4H, H], [4H, H], [4H]
  std::vector<ad::Tensor> proj_w_, proj_b_;  // [options, H], [options]
  // independent kind
  std::vector<ad::Tensor> free_logits_;  // [options]

  ad::Adam optimizer_;
  std::optional<double> baseline_;
};

// Probability the controller assigns to every architecture of an enumerable
// space, in enumeration order.
std::vector<double> architecture_probabilities(const Controller& ctrl);

}  // namespace nasrl::nas
