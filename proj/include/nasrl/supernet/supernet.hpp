#pragma once

#include <cstdint>
#include <vector>

#include "nasrl/autodiff/tensor.hpp"
#include "nasrl/rng.hpp"
#include "nasrl/supernet/search_space.hpp"

namespace nasrl::supernet {

struct Layer {
  ad::Tensor weight;
  ad::Tensor bias;
};

enum class WeightInit { orthogonal, zeros };

// The weight store of a supernetwork: a fixed stem, one independent layer per
// (block, option) pair, a hidden linear layer and the policy and value heads.
class SharedWeights {
 public:
  SharedWeights(const SearchSpace& space, std::uint64_t seed,
                WeightInit init = WeightInit::orthogonal);

  const SearchSpace& space() const { return space_; }

  const Layer& stem() const { return stem_; }
  const Layer& option(std::size_t block, std::size_t opt) const { return options_.at(block).at(opt); }
  const Layer& hidden() const { return hidden_; }
  const Layer& policy_head() const { return policy_; }
  const Layer& value_head() const { return value_; }

  // Number of independent layers: sum of option counts plus the four fixed ones.
  std::size_t weight_set_count() const;

  std::vector<ad::Tensor> all_parameters() const;
  // Parameters read by `arch`: stem, its selected options and the heads.
  std::vector<ad::Tensor> parameters_for(const Architecture& arch) const;

  // Independent copy with its own storage.
  SharedWeights clone() const;

  // Flat copy of every parameter value, in all_parameters() order.
  std::vector<std::vector<double>> snapshot() const;

 private:
  SharedWeights() = default;

  SearchSpace space_;
  Layer stem_;
  std::vector<std::vector<Layer>> options_;
  Layer hidden_, policy_, value_;
};

struct PolicyOutput {
  ad::Tensor logits;  // [N, actions]
  ad::Tensor value;   // [N]
};

// A subnetwork view onto SharedWeights. Holds references, never copies.
class PolicyNetwork {
 public:
  PolicyNetwork(const SharedWeights& weights, Architecture arch);

  const Architecture& architecture() const { return arch_; }
  const SharedWeights& weights() const { return *weights_; }
  std::vector<ad::Tensor> parameters() const { return weights_->parameters_for(arch_); }

  // obs: [N, channels, H, W]. Throws DimensionError when the channel count
  // does not match the stem.
  PolicyOutput forward(const ad::Tensor& obs) const;

  // The flattened feature vector fed to the hidden layer, [N, pad_target].
  ad::Tensor features(const ad::Tensor& obs) const;

 private:
  const SharedWeights* weights_;
  Architecture arch_;
};

PolicyNetwork instantiate(const SharedWeights& weights, const Architecture& arch);

// Orthogonal matrix of shape rows x cols scaled by `gain`, row-major.
std::vector<double> orthogonal_matrix(std::size_t rows, std::size_t cols, double gain, Rng& rng);

}  // namespace nasrl::supernet
