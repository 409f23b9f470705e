#include "nasrl/supernet/supernet.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "nasrl/autodiff/ops.hpp"
#include "nasrl/errors.hpp"

namespace nasrl::supernet {

using ad::Tensor;

std::vector<double> orthogonal_matrix(std::size_t rows, std::size_t cols, double gain, Rng& rng) {
  const std::size_t tall = std::max(rows, cols), wide = std::min(rows, cols);
  Eigen::MatrixXd g(tall, wide);
  for (std::size_t i = 0; i < tall; ++i)
    for (std::size_t j = 0; j < wide; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(tall, wide);
  // Sign-fix with diag(R).
  const Eigen::MatrixXd& r = qr.matrixQR();
  for (std::size_t j = 0; j < wide; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);

  std::vector<double> out(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      out[i * cols + j] = gain * (rows >= cols ? q(i, j) : q(j, i));
  return out;
}

namespace {

Layer make_layer(ad::Shape weight_shape, double gain, WeightInit init, Rng& rng) {
  const std::size_t rows = weight_shape[0];
  const std::size_t cols = ad::shape_numel(weight_shape) / rows;
  Layer l;
  if (init == WeightInit::orthogonal)
    l.weight = Tensor::from(weight_shape, orthogonal_matrix(rows, cols, gain, rng), true);
  else
    l.weight = Tensor::zeros(weight_shape, true);
  l.bias = Tensor::zeros({rows}, true);
  return l;
}

Layer clone_layer(const Layer& l) { return {l.weight.clone(), l.bias.clone()}; }

}  // namespace

SharedWeights::SharedWeights(const SearchSpace& space, std::uint64_t seed, WeightInit init)
    : space_(space) {
  space_.validate();
  const double trunk = std::sqrt(2.0);
  auto rng_for = [&](std::uint64_t s) { return Rng(derive_seed(seed, s)); };

  Rng r0 = rng_for(0);
  stem_ = make_layer({space_.stem.out_channels, space_.input_channels, space_.stem.kernel,
                      space_.stem.kernel},
                     trunk, init, r0);
  std::size_t in_ch = space_.stem.out_channels;
  for (std::size_t b = 0; b < space_.blocks.size(); ++b) {
    const ChoiceSpec& c = space_.blocks[b];
    std::vector<Layer> opts;
    for (std::size_t k : c.kernel_options) {
      Rng r = rng_for(1000 + 100 * b + opts.size());
      opts.push_back(make_layer({c.out_channels, in_ch, k, k}, trunk, init, r));
    }
    options_.push_back(std::move(opts));
    in_ch = c.out_channels;
  }
  Rng rh = rng_for(1), rp = rng_for(2), rv = rng_for(3);
  hidden_ = make_layer({space_.hidden, space_.pad_target}, trunk, init, rh);
  policy_ = make_layer({space_.actions, space_.hidden}, 0.01, init, rp);
  value_ = make_layer({1, space_.hidden}, 1.0, init, rv);
}

std::size_t SharedWeights::weight_set_count() const {
  std::size_t n = 4;
  for (const auto& o : options_) n += o.size();
  return n;
}

std::vector<Tensor> SharedWeights::all_parameters() const {
  std::vector<Tensor> p{stem_.weight, stem_.bias};
  for (const auto& opts : options_)
    for (const auto& l : opts) {
      p.push_back(l.weight);
      p.push_back(l.bias);
    }
  for (const Layer* l : {&hidden_, &policy_, &value_}) {
    p.push_back(l->weight);
    p.push_back(l->bias);
  }
  return p;
}

std::vector<Tensor> SharedWeights::parameters_for(const Architecture& arch) const {
  validate_architecture(space_, arch);
  std::vector<Tensor> p{stem_.weight, stem_.bias};
  for (std::size_t b = 0; b < arch.choices.size(); ++b) {
    const Layer& l = options_[b][arch.choices[b]];
    p.push_back(l.weight);
    p.push_back(l.bias);
  }
  for (const Layer* l : {&hidden_, &policy_, &value_}) {
    p.push_back(l->weight);
    p.push_back(l->bias);
  }
  return p;
}

SharedWeights SharedWeights::clone() const {
  SharedWeights w;
  w.space_ = space_;
  w.stem_ = clone_layer(stem_);
  for (const auto& opts : options_) {
    std::vector<Layer> c;
    for (const auto& l : opts) c.push_back(clone_layer(l));
    w.options_.push_back(std::move(c));
  }
  w.hidden_ = clone_layer(hidden_);
  w.policy_ = clone_layer(policy_);
  w.value_ = clone_layer(value_);
  return w;
}

std::vector<std::vector<double>> SharedWeights::snapshot() const {
  std::vector<std::vector<double>> out;
  for (const Tensor& t : all_parameters()) out.emplace_back(t.data().begin(), t.data().end());
  return out;
}

PolicyNetwork::PolicyNetwork(const SharedWeights& weights, Architecture arch)
    : weights_(&weights), arch_(std::move(arch)) {
  validate_architecture(weights.space(), arch_);
}

PolicyNetwork instantiate(const SharedWeights& weights, const Architecture& arch) {
  return PolicyNetwork(weights, arch);
}

Tensor PolicyNetwork::features(const Tensor& obs) const {
  const SearchSpace& s = weights_->space();
  if (obs.rank() != 4 || obs.dim(1) != s.input_channels)
    throw DimensionError("policy input must be [N, " + std::to_string(s.input_channels) +
                         ", H, W], got " + ad::shape_str(obs.shape()));
  using ad::PadMode;
  const Layer& stem = weights_->stem();
  Tensor x = ad::relu(ad::conv2d(obs, stem.weight, stem.bias, s.stem.stride, PadMode::same_size));
  for (std::size_t b = 0; b < s.blocks.size(); ++b) {
    const ChoiceSpec& c = s.blocks[b];
    const std::size_t opt = arch_.choices[b];
    if (c.is_zeroed(opt)) {
      const std::size_t h = ad::conv_out_size(x.dim(2), 1, c.stride, PadMode::same_size);
      const std::size_t w = ad::conv_out_size(x.dim(3), 1, c.stride, PadMode::same_size);
      x = Tensor::zeros({x.dim(0), c.out_channels, h, w});
    } else {
      const Layer& l = weights_->option(b, opt);
      x = ad::relu(ad::conv2d(x, l.weight, l.bias, c.stride, PadMode::same_size));
    }
    if (c.pool_kernel > 0) x = ad::maxpool2d(x, c.pool_kernel, c.pool_stride);
  }
  return ad::pad_to_exact(x, s.pad_target);
}

PolicyOutput PolicyNetwork::forward(const Tensor& obs) const {
  const Tensor f = features(obs);
  const Layer& h = weights_->hidden();
  const Tensor hidden = ad::relu(ad::linear(f, h.weight, h.bias));
  PolicyOutput out;
  out.logits = ad::linear(hidden, weights_->policy_head().weight, weights_->policy_head().bias);
  const Tensor v = ad::linear(hidden, weights_->value_head().weight, weights_->value_head().bias);
  out.value = ad::reshape(v, {obs.dim(0)});
  return out;
}

}  // namespace nasrl::supernet
