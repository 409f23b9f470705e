#include "nasrl/autodiff/categorical.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "nasrl/autodiff/ops.hpp"
#include "nasrl/errors.hpp"

namespace nasrl::ad {

namespace {

using detail::Node;

std::vector<double>* parent_grad(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? &p.grad_buffer() : nullptr;
}

std::pair<std::size_t, std::size_t> rows_cols(const Tensor& t, const char* op) {
  if (t.rank() == 1) return {1, t.dim(0)};
  if (t.rank() == 2) return {t.dim(0), t.dim(1)};
  throw DimensionError(std::string(op) + ": expected [A] or [N,A], got " + shape_str(t.shape()));
}

}  // namespace

Tensor log_softmax(const Tensor& logits) {
  const auto [rows, cols] = rows_cols(logits, "log_softmax");
  if (cols == 0) throw DimensionError("log_softmax over zero classes");
  const auto z = logits.data();
  std::vector<double> out(z.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* zr = z.data() + r * cols;
    double mx = zr[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, zr[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += std::exp(zr[j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < cols; ++j) out[r * cols + j] = zr[j] - lse;
  }
  return make_result(logits.shape(), std::move(out), {logits}, [rows, cols](Node& self) {
    auto* g = parent_grad(self, 0);
    if (!g) return;
    for (std::size_t r = 0; r < rows; ++r) {
      double gs = 0.0;
      for (std::size_t j = 0; j < cols; ++j) gs += self.grad[r * cols + j];
      for (std::size_t j = 0; j < cols; ++j) {
        const std::size_t i = r * cols + j;
        (*g)[i] += self.grad[i] - std::exp(self.data[i]) * gs;
      }
    }
  });
}

Tensor gather(const Tensor& logp, std::span<const std::size_t> index) {
  const auto [rows, cols] = rows_cols(logp, "gather");
  if (index.size() != rows)
    throw DimensionError("gather: " + std::to_string(index.size()) + " indices for " +
                         std::to_string(rows) + " rows");
  std::vector<std::size_t> flat(rows);
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    if (index[r] >= cols) throw ContractError("gather: index out of range");
    flat[r] = r * cols + index[r];
    out[r] = logp[flat[r]];
  }
  Shape shape = logp.rank() == 1 ? Shape{} : Shape{rows};
  return make_result(std::move(shape), std::move(out), {logp},
                     [flat = std::move(flat)](Node& self) {
                       if (auto* g = parent_grad(self, 0))
                         for (std::size_t r = 0; r < flat.size(); ++r)
                           (*g)[flat[r]] += self.grad[r];
                     });
}

Tensor entropy_from_log_probs(const Tensor& logp) {
  const auto [rows, cols] = rows_cols(logp, "entropy");
  const auto l = logp.data();
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < cols; ++j) {
      const double v = l[r * cols + j];
      out[r] -= std::exp(v) * v;
    }
  Shape shape = logp.rank() == 1 ? Shape{} : Shape{rows};
  return make_result(std::move(shape), std::move(out), {logp}, [rows, cols](Node& self) {
    auto* g = parent_grad(self, 0);
    if (!g) return;
    const auto& l = self.parents[0]->data;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < cols; ++j) {
        const std::size_t i = r * cols + j;
        (*g)[i] -= self.grad[r] * std::exp(l[i]) * (l[i] + 1.0);
      }
  });
}

Categorical::Categorical(const Tensor& logits) {
  const auto [rows, cols] = rows_cols(logits, "Categorical");
  if (cols == 0) throw DimensionError("Categorical over zero actions");
  for (std::size_t i = 0; i < logits.numel(); ++i)
    if (!std::isfinite(logits[i]))
      throw NumericError("Categorical: non-finite logit at flat index " + std::to_string(i));
  batch_ = rows;
  actions_ = cols;
  batched_ = logits.rank() == 2;
  log_probs_ = log_softmax(logits);
}

std::vector<double> Categorical::probs() const {
  std::vector<double> p(log_probs_.numel());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(log_probs_[i]);
  return p;
}

std::vector<std::size_t> Categorical::sample(Rng& rng) const {
  std::vector<std::size_t> out(batch_);
  for (std::size_t r = 0; r < batch_; ++r) {
    const double u = rng.uniform();
    double cdf = 0.0;
    std::size_t pick = actions_ - 1;
    for (std::size_t j = 0; j < actions_; ++j) {
      cdf += std::exp(log_probs_[r * actions_ + j]);
      if (u < cdf) {
        pick = j;
        break;
      }
    }
    out[r] = pick;
  }
  return out;
}

std::size_t Categorical::sample_one(Rng& rng) const {
  if (batch_ != 1) throw ContractError("sample_one on a batched distribution");
  return sample(rng)[0];
}

Tensor Categorical::log_prob(std::span<const std::size_t> actions) const {
  return gather(log_probs_, actions);
}

Tensor Categorical::log_prob(std::size_t action) const {
  const std::size_t a[1] = {action};
  return gather(log_probs_, a);
}

Tensor Categorical::entropy() const { return entropy_from_log_probs(log_probs_); }

}  // namespace nasrl::ad
