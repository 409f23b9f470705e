#include "nasrl/autodiff/optim.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "nasrl/errors.hpp"

namespace nasrl::ad {

double CosineSchedule::rate(std::size_t t) const {
  if (total_steps == 0) throw ContractError("cosine schedule needs at least one step");
  if (t > total_steps)
    throw ContractError("cosine schedule queried at step " + std::to_string(t) + " beyond T=" +
                        std::to_string(total_steps));
  const double frac = static_cast<double>(t) / static_cast<double>(total_steps);
  return std::max(0.0, initial_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * frac)));
}

void adam_update(std::span<double> param, std::span<const double> grad, AdamMoments& moments,
                 double rate, double beta1, double beta2, double epsilon) {
  if (param.size() != grad.size())
    throw DimensionError("adam: parameter has " + std::to_string(param.size()) +
                         " entries but gradient has " + std::to_string(grad.size()));
  if (moments.first.empty()) {
    moments.first.assign(param.size(), 0.0);
    moments.second.assign(param.size(), 0.0);
  }
  if (moments.first.size() != param.size())
    throw DimensionError("adam: moment buffers do not match parameter size");
  ++moments.updates;
  const double t = static_cast<double>(moments.updates);
  const double c1 = 1.0 - std::pow(beta1, t);
  const double c2 = 1.0 - std::pow(beta2, t);
  for (std::size_t i = 0; i < param.size(); ++i) {
    double& m = moments.first[i];
    double& v = moments.second[i];
    m = beta1 * m + (1.0 - beta1) * grad[i];
    v = beta2 * v + (1.0 - beta2) * grad[i] * grad[i];
    param[i] -= rate * (m / c1) / (std::sqrt(v / c2) + epsilon);
  }
}

Adam::Adam(CosineSchedule schedule, double beta1, double beta2, double epsilon)
    : schedule_(schedule), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  if (schedule_.initial_rate < 0.0) throw ContractError("adam: negative learning rate");
}

void Adam::step(std::span<Tensor> params) {
  if (steps_ >= schedule_.total_steps)
    throw ContractError("adam: step budget of " + std::to_string(schedule_.total_steps) +
                        " exhausted");
  const double rate = schedule_.rate(steps_);
  for (Tensor& p : params) {
    if (!p.has_grad()) continue;
    adam_update(p.mutable_data(), p.grad(), state_[p.id()], rate, beta1_, beta2_, epsilon_);
  }
  ++steps_;
}

const AdamMoments* Adam::moments(const Tensor& param) const {
  auto it = state_.find(param.id());
  return it == state_.end() ? nullptr : &it->second;
}

double clip_grad_norm(std::span<Tensor> params, double max_norm) {
  double sq = 0.0;
  for (const Tensor& p : params)
    if (p.has_grad())
      for (double g : p.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (Tensor& p : params)
      if (p.has_grad())
        for (double& g : p.mutable_grad()) g *= s;
  }
  return norm;
}

void zero_grads(std::span<Tensor> params) {
  for (Tensor& p : params) p.zero_grad();
}

}  // namespace nasrl::ad
