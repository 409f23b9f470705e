#pragma once

#include <cstddef>
#include <span>
#include <unordered_map>
#include <vector>

#include "nasrl/autodiff/tensor.hpp"

namespace nasrl::ad {

// rate(t) = initial_rate * 0.5 * (1 + cos(pi * t / total_steps)) for 0 <= t <= T.
struct CosineSchedule {
  double initial_rate = 2.5e-4;
  std::size_t total_steps = 1;

  double rate(std::size_t t) const;
};

struct AdamMoments {
  std::vector<double> first;
  std::vector<double> second;
  std::size_t updates = 0;  // bias-correction count for this parameter
};

// One bias-corrected Adam update of `param` in place.
void adam_update(std::span<double> param, std::span<const double> grad, AdamMoments& moments,
                 double rate, double beta1, double beta2, double epsilon);

// Adam with a cosine-annealed learning rate. Only parameters passed to
// step() that carry a gradient are touched, so parameters outside the
// current computation keep both their values and their moments.
class Adam {
 public:
  explicit Adam(CosineSchedule schedule, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8);

  void step(std::span<Tensor> params);

  // Rate that the next step() will apply.
  double current_rate() const { return schedule_.rate(steps_); }
  std::size_t step_count() const { return steps_; }
  const CosineSchedule& schedule() const { return schedule_; }
  const AdamMoments* moments(const Tensor& param) const;

 private:
  CosineSchedule schedule_;
  double beta1_, beta2_, epsilon_;
  std::size_t steps_ = 0;
  std::unordered_map<const void*, AdamMoments> state_;
};

// Scales gradients so their joint L2 norm is at most max_norm. Returns the
// norm before scaling.
double clip_grad_norm(std::span<Tensor> params, double max_norm);

void zero_grads(std::span<Tensor> params);

}  // namespace nasrl::ad
