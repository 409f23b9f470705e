#include "nasrl/envs/env.hpp"

#include <algorithm>
#include <string>

#include "nasrl/errors.hpp"

namespace nasrl::envs {

Observation Env::reset(std::uint64_t seed) {
  seed_ = seed;
  reset_state(seed);
  obs_.height = height();
  obs_.width = width();
  obs_.pixels.assign(kFrameStack * height() * width(), 0.0);
  // Fill every slot with the initial frame.
  const std::size_t plane = height() * width();
  render(std::span<double>(obs_.pixels).first(plane));
  for (std::size_t c = 1; c < kFrameStack; ++c)
    std::copy_n(obs_.pixels.begin(), plane, obs_.pixels.begin() + c * plane);
  episode_return_ = 0.0;
  episode_length_ = 0;
  done_ = false;
  started_ = true;
  return obs_;
}

StepResult Env::step(std::size_t action) {
  if (!started_) throw ContractError(name() + ": step() before reset()");
  if (done_) throw ContractError(name() + ": step() after the episode ended");
  if (action >= num_actions())
    throw ContractError(name() + ": action " + std::to_string(action) + " out of range [0, " +
                        std::to_string(num_actions()) + ")");
  bool done = false;
  const double reward = advance(action, done);
  push_frame();
  episode_return_ += reward;
  ++episode_length_;
  done_ = done;

  StepResult r;
  r.observation = obs_;
  r.reward = reward;
  r.done = done;
  r.episode_length = episode_length_;
  if (done) r.episode_return = episode_return_;
  return r;
}

void Env::push_frame() {
  const std::size_t plane = height() * width();
  // Shift older frames back one slot, newest goes to channel 0.
  std::copy_backward(obs_.pixels.begin(), obs_.pixels.begin() + (kFrameStack - 1) * plane,
                     obs_.pixels.end());
  auto frame = std::span<double>(obs_.pixels).first(plane);
  render(frame);
  for (double& v : frame) v = std::clamp(v, 0.0, 1.0);
}

}  // namespace nasrl::envs
