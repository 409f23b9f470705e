#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nasrl::envs {

inline constexpr std::size_t kFrameStack = 4;

// Four stacked grayscale frames, channel 0 newest. Values lie in [0, 1].
struct Observation {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;  // [4, height, width]

  std::size_t size() const { return pixels.size(); }
  std::span<const double> frame(std::size_t channel) const {
    return std::span<const double>(pixels).subspan(channel * height * width, height * width);
  }
  bool operator==(const Observation&) const = default;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  std::optional<double> episode_return;  // set iff done
  std::size_t episode_length = 0;        // steps in the episode so far
};

// Deterministic pixel-grid environment. Subclasses provide the dynamics and
// a single-frame renderer; the base class owns frame stacking, episode
// bookkeeping and the step contract.
class Env {
 public:
  virtual ~Env() = default;

  virtual std::string name() const = 0;
  virtual std::size_t num_actions() const = 0;
  virtual std::size_t height() const = 0;
  virtual std::size_t width() const = 0;
  // Upper bound on the episodic return.
  virtual double max_return() const = 0;
  virtual std::unique_ptr<Env> clone() const = 0;

  Observation reset(std::uint64_t seed);
  // Throws ContractError for an out-of-range action or a step after done.
  StepResult step(std::size_t action);

  bool done() const { return done_; }
  std::uint64_t seed() const { return seed_; }
  const Observation& observation() const { return obs_; }

 protected:
  virtual void reset_state(std::uint64_t seed) = 0;
  // Applies one action; returns the reward and sets `done` on termination.
  virtual double advance(std::size_t action, bool& done) = 0;
  virtual void render(std::span<double> frame) const = 0;

 private:
  void push_frame();

  Observation obs_;
  std::uint64_t seed_ = 0;
  double episode_return_ = 0.0;
  std::size_t episode_length_ = 0;
  bool done_ = true;
  bool started_ = false;
};

}  // namespace nasrl::envs
