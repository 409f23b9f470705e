#include <algorithm>

#include "nasrl/envs/grid_games.hpp"
#include "nasrl/errors.hpp"

namespace nasrl::envs {

namespace {
constexpr double kCarValue = 0.5;
constexpr double kAgentValue = 1.0;
}  // namespace

GridFreeway::GridFreeway(GridFreewayConfig config) : cfg_(config) {
  if (cfg_.height < cfg_.lanes + 2)
    throw ConfigError("grid_freeway: need at least one free row above and below the lanes");
  if (cfg_.episode_length == 0 || cfg_.width == 0 || cfg_.max_period == 0)
    throw ConfigError("grid_freeway: episode length, width and max period must be positive");
  if (cfg_.cars_per_lane > cfg_.width) throw ConfigError("grid_freeway: too many cars per lane");
}

double GridFreeway::max_return() const {
  return static_cast<double>(cfg_.episode_length / rows_to_cross());
}

void GridFreeway::reset_state(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0xF4EE));
  t_ = 0;
  agent_row_ = cfg_.height - 1;
  lanes_.clear();
  if (!cfg_.spawn_cars) return;
  const std::size_t top = (cfg_.height - cfg_.lanes) / 2;
  for (std::size_t l = 0; l < cfg_.lanes; ++l) {
    Lane lane;
    lane.row = top + l;
    lane.direction = l % 2 == 0 ? 1 : -1;
    lane.period = 1 + rng.uniform_int(cfg_.max_period);
    lane.phase = rng.uniform_int(lane.period);
    // Evenly spaced cars with a random rotation.
    const std::size_t offset = rng.uniform_int(cfg_.width);
    for (std::size_t c = 0; c < cfg_.cars_per_lane; ++c)
      lane.start_cols.push_back((offset + c * cfg_.width / cfg_.cars_per_lane) % cfg_.width);
    lanes_.push_back(std::move(lane));
  }
}

std::size_t GridFreeway::lane_shift(const Lane& lane) const {
  const std::size_t moves = (t_ + lane.phase) / lane.period;
  const std::size_t w = cfg_.width;
  return lane.direction > 0 ? moves % w : (w - moves % w) % w;
}

bool GridFreeway::car_at(std::size_t row, std::size_t col) const {
  for (const Lane& lane : lanes_) {
    if (lane.row != row) continue;
    const std::size_t shift = lane_shift(lane);
    for (std::size_t c0 : lane.start_cols)
      if ((c0 + shift) % cfg_.width == col) return true;
  }
  return false;
}

double GridFreeway::advance(std::size_t action, bool& done) {
  if (action == 0 && agent_row_ > 0) --agent_row_;
  if (action == 2 && agent_row_ + 1 < cfg_.height) ++agent_row_;
  ++t_;
  double reward = 0.0;
  if (agent_row_ == 0) {
    reward = 1.0;
    agent_row_ = cfg_.height - 1;
  } else if (car_at(agent_row_, agent_col())) {
    agent_row_ = std::min(cfg_.height - 1, agent_row_ + cfg_.collision_pushback);
  }
  done = t_ >= cfg_.episode_length;
  return reward;
}

void GridFreeway::render(std::span<double> frame) const {
  std::fill(frame.begin(), frame.end(), 0.0);
  const std::size_t w = cfg_.width;
  for (const Lane& lane : lanes_) {
    const std::size_t shift = lane_shift(lane);
    for (std::size_t c0 : lane.start_cols) frame[lane.row * w + (c0 + shift) % w] = kCarValue;
  }
  frame[agent_row_ * w + agent_col()] = kAgentValue;
}

}  // namespace nasrl::envs
