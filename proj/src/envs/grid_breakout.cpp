#include <algorithm>

#include "nasrl/envs/grid_games.hpp"
#include "nasrl/errors.hpp"

namespace nasrl::envs {

namespace {
constexpr double kBrickValue = 0.3;
constexpr double kPaddleValue = 0.6;
constexpr double kBallValue = 1.0;
}  // namespace

GridBreakout::GridBreakout(GridBreakoutConfig config) : cfg_(config) {
  if (cfg_.width < cfg_.paddle_width + 2 || cfg_.height < cfg_.brick_rows + 6)
    throw ConfigError("grid_breakout: board too small for the configured bricks and paddle");
  if (cfg_.paddle_width == 0 || cfg_.step_limit == 0)
    throw ConfigError("grid_breakout: paddle width and step limit must be positive");
}

long GridBreakout::landing_column() const {
  long r = ball_r_, c = ball_c_, dc = dc_;
  const long w = static_cast<long>(cfg_.width);
  const long paddle_row = static_cast<long>(cfg_.height) - 1;
  while (r + 1 < paddle_row) {
    ++r;
    if (c + dc < 0 || c + dc >= w) dc = -dc;
    c += dc;
  }
  if (c + dc < 0 || c + dc >= w) dc = -dc;
  return c + dc;
}

void GridBreakout::reset_state(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0xB4EA));
  const long w = static_cast<long>(cfg_.width);
  bricks_.assign(cfg_.brick_rows * cfg_.width, 1);
  bricks_left_ = bricks_.size();
  t_ = 0;
  // Ball starts below the bricks, falling diagonally.
  ball_r_ = static_cast<long>(cfg_.brick_rows) + 2 + static_cast<long>(rng.uniform_int(3));
  ball_c_ = static_cast<long>(rng.uniform_int(cfg_.width));
  dr_ = 1;
  dc_ = rng.uniform_int(2) ? 1 : -1;
  // Paddle on the far side of where the ball will land.
  paddle_ = landing_column() < w / 2 ? w - static_cast<long>(cfg_.paddle_width) : 0;
}

double GridBreakout::advance(std::size_t action, bool& done) {
  const long w = static_cast<long>(cfg_.width);
  const long pw = static_cast<long>(cfg_.paddle_width);
  const long paddle_row = static_cast<long>(cfg_.height) - 1;
  paddle_ = std::clamp(paddle_ + static_cast<long>(action) - 1, 0L, w - pw);
  ++t_;

  double reward = 0.0;
  if (ball_c_ + dc_ < 0 || ball_c_ + dc_ >= w) dc_ = -dc_;
  long nc = ball_c_ + dc_;
  long nr = ball_r_ + dr_;
  if (nr < 0) {
    dr_ = 1;
    nr = ball_r_ + dr_;
  }

  const long brick_top = 1;
  const long brick_bottom = brick_top + static_cast<long>(cfg_.brick_rows);
  if (nr >= brick_top && nr < brick_bottom) {
    char& brick = bricks_[(nr - brick_top) * w + nc];
    if (brick) {
      brick = 0;
      --bricks_left_;
      reward = 1.0;
      dr_ = -dr_;
      nr = ball_r_;  // bounce back without entering the brick cell
    }
  }

  if (nr == paddle_row) {
    if (nc >= paddle_ && nc < paddle_ + pw) {
      dr_ = -1;
      if (pw >= 2) {
        if (nc == paddle_) dc_ = -1;
        else if (nc == paddle_ + pw - 1) dc_ = 1;
      }
      nr = ball_r_;
    } else {
      ball_r_ = nr;
      ball_c_ = nc;
      done = true;
      return reward;
    }
  }
  ball_r_ = nr;
  ball_c_ = nc;
  if (bricks_left_ == 0 || t_ >= cfg_.step_limit) done = true;
  return reward;
}

void GridBreakout::render(std::span<double> frame) const {
  std::fill(frame.begin(), frame.end(), 0.0);
  const std::size_t w = cfg_.width;
  for (std::size_t i = 0; i < bricks_.size(); ++i)
    if (bricks_[i]) frame[(1 + i / w) * w + i % w] = kBrickValue;
  for (std::size_t c = 0; c < cfg_.paddle_width; ++c)
    frame[(cfg_.height - 1) * w + static_cast<std::size_t>(paddle_) + c] = kPaddleValue;
  frame[static_cast<std::size_t>(ball_r_) * w + static_cast<std::size_t>(ball_c_)] = kBallValue;
}

}  // namespace nasrl::envs
