#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "nasrl/envs/env.hpp"
#include "nasrl/rng.hpp"

namespace nasrl::envs {

struct GridBreakoutConfig {
  std::size_t height = 12;
  std::size_t width = 12;
  std::size_t brick_rows = 1;  // bricks start at row 1; row 0 is open space
  std::size_t paddle_width = 3;
  std::size_t step_limit = 600;
};

// Ball-and-paddle game. Actions: 0 left, 1 stay, 2 right. +1 per brick; the
// episode ends when the ball passes the paddle, the board is cleared, or the
// step limit is reached. The ball always starts falling toward the side
// opposite the paddle.
class GridBreakout final : public Env {
 public:
  explicit GridBreakout(GridBreakoutConfig config = {});

  std::string name() const override { return "grid_breakout"; }
  std::size_t num_actions() const override { return 3; }
  std::size_t height() const override { return cfg_.height; }
  std::size_t width() const override { return cfg_.width; }
  double max_return() const override { return static_cast<double>(brick_count()); }
  std::unique_ptr<Env> clone() const override { return std::make_unique<GridBreakout>(*this); }

  const GridBreakoutConfig& config() const { return cfg_; }
  std::size_t brick_count() const { return cfg_.brick_rows * cfg_.width; }
  std::size_t bricks_left() const { return bricks_left_; }
  long ball_row() const { return ball_r_; }
  long ball_col() const { return ball_c_; }
  long paddle_left() const { return paddle_; }
  // Column where the ball would first reach the paddle row if nothing intervenes.
  long landing_column() const;

 protected:
  void reset_state(std::uint64_t seed) override;
  double advance(std::size_t action, bool& done) override;
  void render(std::span<double> frame) const override;

 private:
  GridBreakoutConfig cfg_;
  std::vector<char> bricks_;
  std::size_t bricks_left_ = 0;
  long ball_r_ = 0, ball_c_ = 0, dr_ = 1, dc_ = 1;
  long paddle_ = 0;
  std::size_t t_ = 0;
};

struct GridFreewayConfig {
  std::size_t height = 12;
  std::size_t width = 12;
  std::size_t lanes = 8;            // centred vertically between start and goal rows
  std::size_t episode_length = 512;
  std::size_t cars_per_lane = 2;
  bool spawn_cars = true;
  std::size_t collision_pushback = 1;  // rows the agent is knocked back when hit
  std::size_t max_period = 3;          // lane speeds: one cell every 1..max_period steps
};

// Road-crossing game. Actions: 0 up, 1 stay, 2 down. The agent walks up a
// fixed column from the bottom row; reaching row 0 scores +1 and restarts it
// at the bottom. Episodes have a fixed length.
class GridFreeway final : public Env {
 public:
  explicit GridFreeway(GridFreewayConfig config = {});

  std::string name() const override { return "grid_freeway"; }
  std::size_t num_actions() const override { return 3; }
  std::size_t height() const override { return cfg_.height; }
  std::size_t width() const override { return cfg_.width; }
  double max_return() const override;
  std::unique_ptr<Env> clone() const override { return std::make_unique<GridFreeway>(*this); }

  const GridFreewayConfig& config() const { return cfg_; }
  std::size_t rows_to_cross() const { return cfg_.height - 1; }
  std::size_t agent_row() const { return agent_row_; }
  std::size_t agent_col() const { return cfg_.width / 2; }
  bool car_at(std::size_t row, std::size_t col) const;

 protected:
  void reset_state(std::uint64_t seed) override;
  double advance(std::size_t action, bool& done) override;
  void render(std::span<double> frame) const override;

 private:
  struct Lane {
    std::size_t row;
    long direction;
    std::size_t period;
    std::size_t phase;
    std::vector<std::size_t> start_cols;
  };
  std::size_t lane_shift(const Lane& lane) const;

  GridFreewayConfig cfg_;
  std::vector<Lane> lanes_;
  std::size_t agent_row_ = 0;
  std::size_t t_ = 0;
};

}  // namespace nasrl::envs
