#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "nasrl/envs/env.hpp"

namespace nasrl::envs {

// Returns of the most recent completed episodes (at most `capacity`).
class EpisodeStats {
 public:
  explicit EpisodeStats(std::size_t capacity = 100) : capacity_(capacity) {}

  void push(double episode_return);
  void add_steps(std::size_t n) { total_steps_ += n; }

  // Mean of the buffered returns; nullopt before the first completed episode.
  std::optional<double> mean() const;
  std::size_t buffered() const { return window_.size(); }
  std::size_t episodes() const { return episodes_; }
  std::size_t total_steps() const { return total_steps_; }
  const std::deque<double>& window() const { return window_; }

 private:
  std::size_t capacity_;
  std::deque<double> window_;
  std::size_t episodes_ = 0;
  std::size_t total_steps_ = 0;
};

struct EpisodeRecord {
  std::size_t env_id = 0;
  std::size_t episode_index = 0;
  double episode_return = 0.0;
  std::size_t length = 0;
  std::uint64_t seed = 0;
};

// One JSON object per line: {"env_id", "episode_index", "return", "length", "seed"}.
void write_episode_record(std::ostream& out, const EpisodeRecord& rec);
std::vector<EpisodeRecord> read_episode_log(std::istream& in);

// A fixed set of environments stepped in lockstep. Finished episodes are
// reset immediately with a seed derived from the environment's base seed
// and its episode index; results are always returned in environment order.
class VecEnv {
 public:
  VecEnv(const Env& prototype, std::size_t count);

  std::size_t size() const { return envs_.size(); }
  std::size_t num_actions() const { return envs_.front()->num_actions(); }
  const Env& env(std::size_t i) const { return *envs_.at(i); }

  std::vector<Observation> reset(std::span<const std::uint64_t> seeds);
  // Seeds derived from one base seed: derive_seed(base, i).
  std::vector<Observation> reset(std::uint64_t base_seed);
  std::vector<StepResult> step(std::span<const std::size_t> actions);

  const std::vector<Observation>& observations() const { return obs_; }
  EpisodeStats& stats() { return stats_; }
  const EpisodeStats& stats() const { return stats_; }
  std::size_t episodes_finished(std::size_t env_id) const { return episode_index_.at(env_id); }

  void set_episode_sink(std::function<void(const EpisodeRecord&)> sink) { sink_ = std::move(sink); }

 private:
  std::vector<std::unique_ptr<Env>> envs_;
  std::vector<std::uint64_t> base_seeds_;
  std::vector<std::size_t> episode_index_;
  std::vector<Observation> obs_;
  EpisodeStats stats_;
  std::function<void(const EpisodeRecord&)> sink_;
};

}  // namespace nasrl::envs
