#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "nasrl/envs/env.hpp"
#include "nasrl/nas/search.hpp"
#include "nasrl/ppo/ppo.hpp"
#include "nasrl/supernet/search_space.hpp"

namespace nasrl::harness {

struct ExperimentConfig {
  std::string env = "grid_freeway";   // environment preset
  std::string space = "desk_space1";  // search-space preset or JSON file
  std::string method = "random";      // enas | spos | random
  ppo::PpoConfig ppo;                 // from-scratch and child training
  nas::NasConfig nas;
  std::uint64_t seed = 0;
  std::size_t seeds = 4;  // independent search repetitions
  std::size_t k = 3;
  std::size_t random_trials = 1000;  // best-of-K repetitions for the random baseline
  std::size_t eval_episodes = 100;   // frozen-policy episodes behind total_reward
  // Output locations; not part of the digest.
  std::string out_dir = "out";
  std::string table;  // empty: <out_dir>/bench.jsonl
  std::size_t parallel = 1;

  // Throws ConfigError for unknown presets, methods or out-of-range values.
  void validate() const;
  std::string table_path() const;
};

nlohmann::json to_json(const ExperimentConfig& c);
// Missing keys keep defaults; unknown keys are a ConfigError.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
// Throws ConfigError naming `path` when it cannot be read or parsed.
ExperimentConfig load_experiment_config(const std::string& path);

const std::vector<std::string>& method_names();

// 64-bit FNV-1a of a byte string, as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

// Hash of every setting that affects results (output paths and worker count
// excluded). Object keys are serialized in sorted order, so the digest does not
// depend on how a config file orders its fields.
std::string config_digest(const ExperimentConfig& c);

// Hash of the settings that determine from-scratch training: the resolved
// search space, environment, PPO config and evaluation episode count.
std::string table_digest(const ExperimentConfig& c);

supernet::SearchSpace resolve_space(const ExperimentConfig& c);
std::unique_ptr<envs::Env> make_env(const ExperimentConfig& c);

// Seed of the i-th search repetition.
std::uint64_t search_seed(const ExperimentConfig& c, std::size_t i);

}  // namespace nasrl::harness
