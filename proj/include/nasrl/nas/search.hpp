#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "nasrl/envs/env.hpp"
#include "nasrl/nas/controller.hpp"
#include "nasrl/ppo/ppo.hpp"
#include "nasrl/supernet/supernet.hpp"

namespace nasrl::nas {

struct ProxyScore {
  supernet::Architecture architecture;
  double score = 0.0;
  std::string method;
};

nlohmann::json to_json(const ProxyScore& p);

// Sorts by descending score; ties go to the lower enumeration index.
void rank_scores(const supernet::SearchSpace& space, std::vector<ProxyScore>& scores);

struct NasConfig {
  ControllerConfig controller;
  std::size_t children_per_step = 3;
  std::size_t update_every = 10;  // NAS steps between controller updates
  std::size_t child_epochs = 10;
  // Environment-step budget for a whole search (aggregate over environments).
  std::size_t total_timesteps = 10'000'000;
  std::size_t eval_episodes = 16;  // SPOS selection episodes per architecture
  std::uint64_t eval_seed = 2024;

  void validate() const;
};

nlohmann::json to_json(const NasConfig& c);
NasConfig nas_config_from_json(const nlohmann::json& j);

// Reward of one child architecture for the controller.
using ChildEvaluator = std::function<double(const supernet::Architecture&)>;

struct EnasTrace {
  std::size_t nas_steps = 0;
  std::size_t controller_updates = 0;
  std::vector<supernet::Architecture> children;
  std::vector<double> rewards;
  std::vector<double> baselines;  // after each update
};

struct EnasResult {
  std::vector<ProxyScore> ranking;  // every architecture, by probability
  EnasTrace trace;
};

// Controller loop: `children_per_step` samples per NAS step, a REINFORCE
// update every `update_every` steps (and once more for a trailing partial
// batch). Throws ConfigError when `nas_steps` is zero.
EnasResult enas_search(Controller& ctrl, const ChildEvaluator& evaluate, std::size_t nas_steps,
                       const NasConfig& config, std::uint64_t seed);

// Number of NAS steps a timestep budget pays for when every child consumes
// one PPO rollout.
std::size_t enas_steps_for_budget(const NasConfig& nas, const ppo::PpoConfig& ppo);

// Full ENAS with PPO children trained on shared supernetwork weights. Each
// child's reward is the mean return over the episode segments of its rollout
// after the environments are reset.
EnasResult enas_search(const supernet::SearchSpace& space, const envs::Env& env,
                       const ppo::PpoConfig& ppo, const NasConfig& nas, std::uint64_t seed);

// Draws a uniform architecture by sampling each block independently, or
// uniformly from `allowed` when it is non-empty.
supernet::Architecture uniform_architecture(const supernet::SearchSpace& space, Rng& rng,
                                            std::span<const supernet::Architecture> allowed = {});

// The architecture draw sequence used by spos_fit for `seed`.
ppo::ArchitectureSampler spos_sampler(const supernet::SearchSpace& space, std::uint64_t seed,
                                      std::span<const supernet::Architecture> allowed = {});

// PPO on the supernetwork with a fresh uniform architecture per rollout.
ppo::TrainResult spos_fit(supernet::SharedWeights& weights, const envs::Env& env,
                          const ppo::PpoConfig& ppo, std::uint64_t seed,
                          std::span<const supernet::Architecture> allowed = {});

// Mean stochastic-policy return over `episodes` fixed-seed episodes for every
// architecture, best first.
std::vector<ProxyScore> spos_select(const supernet::SharedWeights& weights, const envs::Env& env,
                                    std::size_t episodes, std::uint64_t eval_seed);

// K distinct architectures, uniformly without replacement.
std::vector<supernet::Architecture> random_select(const supernet::SearchSpace& space,
                                                  std::size_t k, Rng& rng);

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

Summary summarize(std::span<const double> values);

// Repeats: draw K of `values` without replacement, keep the maximum.
Summary best_of_k(std::span<const double> values, std::size_t k, std::size_t trials, Rng& rng);

// True performance of one architecture as reported in the benchmark table.
struct TruePerformance {
  double reward_mean = 0.0;
  double total_reward = 0.0;
  bool from_table = false;
};

struct Candidate {
  supernet::Architecture architecture;
  double proxy = 0.0;
  TruePerformance truth;
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::vector<ProxyScore> ranking;
  std::vector<Candidate> top_k;
  // Best candidate by reward_mean (ties: lower enumeration index) and the best
  // total_reward among the same candidates.
  supernet::Architecture winner;
  double reward_mean = 0.0;
  double total_reward = 0.0;
};

struct TopKReport {
  std::string method;
  std::size_t k = 0;
  std::vector<SeedOutcome> seeds;
  Summary reward_mean;
  Summary total_reward;
};

nlohmann::json to_json(const TopKReport& r);

using ProxyRanker = std::function<std::vector<ProxyScore>(std::uint64_t seed)>;
using TruthOracle = std::function<TruePerformance(const supernet::Architecture&)>;

// Per seed: rank with the method, take the top K, look up or train their true
// performance, keep the best. Aggregates over seeds.
TopKReport topk_protocol(const std::string& method, const supernet::SearchSpace& space,
                         const ProxyRanker& rank, const TruthOracle& truth, std::size_t k,
                         std::span<const std::uint64_t> seeds);

}  // namespace nasrl::nas
