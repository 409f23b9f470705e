#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "nasrl/autodiff/optim.hpp"
#include "nasrl/envs/vec_env.hpp"
#include "nasrl/supernet/supernet.hpp"

namespace nasrl::ppo {

struct PpoConfig {
  double clip = 0.1;
  double value_loss_coef = 0.25;
  double entropy_coef = 0.01;
  double gae_lambda = 0.95;
  double gamma = 0.99;
  std::size_t runner_steps = 128;
  std::size_t parallel_envs = 8;
  // Environment steps summed over all parallel environments.
  std::size_t total_timesteps = 10'000'000;
  std::size_t epochs = 4;
  std::size_t minibatches = 4;
  double learning_rate = 2.5e-4;
  double max_grad_norm = 0.5;  // <= 0 disables clipping
  bool normalize_advantages = true;

  void validate() const;
  std::size_t transitions_per_rollout() const { return runner_steps * parallel_envs; }
  // Number of rollouts needed to consume total_timesteps (rounded up).
  std::size_t rollouts() const;
};

nlohmann::json to_json(const PpoConfig& c);
// Missing keys keep their defaults; unknown keys are a ConfigError.
PpoConfig ppo_config_from_json(const nlohmann::json& j);

// Time-major storage: entry (t, e) lives at index t * envs + e.
struct RolloutBatch {
  std::size_t steps = 0;
  std::size_t envs = 0;
  std::size_t obs_size = 0;
  std::vector<std::size_t> obs_shape;  // [channels, H, W]
  std::vector<double> observations;    // [steps * envs * obs_size]
  std::vector<std::size_t> actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<double> dones;  // 1.0 when the step ended an episode
  std::vector<double> bootstrap_values;  // [envs]
  // Returns of episodes that finished during this rollout, in completion order.
  std::vector<double> finished_returns;

  std::size_t size() const { return steps * envs; }
};

// Stacks observations into one [N, channels, H, W] tensor.
ad::Tensor stack_observations(std::span<const envs::Observation> obs);

// Runs `steps` lockstep steps from the environments' current observations,
// sampling actions from the categorical policy of `net`.
RolloutBatch collect_rollout(const supernet::PolicyNetwork& net, envs::VecEnv& venv,
                             std::size_t steps, Rng& rng);

struct Advantages {
  std::vector<double> advantages;  // normalized when requested
  std::vector<double> returns;     // raw advantages + values
};

Advantages compute_gae(const RolloutBatch& batch, double gamma, double lambda,
                       bool normalize = true);

// A set of transitions drawn from a rollout for one optimizer step.
struct Minibatch {
  ad::Tensor observations;  // [M, channels, H, W]
  std::vector<std::size_t> actions;
  std::vector<double> old_log_probs;
  std::vector<double> advantages;
  std::vector<double> returns;
};

Minibatch make_minibatch(const RolloutBatch& batch, const Advantages& adv,
                         std::span<const std::size_t> indices);

struct LossTerms {
  ad::Tensor total;  // scalar to minimize
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

// Clipped surrogate plus value and entropy terms. Throws NumericError when a
// probability ratio is not finite.
LossTerms ppo_loss(const ad::Tensor& logits, const ad::Tensor& values, const Minibatch& mb,
                   const PpoConfig& config);
LossTerms ppo_loss(const supernet::PolicyNetwork& net, const Minibatch& mb,
                   const PpoConfig& config);

struct CurvePoint {
  std::size_t rollout = 0;
  std::size_t timesteps = 0;
  std::optional<double> reward_mean;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double learning_rate = 0.0;
  std::string architecture;
};

nlohmann::json to_json(const CurvePoint& p);
void write_curve_point(std::ostream& out, const CurvePoint& p);

// Result of one collect / advantage / optimize cycle.
struct CycleResult {
  supernet::Architecture architecture;
  std::vector<double> finished_returns;
  // Mean return over the episode segments of this rollout: finished episodes
  // plus each environment's unfinished tail, counted as truncated.
  double segment_return_mean = 0.0;
  LossTerms last_loss;
};

// Owns the environments, optimizer and random state for PPO on a shared
// weight store. Every cycle may use a different architecture.
class Trainer {
 public:
  // `optimizer_steps` sizes the cosine schedule; 0 derives it from the config.
  Trainer(supernet::SharedWeights& weights, const envs::Env& env_prototype, PpoConfig config,
          std::uint64_t seed, std::size_t optimizer_steps = 0);

  // Collects one rollout through `arch` and runs `epochs` (0: config value)
  // passes of minibatch updates on it.
  CycleResult run_cycle(const supernet::Architecture& arch, std::size_t epochs = 0);

  // Resets every environment with fresh derived seeds.
  void reset_envs();

  std::size_t timesteps() const { return timesteps_; }
  std::size_t rollouts() const { return rollouts_; }
  const ad::Adam& optimizer() const { return optimizer_; }
  envs::VecEnv& venv() { return venv_; }
  const envs::EpisodeStats& stats() const { return venv_.stats(); }
  const PpoConfig& config() const { return config_; }

 private:
  supernet::SharedWeights& weights_;
  PpoConfig config_;
  envs::VecEnv venv_;
  ad::Adam optimizer_;
  Rng rng_;
  std::uint64_t seed_;
  std::size_t timesteps_ = 0;
  std::size_t rollouts_ = 0;
  std::size_t env_resets_ = 0;
};

using ArchitectureSampler = std::function<supernet::Architecture(std::size_t rollout)>;
using CurveSink = std::function<void(const CurvePoint&)>;

struct TrainResult {
  std::vector<CurvePoint> curve;
  std::size_t timesteps = 0;
  std::size_t rollouts = 0;
  std::size_t optimizer_steps = 0;
  std::optional<double> final_reward_mean;
  std::vector<supernet::Architecture> sampled;
};

// PPO until config.total_timesteps aggregate environment steps are consumed.
// `sampler` chooses the architecture before each rollout.
TrainResult train(supernet::SharedWeights& weights, const ArchitectureSampler& sampler,
                  const envs::Env& env_prototype, const PpoConfig& config, std::uint64_t seed,
                  const CurveSink& sink = {});

TrainResult train(supernet::SharedWeights& weights, const supernet::Architecture& arch,
                  const envs::Env& env_prototype, const PpoConfig& config, std::uint64_t seed,
                  const CurveSink& sink = {});

// Mean episodic return of a frozen policy over `episodes` episodes, run as
// lockstep batches of `batch` environments with seeds derived from `seed`.
// Actions are sampled (stochastic policy) unless `greedy` is set.
double evaluate_policy(const supernet::PolicyNetwork& net, const envs::Env& env_prototype,
                       std::size_t episodes, std::uint64_t seed, bool greedy = false,
                       std::size_t batch = 16);

}  // namespace nasrl::ppo
