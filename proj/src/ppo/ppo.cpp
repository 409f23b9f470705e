#include "nasrl/ppo/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>

#include "nasrl/autodiff/categorical.hpp"
#include "nasrl/autodiff/ops.hpp"
#include "nasrl/errors.hpp"

namespace nasrl::ppo {

using ad::Tensor;
using nlohmann::json;

void PpoConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("ppo config: " + m); };
  if (!(clip > 0.0 && clip < 1.0)) fail("clip must lie in (0, 1)");
  if (value_loss_coef < 0 || entropy_coef < 0) fail("loss coefficients must be non-negative");
  if (gae_lambda < 0 || gae_lambda > 1) fail("gae_lambda must lie in [0, 1]");
  if (gamma < 0 || gamma > 1) fail("gamma must lie in [0, 1]");
  if (runner_steps == 0 || parallel_envs == 0) fail("runner_steps and parallel_envs must be positive");
  if (total_timesteps == 0) fail("total_timesteps must be positive");
  if (epochs == 0 || minibatches == 0) fail("epochs and minibatches must be positive");
  if (minibatches > transitions_per_rollout()) fail("more minibatches than transitions");
  if (!(learning_rate >= 0)) fail("learning_rate must be non-negative");
}

std::size_t PpoConfig::rollouts() const {
  const std::size_t per = transitions_per_rollout();
  return (total_timesteps + per - 1) / per;
}

json to_json(const PpoConfig& c) {
  return json{{"clip", c.clip},
              {"value_loss_coef", c.value_loss_coef},
              {"entropy_coef", c.entropy_coef},
              {"gae_lambda", c.gae_lambda},
              {"gamma", c.gamma},
              {"runner_steps", c.runner_steps},
              {"parallel_envs", c.parallel_envs},
              {"total_timesteps", c.total_timesteps},
              {"epochs", c.epochs},
              {"minibatches", c.minibatches},
              {"learning_rate", c.learning_rate},
              {"max_grad_norm", c.max_grad_norm},
              {"normalize_advantages", c.normalize_advantages}};
}

PpoConfig ppo_config_from_json(const json& j) {
  PpoConfig c;
  const json defaults = to_json(c);
  if (!j.is_object()) throw ConfigError("ppo config must be an object");
  for (const auto& [key, _] : j.items())
    if (!defaults.contains(key)) throw ConfigError("ppo config: unknown key '" + key + "'");
  try {
    c.clip = j.value("clip", c.clip);
    c.value_loss_coef = j.value("value_loss_coef", c.value_loss_coef);
    c.entropy_coef = j.value("entropy_coef", c.entropy_coef);
    c.gae_lambda = j.value("gae_lambda", c.gae_lambda);
    c.gamma = j.value("gamma", c.gamma);
    c.runner_steps = j.value("runner_steps", c.runner_steps);
    c.parallel_envs = j.value("parallel_envs", c.parallel_envs);
    c.total_timesteps = j.value("total_timesteps", c.total_timesteps);
    c.epochs = j.value("epochs", c.epochs);
    c.minibatches = j.value("minibatches", c.minibatches);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.max_grad_norm = j.value("max_grad_norm", c.max_grad_norm);
    c.normalize_advantages = j.value("normalize_advantages", c.normalize_advantages);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("ppo config: ") + e.what());
  }
  c.validate();
  return c;
}

Tensor stack_observations(std::span<const envs::Observation> obs) {
  if (obs.empty()) throw DimensionError("stack_observations: empty batch");
  const auto& first = obs.front();
  const std::size_t channels = first.size() / (first.height * first.width);
  std::vector<double> data;
  data.reserve(obs.size() * first.size());
  for (const auto& o : obs) {
    if (o.size() != first.size()) throw DimensionError("stack_observations: ragged batch");
    data.insert(data.end(), o.pixels.begin(), o.pixels.end());
  }
  return Tensor::from({obs.size(), channels, first.height, first.width}, std::move(data));
}

RolloutBatch collect_rollout(const supernet::PolicyNetwork& net, envs::VecEnv& venv,
                             std::size_t steps, Rng& rng) {
  ad::NoGradGuard no_grad;
  RolloutBatch b;
  b.steps = steps;
  b.envs = venv.size();
  const auto& first = venv.observations().at(0);
  b.obs_size = first.size();
  b.obs_shape = {first.size() / (first.height * first.width), first.height, first.width};
  const std::size_t n = steps * b.envs;
  b.observations.reserve(n * b.obs_size);
  b.actions.reserve(n);
  b.log_probs.reserve(n);
  b.values.reserve(n);
  b.rewards.reserve(n);
  b.dones.reserve(n);

  for (std::size_t t = 0; t < steps; ++t) {
    const auto& obs = venv.observations();
    for (const auto& o : obs) b.observations.insert(b.observations.end(), o.pixels.begin(), o.pixels.end());
    const auto out = net.forward(stack_observations(obs));
    const ad::Categorical dist(out.logits);
    const auto actions = dist.sample(rng);
    const Tensor logp = dist.log_prob(actions);
    b.actions.insert(b.actions.end(), actions.begin(), actions.end());
    b.log_probs.insert(b.log_probs.end(), logp.data().begin(), logp.data().end());
    b.values.insert(b.values.end(), out.value.data().begin(), out.value.data().end());
    for (const auto& r : venv.step(actions)) {
      b.rewards.push_back(r.reward);
      b.dones.push_back(r.done ? 1.0 : 0.0);
      if (r.episode_return) b.finished_returns.push_back(*r.episode_return);
    }
  }
  const auto tail = net.forward(stack_observations(venv.observations()));
  b.bootstrap_values.assign(tail.value.data().begin(), tail.value.data().end());
  return b;
}

Advantages compute_gae(const RolloutBatch& batch, double gamma, double lambda, bool normalize) {
  const std::size_t T = batch.steps, E = batch.envs;
  Advantages out;
  out.advantages.assign(T * E, 0.0);
  out.returns.assign(T * E, 0.0);
  for (std::size_t e = 0; e < E; ++e) {
    double next_adv = 0.0;
    for (std::size_t t = T; t-- > 0;) {
      const std::size_t i = t * E + e;
      const double next_value = t + 1 == T ? batch.bootstrap_values[e] : batch.values[i + E];
      const double live = 1.0 - batch.dones[i];
      const double delta = batch.rewards[i] + gamma * next_value * live - batch.values[i];
      next_adv = delta + gamma * lambda * live * next_adv;
      out.advantages[i] = next_adv;
      out.returns[i] = next_adv + batch.values[i];
    }
  }
  if (normalize && !out.advantages.empty()) {
    const double n = double(out.advantages.size());
    const double mean = std::accumulate(out.advantages.begin(), out.advantages.end(), 0.0) / n;
    double var = 0.0;
    for (double a : out.advantages) var += (a - mean) * (a - mean);
    const double std = std::sqrt(var / n);
    for (double& a : out.advantages) a = (a - mean) / (std + 1e-8);
  }
  return out;
}

Minibatch make_minibatch(const RolloutBatch& batch, const Advantages& adv,
                         std::span<const std::size_t> indices) {
  Minibatch mb;
  std::vector<double> obs;
  obs.reserve(indices.size() * batch.obs_size);
  for (std::size_t i : indices) {
    if (i >= batch.size()) throw DimensionError("minibatch index out of range");
    auto first = batch.observations.begin() + static_cast<std::ptrdiff_t>(i * batch.obs_size);
    obs.insert(obs.end(), first, first + static_cast<std::ptrdiff_t>(batch.obs_size));
    mb.actions.push_back(batch.actions[i]);
    mb.old_log_probs.push_back(batch.log_probs[i]);
    mb.advantages.push_back(adv.advantages[i]);
    mb.returns.push_back(adv.returns[i]);
  }
  mb.observations = Tensor::from({indices.size(), batch.obs_shape[0], batch.obs_shape[1],
                                  batch.obs_shape[2]},
                                 std::move(obs));
  return mb;
}

LossTerms ppo_loss(const Tensor& logits, const Tensor& values, const Minibatch& mb,
                   const PpoConfig& config) {
  const std::size_t m = mb.actions.size();
  if (logits.rank() != 2 || logits.dim(0) != m || values.numel() != m)
    throw DimensionError("ppo_loss: logits/values do not match the minibatch size");
  const Tensor logp_all = ad::log_softmax(logits);
  const Tensor logp = ad::gather(logp_all, mb.actions);
  const Tensor ratio = ad::exp(ad::sub(logp, Tensor::from({m}, mb.old_log_probs)));
  for (std::size_t i = 0; i < m; ++i)
    if (!std::isfinite(ratio[i]))
      throw NumericError("ppo_loss: non-finite probability ratio at sample " + std::to_string(i) +
                         " (new log-prob " + std::to_string(logp[i]) + ", behavior log-prob " +
                         std::to_string(mb.old_log_probs[i]) + ")");
  const Tensor adv = Tensor::from({m}, mb.advantages);
  const Tensor unclipped = ad::mul(ratio, adv);
  const Tensor clipped = ad::mul(ad::clamp(ratio, 1.0 - config.clip, 1.0 + config.clip), adv);
  const Tensor policy = ad::neg(ad::mean(ad::minimum(unclipped, clipped)));
  const Tensor v = ad::reshape(values, {m});
  const Tensor value = ad::mean(ad::square(ad::sub(v, Tensor::from({m}, mb.returns))));
  const Tensor entropy = ad::mean(ad::entropy_from_log_probs(logp_all));

  LossTerms out;
  out.total = ad::add(ad::add(policy, ad::scale(value, config.value_loss_coef)),
                      ad::scale(entropy, -config.entropy_coef));
  out.policy = policy.item();
  out.value = value.item();
  out.entropy = entropy.item();
  std::size_t clipped_count = 0;
  for (std::size_t i = 0; i < m; ++i)
    clipped_count += std::abs(ratio[i] - 1.0) > config.clip;
  out.clip_fraction = m ? double(clipped_count) / double(m) : 0.0;
  return out;
}

LossTerms ppo_loss(const supernet::PolicyNetwork& net, const Minibatch& mb,
                   const PpoConfig& config) {
  const auto out = net.forward(mb.observations);
  return ppo_loss(out.logits, out.value, mb, config);
}

json to_json(const CurvePoint& p) {
  return json{{"rollout", p.rollout},
              {"timesteps", p.timesteps},
              {"reward_mean", p.reward_mean ? json(*p.reward_mean) : json(nullptr)},
              {"policy_loss", p.policy_loss},
              {"value_loss", p.value_loss},
              {"entropy", p.entropy},
              {"lr", p.learning_rate},
              {"architecture", p.architecture}};
}

void write_curve_point(std::ostream& out, const CurvePoint& p) { out << to_json(p).dump() << '\n'; }

namespace {

std::size_t schedule_length(const PpoConfig& c, std::size_t requested) {
  return requested ? requested : c.rollouts() * c.epochs * c.minibatches;
}

double segment_mean(const RolloutBatch& b) {
  std::vector<double> running(b.envs, 0.0);
  std::vector<std::size_t> length(b.envs, 0);
  double total = 0.0;
  std::size_t segments = 0;
  for (std::size_t t = 0; t < b.steps; ++t)
    for (std::size_t e = 0; e < b.envs; ++e) {
      const std::size_t i = t * b.envs + e;
      running[e] += b.rewards[i];
      ++length[e];
      if (b.dones[i] != 0.0) {
        total += running[e];
        ++segments;
        running[e] = 0.0;
        length[e] = 0;
      }
    }
  for (std::size_t e = 0; e < b.envs; ++e)
    if (length[e] > 0) {
      total += running[e];
      ++segments;
    }
  return segments ? total / double(segments) : 0.0;
}

}  // namespace

Trainer::Trainer(supernet::SharedWeights& weights, const envs::Env& env_prototype,
                 PpoConfig config, std::uint64_t seed, std::size_t optimizer_steps)
    : weights_(weights),
      config_((config.validate(), config)),
      venv_(env_prototype, config.parallel_envs),
      optimizer_(ad::CosineSchedule{config.learning_rate, schedule_length(config, optimizer_steps)}),
      rng_(derive_seed(seed, 0x7010)),
      seed_(seed) {
  venv_.reset(derive_seed(seed_, 0));
}

void Trainer::reset_envs() { venv_.reset(derive_seed(seed_, ++env_resets_)); }

CycleResult Trainer::run_cycle(const supernet::Architecture& arch, std::size_t epochs) {
  if (epochs == 0) epochs = config_.epochs;
  const auto net = supernet::instantiate(weights_, arch);
  const RolloutBatch batch = collect_rollout(net, venv_, config_.runner_steps, rng_);
  timesteps_ += batch.size();
  ++rollouts_;
  const Advantages adv =
      compute_gae(batch, config_.gamma, config_.gae_lambda, config_.normalize_advantages);

  CycleResult result;
  result.architecture = arch;
  result.finished_returns = batch.finished_returns;
  result.segment_return_mean = segment_mean(batch);

  auto params = net.parameters();
  const std::size_t n = batch.size();
  const std::size_t mb_size = n / config_.minibatches;
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng_.uniform_int(i + 1)]);
    for (std::size_t m = 0; m < config_.minibatches; ++m) {
      const std::size_t begin = m * mb_size;
      const std::size_t end = m + 1 == config_.minibatches ? n : begin + mb_size;
      const auto mb = make_minibatch(
          batch, adv, std::span<const std::size_t>(order).subspan(begin, end - begin));
      ad::zero_grads(params);
      result.last_loss = ppo_loss(net, mb, config_);
      ad::backward(result.last_loss.total);
      if (config_.max_grad_norm > 0) ad::clip_grad_norm(params, config_.max_grad_norm);
      optimizer_.step(params);
    }
  }
  ad::zero_grads(params);
  return result;
}

TrainResult train(supernet::SharedWeights& weights, const ArchitectureSampler& sampler,
                  const envs::Env& env_prototype, const PpoConfig& config, std::uint64_t seed,
                  const CurveSink& sink) {
  Trainer trainer(weights, env_prototype, config, seed);
  TrainResult result;
  const std::size_t rollouts = config.rollouts();
  for (std::size_t r = 0; r < rollouts; ++r) {
    const supernet::Architecture arch = sampler(r);
    const double rate = trainer.optimizer().current_rate();
    const CycleResult cycle = trainer.run_cycle(arch);
    CurvePoint p;
    p.rollout = r + 1;
    p.timesteps = trainer.timesteps();
    p.reward_mean = trainer.stats().mean();
    p.policy_loss = cycle.last_loss.policy;
    p.value_loss = cycle.last_loss.value;
    p.entropy = cycle.last_loss.entropy;
    p.learning_rate = rate;
    p.architecture = arch.id();
    if (sink) sink(p);
    result.curve.push_back(p);
    result.sampled.push_back(arch);
  }
  result.timesteps = trainer.timesteps();
  result.rollouts = trainer.rollouts();
  result.optimizer_steps = trainer.optimizer().step_count();
  result.final_reward_mean = trainer.stats().mean();
  return result;
}

TrainResult train(supernet::SharedWeights& weights, const supernet::Architecture& arch,
                  const envs::Env& env_prototype, const PpoConfig& config, std::uint64_t seed,
                  const CurveSink& sink) {
  return train(weights, [&](std::size_t) { return arch; }, env_prototype, config, seed, sink);
}

double evaluate_policy(const supernet::PolicyNetwork& net, const envs::Env& env_prototype,
                       std::size_t episodes, std::uint64_t seed, bool greedy, std::size_t batch) {
  if (episodes == 0) throw ContractError("evaluate_policy: need at least one episode");
  if (batch == 0) batch = 1;
  ad::NoGradGuard no_grad;
  Rng rng(derive_seed(seed, 0xe7a1));
  double total = 0.0;
  for (std::size_t start = 0; start < episodes; start += batch) {
    const std::size_t count = std::min(batch, episodes - start);
    std::vector<std::unique_ptr<envs::Env>> envs;
    std::vector<envs::Observation> obs;
    for (std::size_t i = 0; i < count; ++i) {
      envs.push_back(env_prototype.clone());
      obs.push_back(envs.back()->reset(derive_seed(seed, start + i)));
    }
    std::vector<double> returns(count, 0.0);
    std::vector<std::size_t> live(count);
    std::iota(live.begin(), live.end(), 0);
    while (!live.empty()) {
      std::vector<envs::Observation> batch_obs;
      for (std::size_t i : live) batch_obs.push_back(obs[i]);
      const auto out = net.forward(stack_observations(batch_obs));
      std::vector<std::size_t> actions;
      if (greedy) {
        const std::size_t a = out.logits.dim(1);
        for (std::size_t r = 0; r < live.size(); ++r) {
          const auto row = out.logits.data().subspan(r * a, a);
          actions.push_back(
              static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()));
        }
      } else {
        actions = ad::Categorical(out.logits).sample(rng);
      }
      std::vector<std::size_t> still;
      for (std::size_t r = 0; r < live.size(); ++r) {
        const std::size_t i = live[r];
        auto step = envs[i]->step(actions[r]);
        returns[i] += step.reward;
        if (step.done)
          continue;
        obs[i] = std::move(step.observation);
        still.push_back(i);
      }
      live = std::move(still);
    }
    for (double r : returns) total += r;
  }
  return total / double(episodes);
}

}  // namespace nasrl::ppo
