#include "nasrl/nas/search.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "nasrl/errors.hpp"

namespace nasrl::nas {

using nlohmann::json;
using supernet::Architecture;
using supernet::SearchSpace;

json to_json(const ProxyScore& p) {
  return json{{"architecture", p.architecture.id()}, {"score", p.score}};
}

void rank_scores(const SearchSpace& space, std::vector<ProxyScore>& scores) {
  std::vector<std::pair<std::size_t, ProxyScore>> keyed;
  for (auto& s : scores) keyed.emplace_back(supernet::enumeration_index(space, s.architecture), s);
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    if (a.second.score != b.second.score) return a.second.score > b.second.score;
    return a.first < b.first;
  });
  for (std::size_t i = 0; i < keyed.size(); ++i) scores[i] = std::move(keyed[i].second);
}

void NasConfig::validate() const {
  controller.validate();
  if (children_per_step == 0) throw ConfigError("nas config: children_per_step must be positive");
  if (update_every == 0) throw ConfigError("nas config: update_every must be positive");
  if (child_epochs == 0) throw ConfigError("nas config: child_epochs must be positive");
  if (total_timesteps == 0) throw ConfigError("nas config: total_timesteps must be positive");
  if (eval_episodes == 0) throw ConfigError("nas config: eval_episodes must be positive");
}

json to_json(const NasConfig& c) {
  return json{{"controller", to_json(c.controller)},
              {"children_per_step", c.children_per_step},
              {"update_every", c.update_every},
              {"child_epochs", c.child_epochs},
              {"total_timesteps", c.total_timesteps},
              {"eval_episodes", c.eval_episodes},
              {"eval_seed", c.eval_seed}};
}

NasConfig nas_config_from_json(const json& j) {
  NasConfig c;
  if (!j.is_object()) throw ConfigError("nas config must be an object");
  const json defaults = to_json(c);
  for (const auto& [key, _] : j.items())
    if (!defaults.contains(key)) throw ConfigError("nas config: unknown key '" + key + "'");
  try {
    if (j.contains("controller")) c.controller = controller_config_from_json(j.at("controller"));
    c.children_per_step = j.value("children_per_step", c.children_per_step);
    c.update_every = j.value("update_every", c.update_every);
    c.child_epochs = j.value("child_epochs", c.child_epochs);
    c.total_timesteps = j.value("total_timesteps", c.total_timesteps);
    c.eval_episodes = j.value("eval_episodes", c.eval_episodes);
    c.eval_seed = j.value("eval_seed", c.eval_seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("nas config: ") + e.what());
  }
  c.validate();
  return c;
}

EnasResult enas_search(Controller& ctrl, const ChildEvaluator& evaluate, std::size_t nas_steps,
                       const NasConfig& config, std::uint64_t seed) {
  config.validate();
  if (nas_steps == 0)
    throw ConfigError("enas: the budget does not cover a single NAS step (" +
                      std::to_string(config.children_per_step) + " child rollouts)");
  Rng rng(derive_seed(seed, 0xe7a5));
  EnasResult result;
  std::vector<Architecture> pending;
  std::vector<double> rewards;
  auto flush = [&] {
    ctrl.update(pending, rewards);
    result.trace.baselines.push_back(*ctrl.baseline());
    ++result.trace.controller_updates;
    pending.clear();
    rewards.clear();
  };
  for (std::size_t step = 0; step < nas_steps; ++step) {
    for (std::size_t c = 0; c < config.children_per_step; ++c) {
      Architecture arch;
      {
        ad::NoGradGuard no_grad;
        arch = ctrl.sample(rng).architecture;
      }
      const double r = evaluate(arch);
      pending.push_back(arch);
      rewards.push_back(r);
      result.trace.children.push_back(arch);
      result.trace.rewards.push_back(r);
    }
    ++result.trace.nas_steps;
    if ((step + 1) % config.update_every == 0) flush();
  }
  if (!pending.empty()) flush();

  for (const auto& a : supernet::enumerate(ctrl.space()))
    result.ranking.push_back({a, ctrl.probability(a), "enas"});
  rank_scores(ctrl.space(), result.ranking);
  return result;
}

std::size_t enas_steps_for_budget(const NasConfig& nas, const ppo::PpoConfig& ppo) {
  return nas.total_timesteps / (nas.children_per_step * ppo.transitions_per_rollout());
}

EnasResult enas_search(const SearchSpace& space, const envs::Env& env, const ppo::PpoConfig& ppo,
                       const NasConfig& nas, std::uint64_t seed) {
  nas.validate();
  ppo.validate();
  const std::size_t steps = enas_steps_for_budget(nas, ppo);
  if (steps == 0)
    throw ConfigError("enas: total_timesteps " + std::to_string(nas.total_timesteps) +
                      " is smaller than one NAS step of " +
                      std::to_string(nas.children_per_step * ppo.transitions_per_rollout()));
  supernet::SharedWeights weights(space, derive_seed(seed, 1));
  const std::size_t optimizer_steps =
      steps * nas.children_per_step * nas.child_epochs * ppo.minibatches;
  ppo::Trainer trainer(weights, env, ppo, derive_seed(seed, 2), optimizer_steps);
  ControllerConfig cc = nas.controller;
  cc.total_updates = (steps + nas.update_every - 1) / nas.update_every;
  Controller ctrl(space, cc, derive_seed(seed, 3));
  auto child = [&](const Architecture& arch) {
    trainer.reset_envs();
    return trainer.run_cycle(arch, nas.child_epochs).segment_return_mean;
  };
  return enas_search(ctrl, child, steps, nas, seed);
}

Architecture uniform_architecture(const SearchSpace& space, Rng& rng,
                                  std::span<const Architecture> allowed) {
  if (!allowed.empty()) return allowed[rng.uniform_int(allowed.size())];
  Architecture a;
  for (const auto& b : space.blocks) a.choices.push_back(rng.uniform_int(b.option_count()));
  return a;
}

ppo::ArchitectureSampler spos_sampler(const SearchSpace& space, std::uint64_t seed,
                                      std::span<const Architecture> allowed) {
  for (const auto& a : allowed) supernet::validate_architecture(space, a);
  auto rng = std::make_shared<Rng>(derive_seed(seed, 0x5b05));
  std::vector<Architecture> pool(allowed.begin(), allowed.end());
  return [space, rng, pool](std::size_t) { return uniform_architecture(space, *rng, pool); };
}

ppo::TrainResult spos_fit(supernet::SharedWeights& weights, const envs::Env& env,
                          const ppo::PpoConfig& ppo, std::uint64_t seed,
                          std::span<const Architecture> allowed) {
  return ppo::train(weights, spos_sampler(weights.space(), seed, allowed), env, ppo, seed);
}

std::vector<ProxyScore> spos_select(const supernet::SharedWeights& weights, const envs::Env& env,
                                    std::size_t episodes, std::uint64_t eval_seed) {
  std::vector<ProxyScore> scores;
  for (const auto& a : supernet::enumerate(weights.space())) {
    const auto net = supernet::instantiate(weights, a);
    scores.push_back({a, ppo::evaluate_policy(net, env, episodes, eval_seed), "spos"});
  }
  rank_scores(weights.space(), scores);
  return scores;
}

std::vector<Architecture> random_select(const SearchSpace& space, std::size_t k, Rng& rng) {
  const std::size_t n = supernet::space_size(space);
  if (k > n)
    throw ConfigError("random_select: K = " + std::to_string(k) + " exceeds the space size " +
                      std::to_string(n));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<Architecture> out;
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(idx[i], idx[i + rng.uniform_int(n - i)]);
    out.push_back(supernet::architecture_at(space, idx[i]));
  }
  return out;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  if (values.empty()) return s;
  const double n = double(values.size());
  const double shift = values[0];
  double sum = 0.0, sq = 0.0;
  for (double v : values) {
    sum += v - shift;
    sq += (v - shift) * (v - shift);
  }
  s.mean = shift + sum / n;
  s.std = std::sqrt(std::max(0.0, sq / n - (sum / n) * (sum / n)));
  return s;
}

Summary best_of_k(std::span<const double> values, std::size_t k, std::size_t trials, Rng& rng) {
  const std::size_t n = values.size();
  if (k == 0 || k > n)
    throw ConfigError("best_of_k: K must lie in [1, " + std::to_string(n) + "]");
  if (trials == 0) throw ConfigError("best_of_k: trials must be positive");
  std::vector<double> best;
  std::vector<std::size_t> idx(n);
  for (std::size_t t = 0; t < trials; ++t) {
    std::iota(idx.begin(), idx.end(), 0);
    double m = -INFINITY;
    for (std::size_t i = 0; i < k; ++i) {
      std::swap(idx[i], idx[i + rng.uniform_int(n - i)]);
      m = std::max(m, values[idx[i]]);
    }
    best.push_back(m);
  }
  return summarize(best);
}

json to_json(const TopKReport& r) {
  json seeds = json::array();
  for (const auto& s : r.seeds) {
    json ranking = json::array();
    for (const auto& p : s.ranking) ranking.push_back(to_json(p));
    json top = json::array();
    for (const auto& c : s.top_k)
      top.push_back({{"architecture", c.architecture.id()},
                     {"proxy", c.proxy},
                     {"reward_mean", c.truth.reward_mean},
                     {"total_reward", c.truth.total_reward},
                     {"source", c.truth.from_table ? "table" : "trained"}});
    seeds.push_back({{"seed", s.seed},
                     {"ranking", ranking},
                     {"top_k", top},
                     {"winner", s.winner.id()},
                     {"reward_mean", s.reward_mean},
                     {"total_reward", s.total_reward}});
  }
  return json{{"method", r.method},
              {"k", r.k},
              {"seeds", seeds},
              {"summary",
               {{"reward_mean", {{"mean", r.reward_mean.mean}, {"std", r.reward_mean.std}}},
                {"total_reward", {{"mean", r.total_reward.mean}, {"std", r.total_reward.std}}}}}};
}

TopKReport topk_protocol(const std::string& method, const SearchSpace& space,
                         const ProxyRanker& rank, const TruthOracle& truth, std::size_t k,
                         std::span<const std::uint64_t> seeds) {
  if (k == 0) throw ConfigError("topk: K must be positive");
  if (seeds.empty()) throw ConfigError("topk: need at least one seed");
  TopKReport report;
  report.method = method;
  report.k = k;
  std::vector<double> rm, tr;
  for (std::uint64_t seed : seeds) {
    SeedOutcome out;
    out.seed = seed;
    out.ranking = rank(seed);
    if (out.ranking.size() < k)
      throw ConfigError("topk: method '" + method + "' ranked only " +
                        std::to_string(out.ranking.size()) + " architectures, K = " +
                        std::to_string(k));
    std::size_t best = 0;
    for (std::size_t i = 0; i < k; ++i) {
      const auto& p = out.ranking[i];
      out.top_k.push_back({p.architecture, p.score, truth(p.architecture)});
      const auto& cur = out.top_k[i].truth;
      const auto& lead = out.top_k[best].truth;
      if (cur.reward_mean > lead.reward_mean ||
          (cur.reward_mean == lead.reward_mean &&
           supernet::enumeration_index(space, p.architecture) <
               supernet::enumeration_index(space, out.top_k[best].architecture)))
        best = i;
    }
    out.winner = out.top_k[best].architecture;
    out.reward_mean = out.top_k[best].truth.reward_mean;
    out.total_reward = out.top_k[0].truth.total_reward;
    for (const auto& c : out.top_k) out.total_reward = std::max(out.total_reward, c.truth.total_reward);
    rm.push_back(out.reward_mean);
    tr.push_back(out.total_reward);
    report.seeds.push_back(std::move(out));
  }
  report.reward_mean = summarize(rm);
  report.total_reward = summarize(tr);
  return report;
}

}  // namespace nasrl::nas
