#include "nasrl/envs/vec_env.hpp"

#include <numeric>
#include <string>

#include "json.hpp"
#include "nasrl/errors.hpp"
#include "nasrl/rng.hpp"

namespace nasrl::envs {

void EpisodeStats::push(double episode_return) {
  window_.push_back(episode_return);
  if (window_.size() > capacity_) window_.pop_front();
  ++episodes_;
}

std::optional<double> EpisodeStats::mean() const {
  if (window_.empty()) return std::nullopt;
  return std::accumulate(window_.begin(), window_.end(), 0.0) /
         static_cast<double>(window_.size());
}

void write_episode_record(std::ostream& out, const EpisodeRecord& rec) {
  nlohmann::json j{{"env_id", rec.env_id},
                   {"episode_index", rec.episode_index},
                   {"return", rec.episode_return},
                   {"length", rec.length},
                   {"seed", rec.seed}};
  out << j.dump() << '\n';
}

std::vector<EpisodeRecord> read_episode_log(std::istream& in) {
  std::vector<EpisodeRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    out.push_back({j.at("env_id").get<std::size_t>(), j.at("episode_index").get<std::size_t>(),
                   j.at("return").get<double>(), j.at("length").get<std::size_t>(),
                   j.at("seed").get<std::uint64_t>()});
  }
  return out;
}

VecEnv::VecEnv(const Env& prototype, std::size_t count) {
  if (count == 0) throw ContractError("VecEnv needs at least one environment");
  for (std::size_t i = 0; i < count; ++i) envs_.push_back(prototype.clone());
  base_seeds_.assign(count, 0);
  episode_index_.assign(count, 0);
}

std::vector<Observation> VecEnv::reset(std::span<const std::uint64_t> seeds) {
  if (seeds.size() != envs_.size())
    throw DimensionError("VecEnv::reset: " + std::to_string(seeds.size()) + " seeds for " +
                         std::to_string(envs_.size()) + " environments");
  obs_.clear();
  for (std::size_t i = 0; i < envs_.size(); ++i) {
    base_seeds_[i] = seeds[i];
    episode_index_[i] = 0;
    obs_.push_back(envs_[i]->reset(seeds[i]));
  }
  return obs_;
}

std::vector<Observation> VecEnv::reset(std::uint64_t base_seed) {
  std::vector<std::uint64_t> seeds(envs_.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = derive_seed(base_seed, i);
  return reset(seeds);
}

std::vector<StepResult> VecEnv::step(std::span<const std::size_t> actions) {
  if (actions.size() != envs_.size())
    throw DimensionError("VecEnv::step: " + std::to_string(actions.size()) + " actions for " +
                         std::to_string(envs_.size()) + " environments");
  std::vector<StepResult> results;
  results.reserve(envs_.size());
  for (std::size_t i = 0; i < envs_.size(); ++i) {
    StepResult r = envs_[i]->step(actions[i]);
    if (r.done) {
      stats_.push(*r.episode_return);
      if (sink_)
        sink_({i, episode_index_[i], *r.episode_return, r.episode_length, envs_[i]->seed()});
      ++episode_index_[i];
      r.observation = envs_[i]->reset(derive_seed(base_seeds_[i], episode_index_[i]));
    }
    obs_[i] = r.observation;
    results.push_back(std::move(r));
  }
  stats_.add_steps(envs_.size());
  return results;
}

}  // namespace nasrl::envs
