#include "nasrl/harness/config.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "nasrl/envs/presets.hpp"
#include "nasrl/errors.hpp"

namespace nasrl::harness {

using nlohmann::json;

const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names{"enas", "spos", "random"};
  return names;
}

void ExperimentConfig::validate() const {
  const auto& envs = envs::env_presets();
  if (std::find(envs.begin(), envs.end(), env) == envs.end())
    throw ConfigError("unknown environment preset '" + env + "'");
  const auto& methods = method_names();
  if (std::find(methods.begin(), methods.end(), method) == methods.end())
    throw ConfigError("unknown method '" + method + "' (expected enas, spos or random)");
  ppo.validate();
  nas.validate();
  const auto s = supernet::resolve_space(space);
  const auto e = envs::make_env(env);
  if (s.input_channels != envs::kFrameStack || s.input_height != e->height() || s.input_width != e->width() ||
      s.actions != e->num_actions())
    throw ConfigError("space '" + s.name + "' expects " + std::to_string(s.input_channels) + "x" +
                      std::to_string(s.input_height) + "x" + std::to_string(s.input_width) + " input and " +
                      std::to_string(s.actions) + " actions but " + env + " gives " +
                      std::to_string(envs::kFrameStack) + "x" + std::to_string(e->height()) + "x" +
                      std::to_string(e->width()) + " and " + std::to_string(e->num_actions()));
  if (seeds == 0) throw ConfigError("seeds must be positive");
  if (k == 0 || k > supernet::space_size(s))
    throw ConfigError("k = " + std::to_string(k) + " must lie in [1, " +
                      std::to_string(supernet::space_size(s)) + "]");
  if (random_trials == 0) throw ConfigError("random_trials must be positive");
  if (eval_episodes == 0) throw ConfigError("eval_episodes must be positive");
  if (parallel == 0) throw ConfigError("parallel must be positive");
}

std::string ExperimentConfig::table_path() const {
  return table.empty() ? (std::filesystem::path(out_dir) / "bench.jsonl").string() : table;
}

json to_json(const ExperimentConfig& c) {
  return json{{"env", c.env},
              {"space", c.space},
              {"method", c.method},
              {"ppo", ppo::to_json(c.ppo)},
              {"nas", nas::to_json(c.nas)},
              {"seed", c.seed},
              {"seeds", c.seeds},
              {"k", c.k},
              {"random_trials", c.random_trials},
              {"eval_episodes", c.eval_episodes},
              {"out_dir", c.out_dir},
              {"table", c.table},
              {"parallel", c.parallel}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig c;
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  const json defaults = to_json(c);
  for (const auto& [key, _] : j.items())
    if (!defaults.contains(key)) throw ConfigError("experiment config: unknown key '" + key + "'");
  try {
    c.env = j.value("env", c.env);
    c.space = j.value("space", c.space);
    c.method = j.value("method", c.method);
    if (j.contains("ppo")) c.ppo = ppo::ppo_config_from_json(j.at("ppo"));
    if (j.contains("nas")) c.nas = nas::nas_config_from_json(j.at("nas"));
    c.seed = j.value("seed", c.seed);
    c.seeds = j.value("seeds", c.seeds);
    c.k = j.value("k", c.k);
    c.random_trials = j.value("random_trials", c.random_trials);
    c.eval_episodes = j.value("eval_episodes", c.eval_episodes);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.table = j.value("table", c.table);
    c.parallel = j.value("parallel", c.parallel);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
  return experiment_config_from_json(j);
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_digest(const ExperimentConfig& c) {
  json j = to_json(c);
  j.erase("out_dir");
  j.erase("table");
  j.erase("parallel");
  j["space"] = supernet::to_json(resolve_space(c));
  return fnv1a_hex(j.dump());
}

std::string table_digest(const ExperimentConfig& c) {
  const json j{{"space", supernet::to_json(resolve_space(c))},
               {"env", c.env},
               {"ppo", ppo::to_json(c.ppo)},
               {"eval_episodes", c.eval_episodes}};
  return fnv1a_hex(j.dump());
}

supernet::SearchSpace resolve_space(const ExperimentConfig& c) {
  return supernet::resolve_space(c.space);
}

std::unique_ptr<envs::Env> make_env(const ExperimentConfig& c) { return envs::make_env(c.env); }

std::uint64_t search_seed(const ExperimentConfig& c, std::size_t i) {
  return derive_seed(c.seed, 0x5eed0000 + i);
}

}  // namespace nasrl::harness
