#include "nasrl/harness/bench_table.hpp"

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "nasrl/errors.hpp"

namespace nasrl::harness {

using nlohmann::json;
using supernet::Architecture;

json to_json(const BenchRecord& r) {
  return json{{"architecture", r.architecture.id()}, {"seed", r.seed},
              {"reward_mean", r.reward_mean},        {"total_reward", r.total_reward},
              {"timesteps", r.timesteps},            {"digest", r.digest}};
}

BenchRecord bench_record_from_json(const json& j) {
  try {
    BenchRecord r;
    r.architecture = Architecture::parse(j.at("architecture").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.reward_mean = j.at("reward_mean").get<double>();
    r.total_reward = j.at("total_reward").get<double>();
    r.timesteps = j.at("timesteps").get<std::size_t>();
    r.digest = j.at("digest").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bench record: ") + e.what());
  }
}

BenchTable BenchTable::load(const std::string& path, const std::string& digest) {
  BenchTable t(digest);
  std::ifstream in(path, std::ios::binary);
  if (!in) return t;
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    const std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) break;  // unterminated tail of an interrupted write
    ++line_no;
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    BenchRecord r = bench_record_from_json(j);
    if (r.digest != digest)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": record digest " + r.digest +
                        " differs from the config digest " + digest +
                        "; tables from different configs are never merged");
    t.add(std::move(r));
  }
  return t;
}

bool BenchTable::contains(const Architecture& a, std::uint64_t seed) const {
  return index_.count({a, seed}) > 0;
}

std::vector<BenchRecord> BenchTable::records_for(const Architecture& a) const {
  std::vector<BenchRecord> out;
  for (const auto& r : records_)
    if (r.architecture == a) out.push_back(r);
  return out;
}

std::optional<nas::TruePerformance> BenchTable::lookup(const Architecture& a) const {
  const auto rs = records_for(a);
  if (rs.empty()) return std::nullopt;
  nas::TruePerformance p;
  for (const auto& r : rs) {
    p.reward_mean += r.reward_mean;
    p.total_reward += r.total_reward;
  }
  p.reward_mean /= double(rs.size());
  p.total_reward /= double(rs.size());
  p.from_table = true;
  return p;
}

std::vector<Architecture> BenchTable::missing(const supernet::SearchSpace& space) const {
  std::vector<Architecture> out;
  for (const auto& a : supernet::enumerate(space))
    if (!lookup(a)) out.push_back(a);
  return out;
}

void BenchTable::add(BenchRecord r) {
  if (r.digest != digest_)
    throw ContractError("bench table: record digest " + r.digest + " does not match " + digest_);
  const auto key = std::make_pair(r.architecture, r.seed);
  if (index_.count(key))
    throw ContractError("bench table: duplicate record for " + r.architecture.id() + " seed " +
                        std::to_string(r.seed));
  index_[key] = records_.size();
  records_.push_back(std::move(r));
}

void BenchTable::write_record(std::ostream& out, const BenchRecord& r) {
  out << to_json(r).dump() << '\n';
}

void BenchTable::write(std::ostream& out) const {
  for (const auto& r : records_) write_record(out, r);
}

std::uint64_t bench_seed(const ExperimentConfig& config, const supernet::SearchSpace& space,
                         const Architecture& arch) {
  return derive_seed(derive_seed(config.seed, 0xbe7c), supernet::enumeration_index(space, arch));
}

TrainedArchitecture train_from_scratch(const ExperimentConfig& config,
                                       const supernet::SearchSpace& space,
                                       const Architecture& arch) {
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t seed = bench_seed(config, space, arch);
  const auto env = make_env(config);
  supernet::SharedWeights weights(space, derive_seed(seed, 1));
  const auto result = ppo::train(weights, arch, *env, config.ppo, derive_seed(seed, 2));
  const auto net = supernet::instantiate(weights, arch);
  TrainedArchitecture t;
  t.record.architecture = arch;
  t.record.seed = seed;
  t.record.reward_mean = result.final_reward_mean.value_or(0.0);
  t.record.total_reward =
      ppo::evaluate_policy(net, *env, config.eval_episodes, derive_seed(seed, 3));
  t.record.timesteps = result.timesteps;
  t.record.digest = table_digest(config);
  t.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return t;
}

namespace {

// Byte length of the newline-terminated prefix of a file.
std::uintmax_t complete_prefix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::uintmax_t last = 0, pos = 0;
  char c;
  while (in.get(c)) {
    ++pos;
    if (c == '\n') last = pos;
  }
  return last;
}

}  // namespace

BenchSummary bench_all(const ExperimentConfig& config, std::ostream* log) {
  config.validate();
  const auto space = resolve_space(config);
  const std::string path = config.table_path();
  BenchSummary summary{BenchTable::load(path, table_digest(config)), 0, 0};

  std::vector<Architecture> todo;
  for (const auto& a : supernet::enumerate(space)) {
    if (summary.table.contains(a, bench_seed(config, space, a)))
      ++summary.skipped;
    else
      todo.push_back(a);
  }
  if (todo.empty()) return summary;

  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  if (std::filesystem::exists(path)) std::filesystem::resize_file(path, complete_prefix(path));
  std::ofstream out(path, std::ios::app | std::ios::binary);
  std::ofstream wall(path + ".wall", std::ios::app | std::ios::binary);
  if (!out) throw ConfigError("cannot write bench table '" + path + "'");

  std::vector<std::optional<TrainedArchitecture>> done(todo.size());
  std::mutex mu;
  std::condition_variable ready;
  std::size_t next_job = 0;
  std::exception_ptr failure;
  auto worker = [&] {
    while (true) {
      std::size_t job;
      {
        std::lock_guard lock(mu);
        if (next_job >= todo.size() || failure) return;
        job = next_job++;
      }
      try {
        auto t = train_from_scratch(config, space, todo[job]);
        std::lock_guard lock(mu);
        done[job] = std::move(t);
      } catch (...) {
        std::lock_guard lock(mu);
        failure = std::current_exception();
      }
      ready.notify_all();
    }
  };
  const std::size_t workers = std::min(config.parallel, todo.size());
  std::vector<std::thread> pool;
  if (workers > 1)
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);

  // Records are committed in enumeration order whatever the completion order.
  auto commit_ready = [&](std::size_t& committed) {
    while (committed < todo.size()) {
      std::optional<TrainedArchitecture> t;
      {
        std::lock_guard lock(mu);
        if (!done[committed]) return;
        t = std::move(done[committed]);
      }
      BenchTable::write_record(out, t->record);
      out.flush();
      wall << json{{"architecture", t->record.architecture.id()},
                   {"seed", t->record.seed},
                   {"wall_seconds", t->wall_seconds}}
                  .dump()
           << '\n';
      wall.flush();
      if (log)
        *log << "bench " << t->record.architecture.id() << " reward_mean " << t->record.reward_mean
             << " total_reward " << t->record.total_reward << " (" << t->wall_seconds << " s)\n";
      summary.table.add(std::move(t->record));
      ++summary.trained;
      ++committed;
    }
  };
  std::size_t committed = 0;
  if (workers <= 1) {
    for (std::size_t job = 0; job < todo.size(); ++job) {
      done[job] = train_from_scratch(config, space, todo[job]);
      commit_ready(committed);
    }
  } else {
    while (committed < todo.size()) {
      {
        std::unique_lock lock(mu);
        ready.wait(lock, [&] { return failure || done[committed].has_value(); });
        if (failure && !done[committed]) break;
      }
      commit_ready(committed);
    }
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return summary;
}

nas::Summary best_of_k_distribution(const BenchTable& table, const supernet::SearchSpace& space,
                                    std::size_t k, std::size_t trials, Rng& rng,
                                    bool total_reward) {
  const auto missing = table.missing(space);
  if (!missing.empty()) {
    std::string list;
    for (const auto& a : missing) list += (list.empty() ? "" : ", ") + a.id();
    throw ConfigError("bench table is incomplete; missing " + std::to_string(missing.size()) +
                      " architecture(s): " + list);
  }
  std::vector<double> values;
  for (const auto& a : supernet::enumerate(space)) {
    const auto p = *table.lookup(a);
    values.push_back(total_reward ? p.total_reward : p.reward_mean);
  }
  return nas::best_of_k(values, k, trials, rng);
}

}  // namespace nasrl::harness
