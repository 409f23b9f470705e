#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "nasrl/harness/config.hpp"
#include "nasrl/nas/search.hpp"

namespace nasrl::harness {

// From-scratch result of one architecture under one training seed.
struct BenchRecord {
  supernet::Architecture architecture;
  std::uint64_t seed = 0;
  double reward_mean = 0.0;   // mean return of the last 100 training episodes
  double total_reward = 0.0;  // mean return over the frozen-policy evaluation
  std::size_t timesteps = 0;
  std::string digest;
};

nlohmann::json to_json(const BenchRecord& r);
BenchRecord bench_record_from_json(const nlohmann::json& j);

// The tabular benchmark, stored as one JSON object per line. Appending is the
// only mutation, so an interrupted run leaves every finished record intact.
class BenchTable {
 public:
  explicit BenchTable(std::string digest) : digest_(std::move(digest)) {}

  // Reads `path` (a missing file is an empty table). A final line without a
  // newline is the trace of an interrupted write and is ignored. Throws
  // ConfigError when a record carries a different digest.
  static BenchTable load(const std::string& path, const std::string& digest);

  const std::string& digest() const { return digest_; }
  const std::vector<BenchRecord>& records() const { return records_; }
  bool contains(const supernet::Architecture& a, std::uint64_t seed) const;
  std::vector<BenchRecord> records_for(const supernet::Architecture& a) const;
  // Mean over the records of `a`, if any.
  std::optional<nas::TruePerformance> lookup(const supernet::Architecture& a) const;
  std::vector<supernet::Architecture> missing(const supernet::SearchSpace& space) const;

  // Throws ContractError on a duplicate (architecture, seed) or a foreign digest.
  void add(BenchRecord r);
  void write(std::ostream& out) const;
  static void write_record(std::ostream& out, const BenchRecord& r);

 private:
  std::string digest_;
  std::vector<BenchRecord> records_;
  std::map<std::pair<supernet::Architecture, std::uint64_t>, std::size_t> index_;
};

// Training seed of `arch` in the table of `config`; search runs that train a
// candidate from scratch use the same seed, so table hits and fresh training
// agree exactly.
std::uint64_t bench_seed(const ExperimentConfig& config, const supernet::SearchSpace& space,
                         const supernet::Architecture& arch);

struct TrainedArchitecture {
  BenchRecord record;
  double wall_seconds = 0.0;
};

// Trains `arch` from scratch with the PPO config and evaluates the final
// weights over `eval_episodes` episodes.
TrainedArchitecture train_from_scratch(const ExperimentConfig& config,
                                       const supernet::SearchSpace& space,
                                       const supernet::Architecture& arch);

struct BenchSummary {
  BenchTable table;
  std::size_t trained = 0;
  std::size_t skipped = 0;
};

// Trains every architecture of the space that has no record yet, appending to
// the table file (and wall times to `<table>.wall`) in enumeration order.
// Up to `config.parallel` architectures train concurrently.
BenchSummary bench_all(const ExperimentConfig& config, std::ostream* log = nullptr);

// Best-of-K over the table's reward_mean (or total_reward) values. Throws
// ConfigError naming every architecture without a record.
nas::Summary best_of_k_distribution(const BenchTable& table, const supernet::SearchSpace& space,
                                    std::size_t k, std::size_t trials, Rng& rng,
                                    bool total_reward = false);

}  // namespace nasrl::harness
