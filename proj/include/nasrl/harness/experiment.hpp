#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nasrl/harness/bench_table.hpp"
#include "nasrl/harness/config.hpp"
#include "nasrl/nas/search.hpp"

namespace nasrl::harness {

// Proxy ranking produced by the configured method for one search seed.
std::vector<nas::ProxyScore> run_method(const ExperimentConfig& config,
                                        const supernet::SearchSpace& space,
                                        std::uint64_t seed);

struct ExperimentResult {
  nas::TopKReport topk;
  std::size_t table_hits = 0;
  std::size_t trained = 0;
  // Random baseline over the whole table, when the table is complete.
  std::optional<nas::Summary> best_of_k_reward_mean, best_of_k_total_reward;
  nlohmann::json report;  // the full search report document
};

// Validates the config, runs the top-K protocol over `config.seeds` search
// seeds and builds the report. True performance comes from `table` when it
// has the architecture and from fresh training otherwise.
ExperimentResult run_experiment(const ExperimentConfig& config, const BenchTable* table,
                                std::ostream* log = nullptr);

// Writes <out_dir>/<method>_report.json and <out_dir>/<method>_summary.md;
// returns their paths.
std::vector<std::string> write_report_files(const ExperimentConfig& config,
                                            const ExperimentResult& result);

// One row of the method comparison table, recomputed from the per-seed
// results of a report.
struct SummaryRow {
  std::string label;
  std::size_t seeds = 0;
  nas::Summary reward_mean, total_reward;
};

SummaryRow summary_row(const nlohmann::json& report);
// Rows for every report plus the random best-of-K distribution when present.
std::vector<SummaryRow> summary_rows(const nlohmann::json& report);
std::string render_summary_table(const std::vector<SummaryRow>& rows);

struct HistogramRow {
  std::string architecture_id;
  std::string choices;  // kernel sizes, space separated
  double reward_mean = 0.0;
  double total_reward = 0.0;
  bool is_found = false;
};

// One row per architecture of the table, in enumeration order; rows of
// `found` are marked. Throws ConfigError when a found architecture has no
// record.
std::vector<HistogramRow> histogram_rows(const BenchTable& table,
                                         const supernet::SearchSpace& space,
                                         const std::vector<supernet::Architecture>& found);
void write_histogram_csv(std::ostream& out, const std::vector<HistogramRow>& rows);
std::vector<HistogramRow> read_histogram_csv(std::istream& in);

// Shortest decimal text that parses back to the same double.
std::string format_double(double x);

}  // namespace nasrl::harness
