#include "nasrl/harness/experiment.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "nasrl/errors.hpp"

namespace nasrl::harness {

using nlohmann::json;
using supernet::Architecture;

std::vector<nas::ProxyScore> run_method(const ExperimentConfig& config,
                                        const supernet::SearchSpace& space, std::uint64_t seed) {
  const auto env = make_env(config);
  if (config.method == "enas") return nas::enas_search(space, *env, config.ppo, config.nas, seed).ranking;
  if (config.method == "spos") {
    supernet::SharedWeights weights(space, derive_seed(seed, 1));
    ppo::PpoConfig fit = config.ppo;
    fit.total_timesteps = config.nas.total_timesteps;
    nas::spos_fit(weights, *env, fit, derive_seed(seed, 2));
    return nas::spos_select(weights, *env, config.nas.eval_episodes, config.nas.eval_seed);
  }
  if (config.method == "random") {
    Rng rng(derive_seed(seed, 0x7a));
    const auto picks = nas::random_select(space, config.k, rng);
    std::vector<nas::ProxyScore> out;
    for (std::size_t i = 0; i < picks.size(); ++i)
      out.push_back({picks[i], double(picks.size() - i), "random"});
    return out;
  }
  throw ConfigError("unknown method '" + config.method + "'");
}

namespace {

json summary_json(const nas::Summary& s) { return json{{"mean", s.mean}, {"std", s.std}}; }

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const BenchTable* table,
                                std::ostream* log) {
  config.validate();
  const auto space = resolve_space(config);
  if (table && table->digest() != table_digest(config))
    throw ConfigError("bench table digest " + table->digest() + " does not match the config (" +
                      table_digest(config) + ")");
  ExperimentResult result;
  std::map<Architecture, nas::TruePerformance> trained;
  auto truth = [&](const Architecture& a) {
    if (table)
      if (auto p = table->lookup(a)) {
        ++result.table_hits;
        return *p;
      }
    ++result.trained;
    auto it = trained.find(a);
    if (it == trained.end()) {
      if (log) *log << "training " << a.id() << " from scratch\n";
      const auto t = train_from_scratch(config, space, a);
      it = trained.emplace(a, nas::TruePerformance{t.record.reward_mean, t.record.total_reward, false})
               .first;
    }
    return it->second;
  };
  auto rank = [&](std::uint64_t seed) {
    if (log) *log << config.method << " search, seed " << seed << "\n";
    return run_method(config, space, seed);
  };
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < config.seeds; ++i) seeds.push_back(search_seed(config, i));
  result.topk = nas::topk_protocol(config.method, space, rank, truth, config.k, seeds);

  if (config.method == "random" && table && table->missing(space).empty()) {
    Rng rng(derive_seed(config.seed, 0xb0c));
    result.best_of_k_reward_mean =
        best_of_k_distribution(*table, space, config.k, config.random_trials, rng, false);
    result.best_of_k_total_reward =
        best_of_k_distribution(*table, space, config.k, config.random_trials, rng, true);
  }

  json& r = result.report;
  r = nas::to_json(result.topk);
  r["space"] = space.name;
  r["env"] = config.env;
  r["config_digest"] = config_digest(config);
  r["table_digest"] = table_digest(config);
  r["seed"] = config.seed;
  r["candidates"] = {{"table_hits", result.table_hits}, {"trained", result.trained}};
  if (result.best_of_k_reward_mean)
    r["best_of_k"] = {{"trials", config.random_trials},
                      {"reward_mean", summary_json(*result.best_of_k_reward_mean)},
                      {"total_reward", summary_json(*result.best_of_k_total_reward)}};
  return result;
}

SummaryRow summary_row(const json& report) {
  SummaryRow row;
  row.label = report.at("method").get<std::string>();
  std::vector<double> rm, tr;
  for (const auto& s : report.at("seeds")) {
    rm.push_back(s.at("reward_mean").get<double>());
    tr.push_back(s.at("total_reward").get<double>());
  }
  row.seeds = rm.size();
  row.reward_mean = nas::summarize(rm);
  row.total_reward = nas::summarize(tr);
  return row;
}

std::vector<SummaryRow> summary_rows(const json& report) {
  std::vector<SummaryRow> rows{summary_row(report)};
  if (report.contains("best_of_k")) {
    const auto& b = report.at("best_of_k");
    SummaryRow row;
    row.label = "random (best of " + std::to_string(report.at("k").get<std::size_t>()) + ", " +
                std::to_string(b.at("trials").get<std::size_t>()) + " trials)";
    row.seeds = b.at("trials").get<std::size_t>();
    row.reward_mean = {b.at("reward_mean").at("mean").get<double>(),
                       b.at("reward_mean").at("std").get<double>()};
    row.total_reward = {b.at("total_reward").at("mean").get<double>(),
                        b.at("total_reward").at("std").get<double>()};
    rows.push_back(row);
  }
  return rows;
}

namespace {

std::string fixed(double x) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << x;
  return s.str();
}

}  // namespace

std::string render_summary_table(const std::vector<SummaryRow>& rows) {
  std::ostringstream out;
  out << "| method | runs | reward mean | total reward |\n";
  out << "|---|---|---|---|\n";
  for (const auto& r : rows)
    out << "| " << r.label << " | " << r.seeds << " | " << fixed(r.reward_mean.mean) << " ± "
        << fixed(r.reward_mean.std) << " | " << fixed(r.total_reward.mean) << " ± "
        << fixed(r.total_reward.std) << " |\n";
  return out.str();
}

std::vector<std::string> write_report_files(const ExperimentConfig& config,
                                            const ExperimentResult& result) {
  std::filesystem::create_directories(config.out_dir);
  const auto dir = std::filesystem::path(config.out_dir);
  const std::string report_path = (dir / (config.method + "_report.json")).string();
  const std::string summary_path = (dir / (config.method + "_summary.md")).string();
  std::ofstream(report_path, std::ios::binary) << result.report.dump(2) << "\n";
  std::ofstream(summary_path, std::ios::binary) << render_summary_table(summary_rows(result.report));
  return {report_path, summary_path};
}

std::string format_double(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

std::vector<HistogramRow> histogram_rows(const BenchTable& table,
                                         const supernet::SearchSpace& space,
                                         const std::vector<Architecture>& found) {
  if (table.records().empty()) throw ConfigError("histogram: the bench table is empty");
  for (const auto& f : found) {
    supernet::validate_architecture(space, f);
    if (!table.lookup(f))
      throw ConfigError("histogram: found architecture " + f.id() + " is not in the bench table");
  }
  std::vector<HistogramRow> rows;
  for (const auto& a : supernet::enumerate(space)) {
    const auto p = table.lookup(a);
    if (!p) continue;
    std::string choices;
    for (auto k : supernet::kernels_of(space, a))
      choices += (choices.empty() ? "" : " ") + std::to_string(k);
    const bool is_found = std::find(found.begin(), found.end(), a) != found.end();
    rows.push_back({a.id(), choices, p->reward_mean, p->total_reward, is_found});
  }
  return rows;
}

void write_histogram_csv(std::ostream& out, const std::vector<HistogramRow>& rows) {
  out << "architecture_id,choices,reward_mean,total_reward,is_found\n";
  for (const auto& r : rows)
    out << r.architecture_id << ',' << r.choices << ',' << format_double(r.reward_mean) << ','
        << format_double(r.total_reward) << ',' << (r.is_found ? 1 : 0) << '\n';
}

std::vector<HistogramRow> read_histogram_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "architecture_id,choices,reward_mean,total_reward,is_found")
    throw ConfigError("histogram CSV: unexpected header");
  std::vector<HistogramRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 5) throw ConfigError("histogram CSV: malformed line '" + line + "'");
    HistogramRow r;
    r.architecture_id = f[0];
    r.choices = f[1];
    std::from_chars(f[2].data(), f[2].data() + f[2].size(), r.reward_mean);
    std::from_chars(f[3].data(), f[3].data() + f[3].size(), r.total_reward);
    r.is_found = f[4] == "1";
    rows.push_back(r);
  }
  return rows;
}

}  // namespace nasrl::harness
