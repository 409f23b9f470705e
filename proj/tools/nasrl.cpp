#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "nasrl/errors.hpp"
#include "nasrl/harness/experiment.hpp"
#include "nasrl/selftest/suite.hpp"

using namespace nasrl;
using namespace nasrl::harness;

namespace {

constexpr int kUsageError = 2;

struct Overrides {
  std::string config;
  std::optional<std::string> method, space, env, out, table;
  std::optional<std::size_t> seeds, k, parallel;
};

void add_experiment_flags(CLI::App* cmd, Overrides& o, bool with_method) {
  cmd->add_option("--config", o.config, "experiment config (JSON)");
  if (with_method) cmd->add_option("--method", o.method, "enas, spos or random");
  cmd->add_option("--space", o.space, "search-space preset or JSON file");
  cmd->add_option("--env", o.env, "environment preset");
  cmd->add_option("--seeds", o.seeds, "number of search seeds");
  cmd->add_option("--k", o.k, "top-K size");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--table", o.table, "bench table path");
  cmd->add_option("--parallel", o.parallel, "concurrent trainings for bench");
}

ExperimentConfig resolve_config(const Overrides& o) {
  ExperimentConfig c;
  if (!o.config.empty()) {
    if (!std::filesystem::exists(o.config))
      throw ConfigError("config file not found: " + o.config);
    c = load_experiment_config(o.config);
  }
  if (o.method) c.method = *o.method;
  if (o.space) c.space = *o.space;
  if (o.env) c.env = *o.env;
  if (o.out) c.out_dir = *o.out;
  if (o.table) c.table = *o.table;
  if (o.seeds) c.seeds = *o.seeds;
  if (o.k) c.k = *o.k;
  if (o.parallel) c.parallel = *o.parallel;
  if (const char* s = std::getenv("NASRL_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s, &end, 10);
    if (*s == '\0' || *end != '\0') throw ConfigError(std::string("NASRL_SEED is not an integer: ") + s);
    c.seed = v;
  }
  c.validate();
  std::cerr << "config digest " << config_digest(c) << " table digest " << table_digest(c)
            << " seed " << c.seed << "\n";
  return c;
}

int cmd_bench(const Overrides& o) {
  const auto cfg = resolve_config(o);
  const auto s = bench_all(cfg, &std::cerr);
  std::cout << "bench table " << cfg.table_path() << ": " << s.table.records().size()
            << " records (" << s.trained << " trained, " << s.skipped << " already present)\n";
  return 0;
}

int cmd_search(const Overrides& o) {
  const auto cfg = resolve_config(o);
  std::optional<BenchTable> table;
  if (std::filesystem::exists(cfg.table_path()))
    table = BenchTable::load(cfg.table_path(), table_digest(cfg));
  const auto result = run_experiment(cfg, table ? &*table : nullptr, &std::cerr);
  for (const auto& p : write_report_files(cfg, result)) std::cerr << "wrote " << p << "\n";
  std::cout << render_summary_table(summary_rows(result.report));
  return 0;
}

int cmd_report(const std::string& dir) {
  std::vector<std::filesystem::path> reports;
  if (!std::filesystem::is_directory(dir)) throw ConfigError("report directory not found: " + dir);
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().filename().string().ends_with("_report.json")) reports.push_back(e.path());
  if (reports.empty()) throw ConfigError("no *_report.json files in " + dir);
  std::sort(reports.begin(), reports.end());
  std::vector<SummaryRow> rows;
  int status = 0;
  for (const auto& p : reports) {
    std::ifstream in(p);
    const auto j = nlohmann::json::parse(in);
    const auto row_set = summary_rows(j);
    const auto& stored = j.at("summary");
    const auto& r = row_set.front();
    const double drift =
        std::max({std::abs(r.reward_mean.mean - stored.at("reward_mean").at("mean").get<double>()),
                  std::abs(r.reward_mean.std - stored.at("reward_mean").at("std").get<double>()),
                  std::abs(r.total_reward.mean - stored.at("total_reward").at("mean").get<double>()),
                  std::abs(r.total_reward.std - stored.at("total_reward").at("std").get<double>())});
    if (drift > 1e-12) {
      std::cerr << p.string() << ": stored aggregate differs from the per-seed rows by " << drift << "\n";
      status = 1;
    }
    rows.insert(rows.end(), row_set.begin(), row_set.end());
  }
  const std::string table = render_summary_table(rows);
  std::ofstream((std::filesystem::path(dir) / "summary.md").string(), std::ios::binary) << table;
  std::cout << table;
  return status;
}

int cmd_export(const Overrides& o, const std::vector<std::string>& found_ids,
               const std::vector<std::string>& report_paths, const std::string& csv_path) {
  const auto cfg = resolve_config(o);
  const auto space = resolve_space(cfg);
  const auto table = BenchTable::load(cfg.table_path(), table_digest(cfg));
  std::vector<supernet::Architecture> found;
  for (const auto& id : found_ids) found.push_back(supernet::Architecture::parse(id));
  for (const auto& path : report_paths) {
    std::ifstream in(path);
    if (!in) throw ConfigError("report not found: " + path);
    for (const auto& s : nlohmann::json::parse(in).at("seeds"))
      found.push_back(supernet::Architecture::parse(s.at("winner").get<std::string>()));
  }
  const auto rows = histogram_rows(table, space, found);
  const std::string out =
      csv_path.empty() ? (std::filesystem::path(cfg.out_dir) / "histogram.csv").string() : csv_path;
  const auto parent = std::filesystem::path(out).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream f(out, std::ios::binary);
  write_histogram_csv(f, rows);
  std::cout << "wrote " << rows.size() << " rows to " << out << "\n";
  return 0;
}

int cmd_selftest() {
  const auto checks = selftest::run_selftest(std::cout);
  for (const auto& c : checks)
    if (!c.passed) return 1;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Architecture search for PPO agents on grid games"};
  app.require_subcommand(1);

  Overrides bench_o, search_o, export_o;
  auto* bench = app.add_subcommand("bench", "train every architecture from scratch into the bench table");
  add_experiment_flags(bench, bench_o, false);
  auto* search = app.add_subcommand("search", "run the top-K protocol with a search method");
  add_experiment_flags(search, search_o, true);
  std::string report_dir = "out";
  auto* report = app.add_subcommand("report", "collect the method summaries of an output directory");
  report->add_option("--out", report_dir, "directory holding *_report.json files");
  std::vector<std::string> found, from_reports;
  std::string csv;
  auto* exp = app.add_subcommand("export", "write the reward histogram CSV of a bench table");
  add_experiment_flags(exp, export_o, false);
  exp->add_option("--found", found, "architecture id to mark (repeatable)");
  exp->add_option("--report", from_reports, "mark the winners of a search report (repeatable)");
  exp->add_option("--csv", csv, "CSV path (default <out>/histogram.csv)");
  auto* self = app.add_subcommand("selftest", "gradient checks and oracle comparisons");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return kUsageError;
  }

  try {
    if (*bench) return cmd_bench(bench_o);
    if (*search) return cmd_search(search_o);
    if (*report) return cmd_report(report_dir);
    if (*exp) return cmd_export(export_o, found, from_reports, csv);
    if (*self) return cmd_selftest();
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
