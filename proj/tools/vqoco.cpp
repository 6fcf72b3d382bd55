// Experiment runner: run / compare / validate.
#include <CLI11.hpp>

#include <iostream>

#include "vqoco/experiment.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kTupleFailure = 2;

int cmd_run(const std::string& config_path, const std::string& out_dir, int jobs, const std::string& filter) {
  vqoco::ExperimentConfig cfg;
  try {
    cfg = vqoco::load_config(config_path);
  } catch (const vqoco::ConfigError& e) {
    std::cerr << config_path << ":\n" << e.what() << '\n';
    return kConfigError;
  }
  std::vector<vqoco::TupleResult> results;
  try {
    results = vqoco::run_experiment(cfg, {jobs, filter});
  } catch (const vqoco::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return kConfigError;
  }
  const std::string dir = out_dir.empty() ? cfg.output_dir : out_dir;
  try {
    vqoco::write_csv(results, dir, cfg.plot_script);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return kTupleFailure;
  }
  int failed = 0;
  std::vector<vqoco::SummaryRow> rows;
  for (const auto& r : results) {
    rows.push_back(vqoco::summarize(r));
    if (!r.ok) {
      ++failed;
      std::cerr << "tuple failed: " << r.algorithm << " T=" << r.horizon << " seed=" << r.seed << ": " << r.error
                << '\n';
    }
  }
  std::cout << vqoco::compare_table(rows);
  std::cout << results.size() << " tuples, " << failed << " failed; output in " << dir << '\n';
  return failed ? kTupleFailure : kOk;
}

int cmd_compare(const std::vector<std::string>& paths) {
  std::vector<vqoco::SummaryRow> rows;
  try {
    for (const auto& p : paths) {
      auto part = vqoco::read_summary(p);
      rows.insert(rows.end(), part.begin(), part.end());
    }
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return kConfigError;
  }
  if (rows.empty()) {
    std::cerr << "no result rows\n";
    return kConfigError;
  }
  std::cout << vqoco::compare_table(rows);
  return kOk;
}

int cmd_validate(const std::string& config_path) {
  try {
    const auto cfg = vqoco::load_config(config_path);
    std::size_t tuples = cfg.algorithms.size() * cfg.horizons.size() * cfg.seeds.size();
    std::cout << config_path << ": ok (" << tuples << " tuples)\n";
    return kOk;
  } catch (const vqoco::ConfigError& e) {
    std::cerr << config_path << ":\n" << e.what() << '\n';
    return kConfigError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online convex optimization with long-term time-varying constraints: experiment runner"};
  app.require_subcommand(1);

  std::string run_config, out_dir, filter;
  int jobs = 0;
  auto* run = app.add_subcommand("run", "Run every (algorithm, horizon, seed) tuple of a config");
  run->add_option("config", run_config, "Config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory (overrides the config)");
  run->add_option("--jobs", jobs, "Worker threads for tuples (0 = OpenMP default)")->check(CLI::NonNegativeNumber);
  run->add_option("--filter", filter, "Run only this algorithm");

  std::vector<std::string> summaries;
  auto* compare = app.add_subcommand("compare", "Aggregate one or more summary.csv files");
  compare->add_option("summaries", summaries, "summary.csv files")->required()->check(CLI::ExistingFile);

  std::string validate_config;
  auto* validate = app.add_subcommand("validate", "Parse and validate a config without running it");
  validate->add_option("config", validate_config, "Config file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  if (*run) return cmd_run(run_config, out_dir, jobs, filter);
  if (*compare) return cmd_compare(summaries);
  return cmd_validate(validate_config);
}
