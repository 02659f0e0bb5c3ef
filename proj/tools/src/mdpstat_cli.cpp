#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mdpstat/errors.hpp"
#include "mdpstat/experiments.hpp"
#include "mdpstat/io.hpp"

namespace {

struct CliOverrides {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int reps = 0;
  int threads = -1;
  std::string output;
};

void add_common(CLI::App* sub, CliOverrides& ov) {
  sub->add_option("-c,--config", ov.config, "experiment config (JSON)")->required();
  sub->add_option("--seed", ov.seed, "override the config seed")
      ->each([&ov](const std::string&) { ov.seed_set = true; });
  sub->add_option("--reps", ov.reps, "override the replication count");
  sub->add_option("--threads", ov.threads, "worker threads (0 = auto)");
  sub->add_option("-o,--output", ov.output, "override the output CSV path");
}

int run(const std::string& kind, const CliOverrides& ov) {
  mdpstat::ExperimentConfig cfg = mdpstat::ExperimentConfig::load(ov.config);
  if (cfg.kind != kind) {
    throw mdpstat::ConfigError("config kind is '" + cfg.kind + "' but the subcommand is '" +
                               kind + "'");
  }
  if (ov.seed_set) {
    cfg.seed = ov.seed;
  }
  if (ov.reps > 0) {
    cfg.reps = ov.reps;
  }
  if (ov.threads >= 0) {
    cfg.threads = ov.threads;
  }
  if (!ov.output.empty()) {
    cfg.output = ov.output;
  }
  cfg.validate();

  mdpstat::ResultTable table;
  if (kind == "solve") {
    table = mdpstat::solve_summary(cfg);
  } else if (kind == "coverage") {
    table = mdpstat::coverage_experiment(cfg);
  } else if (kind == "select") {
    table = mdpstat::correct_selection_experiment(cfg);
  } else if (kind == "ci-length") {
    table = mdpstat::ci_length_experiment(cfg);
  } else {
    table = mdpstat::qocba_run(cfg);
  }

  std::cout << kind << ": n=" << cfg.n;
  if (table.replications > 0) {
    std::cout << ", replications=" << table.replications;
  }
  std::cout << ", seed=" << cfg.seed << "\n";
  for (const auto& row : table.rows) {
    std::cout << "  " << row.quantity << " = " << mdpstat::format_sig6(row.estimate);
    if (row.half_width > 0.0) {
      std::cout << " +/- " << mdpstat::format_sig6(row.half_width);
    }
    if (row.na_count > 0) {
      std::cout << "  (NA " << row.na_count << ")";
    }
    std::cout << "\n";
  }

  if (!cfg.output.empty()) {
    std::ofstream out(cfg.output, std::ios::binary);
    if (!out) {
      throw mdpstat::IoError("cannot write " + cfg.output);
    }
    out << table.to_csv();
    std::cout << "wrote " << cfg.output << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"asymptotic covariance toolkit for tabular MDP estimates"};
  app.require_subcommand(1);

  const std::vector<std::string> kinds = {"solve", "coverage", "select", "ci-length",
                                          "qocba-run"};
  const std::vector<std::string> blurbs = {
      "solve an environment and print its value summary",
      "interval coverage of plug-in estimates under a fixed policy",
      "probability of selecting the optimal policy under each agent",
      "confidence interval length and coverage under each agent",
      "a single staged exploration run with its final allocation"};
  std::vector<CliOverrides> overrides(kinds.size());
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    add_common(app.add_subcommand(kinds[i], blurbs[i]), overrides[i]);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    for (std::size_t i = 0; i < kinds.size(); ++i) {
      if (app.get_subcommand(kinds[i])->parsed()) {
        return run(kinds[i], overrides[i]);
      }
    }
    return 2;
  } catch (const mdpstat::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
