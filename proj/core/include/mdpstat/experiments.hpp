#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mdpstat/baselines.hpp"
#include "mdpstat/mdp.hpp"
#include "mdpstat/qocba.hpp"
#include "mdpstat/riverswim.hpp"

namespace mdpstat {

/// Exploration agent selection for an experiment run.  `label` names the
/// agent in result rows; empty labels get a generated one.
struct AgentConfig {
  std::string type;  // re | eps-greedy | psrl | qocba | qocba-chi | policy
  std::string label;
  double p_right = 0.8;              // re
  double eps = 0.1;                  // eps-greedy
  int refreshes = 10;                // eps-greedy plug-in refresh count
  int episodes = 100;                // psrl
  PsrlPrior prior;                   // psrl
  int stages = 2;                    // qocba
  AllocationSolverOptions solver;    // qocba
  Eigen::MatrixXd probs;             // policy

  std::string display() const;
};

/// First-stage exploration shared by the staged protocols: RE(p_right) for
/// fraction * n steps, after which the agent takes over on the same chain.
struct WarmConfig {
  double fraction = 0.3;
  double p_right = 0.6;
};

struct ExperimentConfig {
  std::string kind;  // solve | coverage | select | ci-length | qocba-run
  RiverSwimSpec river;
  std::string env_path;  // when set, the environment is loaded from this file
  std::int64_t n = 10000;
  int reps = 100;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: MDPSTAT_THREADS env var, then hardware concurrency
  std::string output;
  std::vector<AgentConfig> agents;
  WarmConfig warm;
  bool approx = false;  // coverage through the reduced-information path
  int stride = 0;       // knot stride when approx (alternative to knots)
  std::vector<int> knots;

  static ExperimentConfig load(const std::string& path);
  TabularMdp build_env() const;
  void validate() const;
};

struct ResultRow {
  std::string quantity;
  double estimate = 0.0;
  double half_width = 0.0;
  std::int64_t na_count = 0;
};

/// Experiment output: one row per reported quantity.  Proportion rows carry
/// the binomial half-width 1.96*sqrt(p(1-p)/reps); average rows carry the
/// normal-approximation half-width of the replication mean.  NA replications
/// (unvisited pairs) are excluded from estimates and counted per row.
struct ResultTable {
  std::int64_t replications = 0;
  std::vector<ResultRow> rows;

  /// Header "quantity,estimate,half_width,na_count", floats at 6 significant
  /// digits.  Byte-identical across reruns with the same config and seed.
  std::string to_csv() const;
};

/// Thread count resolution: flag/config value if positive, else the
/// MDPSTAT_THREADS environment variable, else hardware concurrency.
int resolve_threads(int requested);

/// Exact solve of the configured environment: Q, V*, chi*, optimal actions.
ResultTable solve_summary(const ExperimentConfig& cfg);

/// CI coverage of the plug-in asymptotic formulas under a fixed exploration
/// policy, exact or reduced-information path per config.
ResultTable coverage_experiment(const ExperimentConfig& cfg);

/// Probability of correct selection under the two-stage protocol, one row
/// pair per configured agent.
ResultTable correct_selection_experiment(const ExperimentConfig& cfg);

/// Average CI lengths and coverages per agent, aggregate-value objective.
ResultTable ci_length_experiment(const ExperimentConfig& cfg);

/// Single staged exploration run: final allocation, estimates, half-widths.
ResultTable qocba_run(const ExperimentConfig& cfg);

}  // namespace mdpstat
