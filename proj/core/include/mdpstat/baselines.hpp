#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "mdpstat/estimation.hpp"
#include "mdpstat/mdp.hpp"

namespace mdpstat {

/// Stationary two-action policy that picks action 1 with probability p_right
/// in every state.
Policy random_explore_policy(int m_s, double p_right);

/// One epsilon-greedy draw: the greedy action of q at s with probability
/// 1-eps (ties to the lowest index), otherwise uniform.
int eps_greedy_step(const QTable& q, int s, double eps, RngStream& rng);

struct EpsGreedyOptions {
  double eps = 0.1;
  /// Re-solve the plug-in Q this many times, evenly spread over the budget.
  int refreshes = 10;
  SolveOptions solve;
};

/// Runs epsilon-greedy for `steps` transitions, continuing from `state`.
/// The plug-in Q is re-solved on a fixed cadence from the running estimates;
/// pairs never visited enter the plug-in model with zero reward and a
/// uniform transition row (agent-internal imputation only, the returned
/// dataset is untouched).  Returns the final state.
int run_eps_greedy(TrajectoryDataset& data, const TabularMdp& env, const EpsGreedyOptions& opts,
                   std::int64_t steps, RngStream& rng, int state);

/// Conjugate priors for posterior sampling: Dirichlet rows for the
/// transitions, Normal means with known observation variance for rewards.
struct PsrlPrior {
  double dirichlet_weight = 1.0;  // symmetric Dirichlet concentration per entry
  double mean0 = 0.0;             // prior mean of each reward mean
  double var0 = 100.0;            // prior variance of each reward mean
  double obs_var = 1.0;           // known reward observation variance
};

/// Posterior-sampling agent: sample a model, act greedily for an episode,
/// update the posterior from the observed transitions and rewards.
class PsrlAgent {
 public:
  PsrlAgent(int m_s, int m_a, double gamma, const PsrlPrior& prior);

  /// Draws one model from the current posterior.
  TabularMdp sample_model(RngStream& rng) const;

  /// Runs one greedy episode under a fresh posterior sample, records into
  /// data, folds the records into the posterior, and returns the final state.
  int run_episode(TrajectoryDataset& data, const TabularMdp& env, std::int64_t episode_length,
                  RngStream& rng, int state, const SolveOptions& solve = {});

  /// Conjugate update from one observed transition.
  void observe(int s, int a, double r, int s_next);

  const Eigen::MatrixXd& dirichlet() const { return dirichlet_; }

 private:
  int m_s_;
  int m_a_;
  double gamma_;
  PsrlPrior prior_;
  Eigen::MatrixXd dirichlet_;     // n_pairs x m_s posterior concentrations
  Eigen::VectorXd reward_sum_;    // per pair
  Eigen::VectorXd reward_count_;  // per pair
};

}  // namespace mdpstat
