#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "mdpstat/estimation.hpp"
#include "mdpstat/inference.hpp"
#include "mdpstat/mdp.hpp"
#include "mdpstat/simplex.hpp"

namespace mdpstat {

/// An MDP with a second scalar channel (per-step cost) and a budget on the
/// rho-weighted discounted cost.
struct ConstrainedMdp {
  TabularMdp base;
  std::vector<ScalarDistribution> cost;  // one per pair, flat index s*m_a+a
  double budget = 0.0;

  void validate() const;
  Eigen::VectorXd cost_means() const;
  Eigen::VectorXd cost_variances() const;
};

/// Optimal occupancy measure x(s,a): discounted expected visit mass under the
/// optimal policy, the decision variable of the constrained LP.
struct OccupancySolution {
  Eigen::VectorXd x;
  std::vector<int> basis;
  bool binding = false;  // cost constraint tight at the optimum
  double objective = 0.0;
};

/// Maximizes sum_k mu_R(k) x(k) over occupancy measures subject to the flow
/// balance rows and the budget row.  The objective equals the rho-weighted
/// optimal value of the constrained problem.
OccupancySolution occupancy_lp(const ConstrainedMdp& cm);

/// A policy that is deterministic everywhere except possibly one state s_r,
/// where it mixes two actions: a1 with probability alpha, a2 with 1-alpha.
/// s_r = -1 means fully deterministic.
struct SplitPolicy {
  Policy policy;
  int s_r = -1;
  int a1 = -1;
  int a2 = -1;
  double alpha = 0.0;
};

/// Normalizes the occupancy solution into a policy and identifies the
/// randomized state.  Throws DegeneracyError if more than one state (or more
/// than two actions at one state) carries mass, which falls outside the
/// split-policy structure.
SplitPolicy split_policy_from_occupancy(const OccupancySolution& sol, int m_s, int m_a,
                                        double zero_tol = 1e-10);

/// Sample moments of the cost channel, NaN at unvisited pairs.
struct CostMoments {
  Eigen::VectorXd mu_c_hat;
  Eigen::VectorXd sigma2_c_hat;
};

CostMoments empirical_costs(const TrajectoryDataset& data);

/// Model parameters for constrained-value inference: the reward channel plus
/// the cost channel and the data-collection frequencies.
struct ConstrainedParams {
  int m_s = 0;
  int m_a = 0;
  double gamma = 0.0;
  Eigen::VectorXd mu_r;
  Eigen::VectorXd sigma2_r;
  Eigen::VectorXd mu_c;
  Eigen::VectorXd sigma2_c;
  Eigen::MatrixXd p;
  Eigen::VectorXd w;
  Eigen::VectorXd rho;
  double budget = 0.0;

  static ConstrainedParams from_model(const ConstrainedMdp& cm, const Eigen::VectorXd& w);
  static ConstrainedParams from_empirical(const EmpiricalModel& est, const CostMoments& costs,
                                          double gamma, const Eigen::VectorXd& rho,
                                          double budget);
};

/// Asymptotic covariance of the estimated state values of the constrained
/// optimum.  Deterministic optimum (non-binding budget): the plain
/// fixed-policy covariance.  Split optimum (binding budget): the sandwich
/// with the rank-one correction that accounts for re-calibrating the mixing
/// parameter from the estimated cost channel.
Eigen::MatrixXd constrained_value_covariance(const ConstrainedParams& params,
                                             const SplitPolicy& split);

/// Runs the policy for `steps` transitions, sampling both channels each step
/// (reward draw, then cost draw, then next-state draw).  Continues from
/// `state` and returns the final state.
int collect_steps_costed(TrajectoryDataset& data, const ConstrainedMdp& cm, const Policy& pi,
                         std::int64_t steps, RngStream& rng, int state);

/// Overload drawing the initial state from the base initial distribution.
int collect_steps_costed(TrajectoryDataset& data, const ConstrainedMdp& cm, const Policy& pi,
                         std::int64_t steps, RngStream& rng);

}  // namespace mdpstat
