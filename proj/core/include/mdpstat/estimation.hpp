#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "mdpstat/mdp.hpp"
#include "mdpstat/rng.hpp"

namespace mdpstat {

/// One observed step.  `cost` is only populated when the environment carries
/// a cost channel; plain trajectories leave it at zero.
struct TransitionRecord {
  std::int64_t t = 0;
  int s = 0;
  int a = 0;
  double r = 0.0;
  int s_next = 0;
  double cost = 0.0;
};

/// A trajectory (possibly produced in several stages under different
/// policies) together with the running sufficient statistics used by the
/// estimators.
class TrajectoryDataset {
 public:
  TrajectoryDataset() = default;
  TrajectoryDataset(int m_s, int m_a);

  void push(const TransitionRecord& rec);

  int m_s() const { return m_s_; }
  int m_a() const { return m_a_; }
  std::int64_t n() const { return static_cast<std::int64_t>(records_.size()); }
  const std::vector<TransitionRecord>& records() const { return records_; }

  std::int64_t visit_count(int k) const { return counts_[k]; }
  const Eigen::MatrixXd& transition_counts() const { return trans_counts_; }
  double reward_sum(int k) const { return reward_sum_[k]; }
  double reward_sumsq(int k) const { return reward_sumsq_[k]; }
  double cost_sum(int k) const { return cost_sum_[k]; }
  double cost_sumsq(int k) const { return cost_sumsq_[k]; }

 private:
  int m_s_ = 0;
  int m_a_ = 0;
  std::vector<TransitionRecord> records_;
  std::vector<std::int64_t> counts_;
  Eigen::MatrixXd trans_counts_;  // n_pairs x m_s
  std::vector<double> reward_sum_, reward_sumsq_;
  std::vector<double> cost_sum_, cost_sumsq_;
};

/// Ratio estimators built from one dataset.  Entries for pairs that never
/// appear are NaN (p_hat rows likewise) and listed in `unvisited`; w_hat is
/// zero there.  Variances use the population (1/n) normalization.
struct EmpiricalModel {
  int m_s = 0;
  int m_a = 0;
  std::int64_t n = 0;
  Eigen::VectorXd mu_hat;
  Eigen::VectorXd sigma2_hat;
  Eigen::MatrixXd p_hat;
  Eigen::VectorXd w_hat;
  std::vector<int> unvisited;
};

/// Simulate `steps` further transitions from `state`, appending to `data`.
/// Returns the state the chain ends in.  Every random draw comes from `rng`,
/// so a (seed, stream) pair fully determines the result; the reward draw and
/// the next-state draw are independent.
int collect_steps(TrajectoryDataset& data, const TabularMdp& model, const Policy& pi,
                  std::int64_t steps, RngStream& rng);
int collect_steps(TrajectoryDataset& data, const TabularMdp& model, const Policy& pi,
                  std::int64_t steps, RngStream& rng, int state);

/// Fresh n-step trajectory; the initial state is drawn from the model's rho
/// unless one is given.
TrajectoryDataset collect_trajectory(const TabularMdp& model, const Policy& pi,
                                     std::int64_t n, RngStream& rng,
                                     std::optional<int> initial_state = {});

EmpiricalModel empirical_model(const TrajectoryDataset& data);

/// Covariance of one multinomial cell-indicator row: diag(p) - p p^T.
Eigen::MatrixXd multinomial_cov(const Eigen::Ref<const Eigen::VectorXd>& p);

}  // namespace mdpstat
