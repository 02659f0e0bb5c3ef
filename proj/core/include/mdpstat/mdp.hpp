#pragma once

#include <vector>

#include <Eigen/Core>

#include "mdpstat/errors.hpp"
#include "mdpstat/rng.hpp"

namespace mdpstat {

/// Flat index of the pair (s,a).  Everything in the library, including file
/// formats, uses this 0-based row-major rule.
inline int pair_index(int s, int a, int m_a) { return s * m_a + a; }

enum class DistFamily { Deterministic, Gaussian, BernoulliScaled };

/// Reward or cost distribution for one state-action pair.  Only the mean and
/// variance enter the asymptotic formulas; the family is used for sampling.
struct ScalarDistribution {
  DistFamily family = DistFamily::Deterministic;
  double mean = 0.0;
  double variance = 0.0;
  // BernoulliScaled draws `scale` with probability `prob`, else 0.
  double scale = 0.0;
  double prob = 0.0;

  static ScalarDistribution deterministic(double value);
  static ScalarDistribution gaussian(double mean, double variance);
  static ScalarDistribution bernoulli_scaled(double scale, double prob);

  double sample(RngStream& rng) const;
};

/// Finite discounted MDP with m_s states and m_a actions per state.
/// Transition rows and reward entries are indexed by pair_index(s, a, m_a);
/// transition(k, s') is the probability of landing in s'.
struct TabularMdp {
  int m_s = 0;
  int m_a = 0;
  double gamma = 0.0;
  std::vector<ScalarDistribution> reward;  // n_pairs() entries
  Eigen::MatrixXd transition;              // n_pairs() x m_s
  Eigen::VectorXd rho;                     // initial distribution, m_s

  int n_pairs() const { return m_s * m_a; }

  /// Throws ModelError unless shapes agree, gamma is in (0,1), variances are
  /// nonnegative, transition rows sum to one within 1e-12, and rho is a
  /// distribution.
  void validate() const;

  Eigen::VectorXd reward_means() const;
  Eigen::VectorXd reward_variances() const;
};

/// Q-value table stored flat; (s,a) lives at pair_index(s, a, m_a).
struct QTable {
  int m_s = 0;
  int m_a = 0;
  Eigen::VectorXd values;

  QTable() = default;
  QTable(int m_s_, int m_a_)
      : m_s(m_s_), m_a(m_a_), values(Eigen::VectorXd::Zero(m_s_ * m_a_)) {}

  double operator()(int s, int a) const { return values[s * m_a + a]; }
  double& operator()(int s, int a) { return values[s * m_a + a]; }

  /// V(s) = max_a Q(s,a).
  Eigen::VectorXd state_max() const;
  /// Lowest-index maximizing action in state s.
  int best_action(int s) const;
};

/// Stationary stochastic policy; probs(s,a) = probability of a in s.
struct Policy {
  Eigen::MatrixXd probs;

  static Policy uniform(int m_s, int m_a);
  static Policy deterministic(const std::vector<int>& actions, int m_a);

  int m_s() const { return static_cast<int>(probs.rows()); }
  int m_a() const { return static_cast<int>(probs.cols()); }
  void validate() const;
  int sample(int s, RngStream& rng) const;
};

enum class ValueRole { Optimal, PolicyValue, PolicyCost, Approximate };

/// State-value vector tagged with what it is the value of.
struct ValueVector {
  Eigen::VectorXd values;
  ValueRole role = ValueRole::PolicyValue;
};

struct SolveOptions {
  double tol = 1e-10;
  int max_iter = 200000;
};

/// One optimality backup: out(s,a) = mu(s,a) + gamma * sum_s' P(s'|s,a) max_a' q(s',a').
QTable bellman_apply(const QTable& q, const Eigen::VectorXd& mu,
                     const Eigen::MatrixXd& transition, double gamma);
QTable bellman_apply(const QTable& q, const TabularMdp& model);

/// Optimal Q by value iteration from zero.  The returned table satisfies
/// ||T(Q) - Q||_inf <= tol*(1-gamma)/(2*gamma), which bounds the distance to
/// the true fixed point by tol.  Throws SolverError after max_iter sweeps.
QTable solve_q(const Eigen::VectorXd& mu, const Eigen::MatrixXd& transition,
               double gamma, int m_s, int m_a, const SolveOptions& opts = {});
QTable solve_q(const TabularMdp& model, const SolveOptions& opts = {});

struct GreedyResult {
  Policy policy;
  /// False when some state has a second action within tie_tol of its best.
  bool unique = true;
};

/// Deterministic greedy policy; ties resolved to the lowest action index.
GreedyResult greedy_policy(const QTable& q, double tie_tol = 0.0);

/// Transition matrix of the chain on pairs: row pair_index(s,a) gives the
/// probability of moving to (s',a') = P(s'|s,a) * pi(a'|s').
Eigen::MatrixXd extended_transition(const Eigen::MatrixXd& transition, const Policy& pi);
Eigen::MatrixXd extended_transition(const TabularMdp& model, const Policy& pi);

/// Stationary distribution of a row-stochastic matrix, found by replacing one
/// balance equation with normalization and solving directly.  Throws
/// AssumptionError when the chain has no strictly positive stationary law
/// (singular system or nonpositive entries), i.e. is not irreducible.
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& p);

/// V^pi for an arbitrary per-pair mean channel (rewards, costs, ...):
/// solves (I - gamma*P^pi) v = mu^pi.
Eigen::VectorXd policy_value_means(const Eigen::VectorXd& mu,
                                   const Eigen::MatrixXd& transition, double gamma,
                                   const Policy& pi);
ValueVector policy_value(const TabularMdp& model, const Policy& pi,
                         ValueRole role = ValueRole::PolicyValue);

/// rho-weighted aggregate value.
double chi(const ValueVector& v, const Eigen::VectorXd& rho);

}  // namespace mdpstat
