#include "mdpstat/mdp.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Dense>

namespace mdpstat {

ScalarDistribution ScalarDistribution::deterministic(double value) {
  ScalarDistribution d;
  d.family = DistFamily::Deterministic;
  d.mean = value;
  d.variance = 0.0;
  return d;
}

ScalarDistribution ScalarDistribution::gaussian(double mean, double variance) {
  if (variance < 0.0) throw ModelError("gaussian variance must be nonnegative");
  ScalarDistribution d;
  d.family = DistFamily::Gaussian;
  d.mean = mean;
  d.variance = variance;
  return d;
}

ScalarDistribution ScalarDistribution::bernoulli_scaled(double scale, double prob) {
  if (prob < 0.0 || prob > 1.0) throw ModelError("bernoulli probability must lie in [0,1]");
  ScalarDistribution d;
  d.family = DistFamily::BernoulliScaled;
  d.scale = scale;
  d.prob = prob;
  d.mean = scale * prob;
  d.variance = scale * scale * prob * (1.0 - prob);
  return d;
}

double ScalarDistribution::sample(RngStream& rng) const {
  switch (family) {
    case DistFamily::Deterministic:
      return mean;
    case DistFamily::Gaussian:
      return mean + std::sqrt(variance) * rng.normal();
    case DistFamily::BernoulliScaled:
      return rng.uniform() < prob ? scale : 0.0;
  }
  throw ModelError("unknown distribution family");
}

void TabularMdp::validate() const {
  if (m_s <= 0 || m_a <= 0) throw ModelError("state and action counts must be positive");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ModelError("discount must lie strictly in (0,1)");
  int n = n_pairs();
  if (static_cast<int>(reward.size()) != n)
    throw ModelError("reward table has wrong number of entries");
  if (transition.rows() != n || transition.cols() != m_s)
    throw ModelError("transition matrix has wrong shape");
  if (rho.size() != m_s) throw ModelError("initial distribution has wrong length");
  for (int k = 0; k < n; ++k) {
    if (reward[k].variance < 0.0) throw ModelError("reward variance must be nonnegative");
    double row_sum = transition.row(k).sum();
    if (std::abs(row_sum - 1.0) > 1e-12) {
      std::ostringstream msg;
      msg << "transition row " << k << " sums to " << row_sum;
      throw ModelError(msg.str());
    }
    if (transition.row(k).minCoeff() < 0.0)
      throw ModelError("transition probabilities must be nonnegative");
  }
  if (rho.minCoeff() < 0.0 || std::abs(rho.sum() - 1.0) > 1e-12)
    throw ModelError("initial distribution must be a probability vector");
}

Eigen::VectorXd TabularMdp::reward_means() const {
  Eigen::VectorXd mu(n_pairs());
  for (int k = 0; k < n_pairs(); ++k) mu[k] = reward[k].mean;
  return mu;
}

Eigen::VectorXd TabularMdp::reward_variances() const {
  Eigen::VectorXd v(n_pairs());
  for (int k = 0; k < n_pairs(); ++k) v[k] = reward[k].variance;
  return v;
}

Eigen::VectorXd QTable::state_max() const {
  Eigen::VectorXd v(m_s);
  for (int s = 0; s < m_s; ++s) v[s] = values.segment(s * m_a, m_a).maxCoeff();
  return v;
}

int QTable::best_action(int s) const {
  int best = 0;
  for (int a = 1; a < m_a; ++a)
    if (values[s * m_a + a] > values[s * m_a + best]) best = a;
  return best;
}

Policy Policy::uniform(int m_s, int m_a) {
  Policy pi;
  pi.probs = Eigen::MatrixXd::Constant(m_s, m_a, 1.0 / m_a);
  return pi;
}

Policy Policy::deterministic(const std::vector<int>& actions, int m_a) {
  Policy pi;
  pi.probs = Eigen::MatrixXd::Zero(static_cast<int>(actions.size()), m_a);
  for (int s = 0; s < static_cast<int>(actions.size()); ++s) {
    if (actions[s] < 0 || actions[s] >= m_a) throw ModelError("action index out of range");
    pi.probs(s, actions[s]) = 1.0;
  }
  return pi;
}

void Policy::validate() const {
  if (probs.rows() == 0 || probs.cols() == 0) throw ModelError("empty policy");
  for (int s = 0; s < probs.rows(); ++s) {
    if (probs.row(s).minCoeff() < 0.0) throw ModelError("policy probabilities must be nonnegative");
    if (std::abs(probs.row(s).sum() - 1.0) > 1e-12)
      throw ModelError("policy rows must sum to one");
  }
}

int Policy::sample(int s, RngStream& rng) const {
  Eigen::VectorXd row = probs.row(s);
  return rng.categorical(row);
}

QTable bellman_apply(const QTable& q, const Eigen::VectorXd& mu,
                     const Eigen::MatrixXd& transition, double gamma) {
  QTable out(q.m_s, q.m_a);
  Eigen::VectorXd v = q.state_max();
  out.values = mu + gamma * (transition * v);
  return out;
}

QTable bellman_apply(const QTable& q, const TabularMdp& model) {
  if (q.m_s != model.m_s || q.m_a != model.m_a)
    throw ModelError("Q table shape does not match the model");
  return bellman_apply(q, model.reward_means(), model.transition, model.gamma);
}

QTable solve_q(const Eigen::VectorXd& mu, const Eigen::MatrixXd& transition,
               double gamma, int m_s, int m_a, const SolveOptions& opts) {
  QTable q(m_s, m_a);
  double threshold = opts.tol * (1.0 - gamma) / (2.0 * gamma);
  double residual = 0.0;
  for (int it = 0; it < opts.max_iter; ++it) {
    QTable next = bellman_apply(q, mu, transition, gamma);
    residual = (next.values - q.values).lpNorm<Eigen::Infinity>();
    q = std::move(next);
    if (residual <= threshold) return q;
  }
  throw SolverError("value iteration did not reach tolerance", residual, opts.max_iter);
}

QTable solve_q(const TabularMdp& model, const SolveOptions& opts) {
  return solve_q(model.reward_means(), model.transition, model.gamma, model.m_s, model.m_a,
                 opts);
}

GreedyResult greedy_policy(const QTable& q, double tie_tol) {
  GreedyResult out;
  out.policy.probs = Eigen::MatrixXd::Zero(q.m_s, q.m_a);
  for (int s = 0; s < q.m_s; ++s) {
    int best = q.best_action(s);
    out.policy.probs(s, best) = 1.0;
    for (int a = 0; a < q.m_a; ++a) {
      if (a != best && q(s, best) - q(s, a) <= tie_tol) out.unique = false;
    }
  }
  return out;
}

Eigen::MatrixXd extended_transition(const Eigen::MatrixXd& transition, const Policy& pi) {
  int m_s = pi.m_s();
  int m_a = pi.m_a();
  int n = m_s * m_a;
  if (transition.rows() != n || transition.cols() != m_s)
    throw ModelError("transition matrix shape does not match the policy");
  Eigen::MatrixXd p_tilde(n, n);
  for (int k = 0; k < n; ++k)
    for (int s2 = 0; s2 < m_s; ++s2)
      for (int a2 = 0; a2 < m_a; ++a2)
        p_tilde(k, s2 * m_a + a2) = transition(k, s2) * pi.probs(s2, a2);
  return p_tilde;
}

Eigen::MatrixXd extended_transition(const TabularMdp& model, const Policy& pi) {
  return extended_transition(model.transition, pi);
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& p) {
  int n = static_cast<int>(p.rows());
  if (p.cols() != n) throw ModelError("stationary distribution needs a square matrix");
  // w' P = w', sum w = 1: transpose the balance system and swap the last
  // equation (redundant for a proper stochastic matrix) for normalization.
  Eigen::MatrixXd a = p.transpose() - Eigen::MatrixXd::Identity(n, n);
  a.row(n - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b[n - 1] = 1.0;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible())
    throw AssumptionError("stationary distribution undefined: chain is not irreducible");
  Eigen::VectorXd w = lu.solve(b);
  double residual = (p.transpose() * w - w).lpNorm<Eigen::Infinity>();
  if (w.minCoeff() <= 0.0 || residual > 1e-8)
    throw AssumptionError(
        "stationary distribution is not strictly positive: chain is not irreducible");
  return w;
}

Eigen::VectorXd policy_value_means(const Eigen::VectorXd& mu,
                                   const Eigen::MatrixXd& transition, double gamma,
                                   const Policy& pi) {
  int m_s = pi.m_s();
  int m_a = pi.m_a();
  if (mu.size() != m_s * m_a || transition.rows() != m_s * m_a)
    throw ModelError("channel shape does not match the policy");
  Eigen::VectorXd mu_pi = Eigen::VectorXd::Zero(m_s);
  Eigen::MatrixXd p_pi = Eigen::MatrixXd::Zero(m_s, m_s);
  for (int s = 0; s < m_s; ++s)
    for (int a = 0; a < m_a; ++a) {
      double pr = pi.probs(s, a);
      if (pr == 0.0) continue;
      mu_pi[s] += pr * mu[s * m_a + a];
      p_pi.row(s) += pr * transition.row(s * m_a + a);
    }
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(m_s, m_s) - gamma * p_pi;
  Eigen::VectorXd v = system.partialPivLu().solve(mu_pi);
  double residual = (system * v - mu_pi).lpNorm<Eigen::Infinity>();
  if (residual > 1e-10)
    throw SolverError("policy evaluation system solved poorly", residual, 0);
  return v;
}

ValueVector policy_value(const TabularMdp& model, const Policy& pi, ValueRole role) {
  if (pi.m_s() != model.m_s || pi.m_a() != model.m_a)
    throw ModelError("policy shape does not match the model");
  ValueVector out;
  out.values = policy_value_means(model.reward_means(), model.transition, model.gamma, pi);
  out.role = role;
  return out;
}

double chi(const ValueVector& v, const Eigen::VectorXd& rho) {
  if (v.values.size() != rho.size()) throw ModelError("value and weight lengths differ");
  return v.values.dot(rho);
}

}  // namespace mdpstat
