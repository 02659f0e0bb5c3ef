#include "mdpstat/constrained.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "mdpstat/errors.hpp"

namespace mdpstat {

void ConstrainedMdp::validate() const {
  base.validate();
  const int n = base.m_s * base.m_a;
  if (static_cast<int>(cost.size()) != n) {
    throw ModelError("cost table has wrong length");
  }
  for (const auto& c : cost) {
    if (c.variance < 0.0) {
      throw ModelError("cost variance must be nonnegative");
    }
  }
}

Eigen::VectorXd ConstrainedMdp::cost_means() const {
  Eigen::VectorXd mu(cost.size());
  for (std::size_t k = 0; k < cost.size(); ++k) {
    mu[static_cast<int>(k)] = cost[k].mean;
  }
  return mu;
}

Eigen::VectorXd ConstrainedMdp::cost_variances() const {
  Eigen::VectorXd var(cost.size());
  for (std::size_t k = 0; k < cost.size(); ++k) {
    var[static_cast<int>(k)] = cost[k].variance;
  }
  return var;
}

OccupancySolution occupancy_lp(const ConstrainedMdp& cm) {
  cm.validate();
  const int m_s = cm.base.m_s;
  const int m_a = cm.base.m_a;
  const int n = m_s * m_a;
  const double gamma = cm.base.gamma;

  LpProblem lp;
  lp.maximize = true;
  lp.c = cm.base.reward_means();
  lp.a_eq = Eigen::MatrixXd::Zero(m_s, n);
  lp.b_eq = cm.base.rho;
  for (int s = 0; s < m_s; ++s) {
    for (int k = 0; k < n; ++k) {
      const double out = (k / m_a == s) ? 1.0 : 0.0;
      lp.a_eq(s, k) = out - gamma * cm.base.transition(k, s);
    }
  }
  const bool has_budget = std::isfinite(cm.budget);
  if (has_budget) {
    lp.a_ub = cm.cost_means().transpose();
    lp.b_ub = Eigen::VectorXd::Constant(1, cm.budget);
  }

  LpSolution sol;
  try {
    sol = solve_lp(lp);
  } catch (const LpInfeasibleError&) {
    throw LpInfeasibleError("no feasible policy");
  }

  // The balance rows force the total occupancy mass to 1/(1-gamma).
  const double mass = sol.x.sum();
  if (std::abs(mass - 1.0 / (1.0 - gamma)) > 1e-7 * (1.0 / (1.0 - gamma))) {
    throw SolverError("occupancy mass identity violated",
                      std::abs(mass - 1.0 / (1.0 - gamma)), 0);
  }

  OccupancySolution out;
  out.x = sol.x;
  out.basis = sol.basis;
  out.objective = sol.objective;
  out.binding =
      has_budget && std::abs(cm.cost_means().dot(sol.x) - cm.budget) <= 1e-8;
  return out;
}

SplitPolicy split_policy_from_occupancy(const OccupancySolution& sol, int m_s, int m_a,
                                        double zero_tol) {
  if (sol.x.size() != m_s * m_a) {
    throw ModelError("occupancy vector has wrong length");
  }
  SplitPolicy split;
  split.policy.probs = Eigen::MatrixXd::Zero(m_s, m_a);
  int randomized_states = 0;
  for (int s = 0; s < m_s; ++s) {
    double total = 0.0;
    for (int a = 0; a < m_a; ++a) {
      total += std::max(0.0, sol.x[pair_index(s, a, m_a)]);
    }
    if (total <= zero_tol) {
      // State carries no occupancy mass; the policy there is immaterial.
      split.policy.probs(s, 0) = 1.0;
      continue;
    }
    std::vector<int> support;
    for (int a = 0; a < m_a; ++a) {
      if (sol.x[pair_index(s, a, m_a)] / total > zero_tol) {
        support.push_back(a);
      }
    }
    if (support.size() > 2) {
      throw DegeneracyError("degenerate LP, Thm 3 assumptions violated");
    }
    if (support.size() == 2) {
      ++randomized_states;
      if (randomized_states > 1) {
        throw DegeneracyError("degenerate LP, Thm 3 assumptions violated");
      }
      split.s_r = s;
      split.a1 = support[0];
      split.a2 = support[1];
      split.alpha = sol.x[pair_index(s, split.a1, m_a)] / total;
      split.policy.probs(s, split.a1) = split.alpha;
      split.policy.probs(s, split.a2) = 1.0 - split.alpha;
    } else {
      split.policy.probs(s, support[0]) = 1.0;
    }
  }
  split.policy.validate();
  return split;
}

CostMoments empirical_costs(const TrajectoryDataset& data) {
  const int n = data.m_s() * data.m_a();
  CostMoments out;
  out.mu_c_hat = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
  out.sigma2_c_hat = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
  for (int k = 0; k < n; ++k) {
    const auto count = data.visit_count(k);
    if (count == 0) {
      continue;
    }
    const double mean = data.cost_sum(k) / static_cast<double>(count);
    out.mu_c_hat[k] = mean;
    out.sigma2_c_hat[k] =
        std::max(0.0, data.cost_sumsq(k) / static_cast<double>(count) - mean * mean);
  }
  return out;
}

ConstrainedParams ConstrainedParams::from_model(const ConstrainedMdp& cm,
                                                const Eigen::VectorXd& w) {
  cm.validate();
  ConstrainedParams params;
  params.m_s = cm.base.m_s;
  params.m_a = cm.base.m_a;
  params.gamma = cm.base.gamma;
  params.mu_r = cm.base.reward_means();
  params.sigma2_r = cm.base.reward_variances();
  params.mu_c = cm.cost_means();
  params.sigma2_c = cm.cost_variances();
  params.p = cm.base.transition;
  params.w = w;
  params.rho = cm.base.rho;
  params.budget = cm.budget;
  return params;
}

ConstrainedParams ConstrainedParams::from_empirical(const EmpiricalModel& est,
                                                    const CostMoments& costs, double gamma,
                                                    const Eigen::VectorXd& rho, double budget) {
  if (!est.unvisited.empty()) {
    throw UnvisitedError("estimates contain unvisited state-action pairs", est.unvisited);
  }
  ConstrainedParams params;
  params.m_s = est.m_s;
  params.m_a = est.m_a;
  params.gamma = gamma;
  params.mu_r = est.mu_hat;
  params.sigma2_r = est.sigma2_hat;
  params.mu_c = costs.mu_c_hat;
  params.sigma2_c = costs.sigma2_c_hat;
  params.p = est.p_hat;
  params.w = est.w_hat;
  params.rho = rho;
  params.budget = budget;
  return params;
}

Eigen::MatrixXd constrained_value_covariance(const ConstrainedParams& params,
                                             const SplitPolicy& split) {
  const int m_s = params.m_s;
  const int m_a = params.m_a;
  const int n = m_s * m_a;
  const double gamma = params.gamma;
  if (params.w.minCoeff() <= 0.0) {
    throw AssumptionError(
        "Assumption 3 violated (some state-action pair has nonpositive visit frequency)");
  }

  if (split.s_r < 0) {
    ModelParams reward_only;
    reward_only.m_s = m_s;
    reward_only.m_a = m_a;
    reward_only.gamma = gamma;
    reward_only.mu_r = params.mu_r;
    reward_only.sigma2_r = params.sigma2_r;
    reward_only.p = params.p;
    reward_only.w = params.w;
    return fixed_policy_covariance(reward_only, split.policy);
  }

  const Policy& pi = split.policy;
  const Eigen::VectorXd v = policy_value_means(params.mu_r, params.p, gamma, pi);
  const Eigen::VectorXd l = policy_value_means(params.mu_c, params.p, gamma, pi);

  // State-to-state resolvent under the split policy.
  Eigen::MatrixXd p_pi = Eigen::MatrixXd::Zero(m_s, m_s);
  for (int i = 0; i < m_s; ++i) {
    for (int j = 0; j < m_a; ++j) {
      if (pi.probs(i, j) > 0.0) {
        p_pi.row(i) += pi.probs(i, j) * params.p.row(pair_index(i, j, m_a));
      }
    }
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(Eigen::MatrixXd::Identity(m_s, m_s) - gamma * p_pi);
  const Eigen::MatrixXd x = lu.solve(Eigen::MatrixXd::Identity(m_s, m_s));

  // Sensitivities of the value and the cost to the mixing parameter,
  // supported only at the randomized state.
  const int k1 = pair_index(split.s_r, split.a1, m_a);
  const int k2 = pair_index(split.s_r, split.a2, m_a);
  Eigen::VectorXd q_v = Eigen::VectorXd::Zero(m_s);
  Eigen::VectorXd q_l = Eigen::VectorXd::Zero(m_s);
  const Eigen::VectorXd p_diff = (params.p.row(k1) - params.p.row(k2)).transpose();
  q_v[split.s_r] = params.mu_r[k1] - params.mu_r[k2] + gamma * v.dot(p_diff);
  q_l[split.s_r] = params.mu_c[k1] - params.mu_c[k2] + gamma * l.dot(p_diff);

  const Eigen::VectorXd rho_x = x.transpose() * params.rho;  // (rho^T X)^T
  const double denom = rho_x.dot(q_l);
  if (std::abs(denom) < 1e-10) {
    throw DegeneracyError("mixing sensitivity degenerate");
  }
  const Eigen::VectorXd u = (x * q_v) / denom;

  // Gradient blocks: the value reacts to the reward means through X G and to
  // the transitions through X H_V; the correction channels the cost-side
  // gradient rho^T X [0, G, H_L] through the mixing parameter.
  Eigen::MatrixXd m_r(m_s, n);  // value gradient wrt reward means
  Eigen::MatrixXd m_c(m_s, n);  // correction term wrt cost means
  for (int i = 0; i < m_s; ++i) {
    for (int j = 0; j < m_a; ++j) {
      const int k = pair_index(i, j, m_a);
      m_r.col(k) = x.col(i) * pi.probs(i, j);
      m_c.col(k) = -u * (rho_x[i] * pi.probs(i, j));
    }
  }

  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(m_s, m_s);
  sigma += m_r * (params.sigma2_r.array() / params.w.array()).matrix().asDiagonal() *
           m_r.transpose();
  sigma += m_c * (params.sigma2_c.array() / params.w.array()).matrix().asDiagonal() *
           m_c.transpose();

  // Transition block, one multinomial covariance per pair: the column block
  // of the gradient for pair (i,j) is gamma pi(j|i) (X e_i V^T - u rho_x(i) L^T).
  for (int i = 0; i < m_s; ++i) {
    for (int j = 0; j < m_a; ++j) {
      const int k = pair_index(i, j, m_a);
      const double coeff = gamma * pi.probs(i, j);
      if (coeff == 0.0) {
        continue;
      }
      Eigen::MatrixXd block(m_s, m_s);
      for (int t = 0; t < m_s; ++t) {
        block.col(t) = coeff * (x.col(i) * v[t] - u * (rho_x[i] * l[t]));
      }
      const Eigen::VectorXd p_row = params.p.row(k).transpose();
      const Eigen::MatrixXd cov_p =
          (Eigen::MatrixXd(p_row.asDiagonal()) - p_row * p_row.transpose()) / params.w[k];
      sigma += block * cov_p * block.transpose();
    }
  }
  return 0.5 * (sigma + sigma.transpose());
}

int collect_steps_costed(TrajectoryDataset& data, const ConstrainedMdp& cm, const Policy& pi,
                         std::int64_t steps, RngStream& rng, int state) {
  const int m_a = cm.base.m_a;
  for (std::int64_t t = 0; t < steps; ++t) {
    const int action = pi.sample(state, rng);
    const int k = pair_index(state, action, m_a);
    TransitionRecord rec;
    rec.t = data.n();
    rec.s = state;
    rec.a = action;
    rec.r = cm.base.reward[k].sample(rng);
    rec.cost = cm.cost[k].sample(rng);
    rec.s_next = rng.categorical(cm.base.transition.row(k));
    data.push(rec);
    state = rec.s_next;
  }
  return state;
}

int collect_steps_costed(TrajectoryDataset& data, const ConstrainedMdp& cm, const Policy& pi,
                         std::int64_t steps, RngStream& rng) {
  const int state = rng.categorical(cm.base.rho);
  return collect_steps_costed(data, cm, pi, steps, rng, state);
}

}  // namespace mdpstat
