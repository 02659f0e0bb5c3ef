#include "mdpstat/qocba.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "mdpstat/errors.hpp"
#include "mdpstat/rng.hpp"

namespace mdpstat {

void validate_allocation(const Allocation& alloc, const Eigen::MatrixXd& transition, int m_s,
                         int m_a, double balance_tol) {
  const int n = m_s * m_a;
  if (alloc.w.size() != n) {
    throw ModelError("allocation has wrong length");
  }
  if (alloc.w.minCoeff() < alloc.eta - 1e-12) {
    throw SolverError("allocation violates the floor", alloc.eta - alloc.w.minCoeff(), 0);
  }
  const double mass = alloc.w.sum();
  if (std::abs(mass - 1.0) > 1e-9) {
    throw SolverError("allocation is not normalized", std::abs(mass - 1.0), 0);
  }
  for (int i = 0; i < m_s; ++i) {
    double inflow = 0.0;
    for (int k = 0; k < n; ++k) {
      inflow += alloc.w[k] * transition(k, i);
    }
    double outflow = 0.0;
    for (int j = 0; j < m_a; ++j) {
      outflow += alloc.w[pair_index(i, j, m_a)];
    }
    if (std::abs(outflow - inflow) > balance_tol) {
      throw SolverError("allocation violates the balance equations", std::abs(outflow - inflow),
                        0);
    }
  }
}

Policy policy_from_allocation(const Allocation& alloc, int m_s, int m_a) {
  Eigen::MatrixXd probs(m_s, m_a);
  for (int i = 0; i < m_s; ++i) {
    double total = 0.0;
    for (int j = 0; j < m_a; ++j) {
      total += alloc.w[pair_index(i, j, m_a)];
    }
    if (total <= 0.0) {
      throw ModelError("allocation assigns no mass to a state");
    }
    for (int j = 0; j < m_a; ++j) {
      probs(i, j) = alloc.w[pair_index(i, j, m_a)] / total;
    }
  }
  Policy pi{probs};
  pi.validate();
  return pi;
}

DiscrepancyTable relative_discrepancies(const QTable& q, const Eigen::MatrixXd& sigma) {
  DiscrepancyTable table;
  table.min_h = std::numeric_limits<double>::infinity();
  for (int i = 0; i < q.m_s; ++i) {
    const int best = q.best_action(i);
    const int k_best = pair_index(i, best, q.m_a);
    for (int j = 0; j < q.m_a; ++j) {
      if (j == best) {
        continue;
      }
      const int k = pair_index(i, j, q.m_a);
      const double gap = q(i, best) - q(i, j);
      const double var = sigma(k_best, k_best) + sigma(k, k) - 2.0 * sigma(k_best, k);
      double h;
      if (var <= 0.0) {
        h = std::numeric_limits<double>::infinity();
      } else {
        h = gap * gap / var;
      }
      table.entries.push_back({i, j, h});
      if (h < table.min_h) {
        table.min_h = h;
        table.argmin_state = i;
        table.argmin_action = j;
      }
    }
  }
  return table;
}

CostCoefficients compute_cost_coefficients(const Eigen::MatrixXd& transition,
                                           const Eigen::VectorXd& sigma2_r, double gamma,
                                           const QTable& q, const ValueVector& v_star,
                                           double tie_tol, bool force) {
  const int m_s = q.m_s;
  const int m_a = q.m_a;
  const int n = m_s * m_a;
  const GreedyResult greedy = greedy_policy(q, tie_tol);
  if (!greedy.unique && !force) {
    throw AssumptionError("Assumption 2 violated (argmax not unique)");
  }

  // Per-pair variance of the one-step target: reward noise plus gamma^2 times
  // the variance of V*(S') under the pair's transition row.
  Eigen::VectorXd d(n);
  for (int k = 0; k < n; ++k) {
    const Eigen::VectorXd row = transition.row(k).transpose();
    const double mean = row.dot(v_star.values);
    double second = 0.0;
    for (int s = 0; s < m_s; ++s) {
      second += row[s] * v_star.values[s] * v_star.values[s];
    }
    d[k] = sigma2_r[k] + gamma * gamma * std::max(0.0, second - mean * mean);
  }

  const Eigen::MatrixXd p_tilde = extended_transition(transition, greedy.policy);
  const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n) - gamma * p_tilde;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_t(m.transpose());

  CostCoefficients coeffs;
  coeffs.m_s = m_s;
  coeffs.m_a = m_a;
  coeffs.a_star.resize(m_s);
  for (int i = 0; i < m_s; ++i) {
    coeffs.a_star[i] = q.best_action(i);
  }
  for (int i = 0; i < m_s; ++i) {
    const int k_best = pair_index(i, coeffs.a_star[i], m_a);
    for (int j = 0; j < m_a; ++j) {
      if (j == coeffs.a_star[i]) {
        continue;
      }
      const int k = pair_index(i, j, m_a);
      Eigen::VectorXd diff = Eigen::VectorXd::Zero(n);
      diff[k_best] = 1.0;
      diff[k] = -1.0;
      const Eigen::VectorXd row = lu_t.solve(diff);  // row^T = diff^T (I - gamma P~)^{-1}
      CostCoefficients::Pair pair;
      pair.state = i;
      pair.action = j;
      pair.c = row.array().square() * d.array();
      coeffs.pairs.push_back(std::move(pair));
    }
  }

  // Self-check: the expansion must reproduce the sandwich-form gap variance
  // for arbitrary positive allocations.
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  const Eigen::MatrixXd a_inv = lu.solve(Eigen::MatrixXd::Identity(n, n));
  RngStream check_rng(0xC0FFEE, 0);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd w(n);
    for (int k = 0; k < n; ++k) {
      w[k] = 0.05 + check_rng.uniform();
    }
    w /= w.sum();
    const Eigen::MatrixXd sigma =
        a_inv * (d.array() / w.array()).matrix().asDiagonal() * a_inv.transpose();
    for (const auto& pair : coeffs.pairs) {
      const int k_best = pair_index(pair.state, coeffs.a_star[pair.state], m_a);
      const int k = pair_index(pair.state, pair.action, m_a);
      const double direct =
          sigma(k_best, k_best) + sigma(k, k) - 2.0 * sigma(k_best, k);
      const double expanded = (pair.c.array() / w.array()).sum();
      const double tol = 1e-10 * std::max(1.0, std::abs(direct));
      if (std::abs(direct - expanded) > tol) {
        throw Error("internal check failed: cost expansion disagrees with gap variance");
      }
    }
  }
  return coeffs;
}

namespace {

// Equality constraints of the floored polytope, in epigraph variables
// (w, t): balance rows for all states but the last (their sum is redundant)
// plus the normalization row.
Eigen::MatrixXd polytope_equalities(const Eigen::MatrixXd& transition, int m_s, int m_a) {
  const int n = m_s * m_a;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m_s, n + 1);
  for (int i = 0; i + 1 < m_s; ++i) {
    for (int k = 0; k < n; ++k) {
      a(i, k) = (k / m_a == i ? 1.0 : 0.0) - transition(k, i);
    }
  }
  a.row(m_s - 1).head(n).setOnes();
  return a;
}

double max_cost(const std::vector<Eigen::VectorXd>& costs, const Eigen::VectorXd& w) {
  double worst = 0.0;
  for (const auto& c : costs) {
    worst = std::max(worst, (c.array() / w.array()).sum());
  }
  return worst;
}

}  // namespace

Allocation solve_allocation(const std::vector<Eigen::VectorXd>& cost_vectors,
                            const Eigen::MatrixXd& transition, int m_s, int m_a,
                            const AllocationSolverOptions& opts, AllocationDiagnostics* diag) {
  const int n = m_s * m_a;
  const double eta = opts.eta;
  for (const auto& c : cost_vectors) {
    if (c.size() != n) {
      throw ModelError("cost vector has wrong length");
    }
    if (c.minCoeff() < 0.0) {
      throw ModelError("cost vectors must be nonnegative");
    }
  }

  // Feasible start: stationary distribution of the uniform exploration policy.
  const Policy uniform = Policy::uniform(m_s, m_a);
  Eigen::VectorXd w = stationary_distribution(extended_transition(transition, uniform));
  if (w.minCoeff() <= eta) {
    throw SolverError("uniform-policy start violates the allocation floor; lower eta",
                      eta - w.minCoeff(), 0);
  }

  AllocationDiagnostics local;
  AllocationDiagnostics& dg = diag != nullptr ? *diag : local;
  dg.objective_trace.clear();
  dg.newton_iterations = 0;

  Eigen::VectorXd best_w = w;
  double best_obj = max_cost(cost_vectors, w);
  if (cost_vectors.empty()) {
    dg.objective = 0.0;
    dg.objective_trace.push_back(0.0);
    return Allocation{best_w, eta};
  }

  // Rescale costs to a common O(1) magnitude; a global positive factor does
  // not move the minimizer, and it keeps the Newton system well conditioned.
  const double scale = std::max(best_obj, 1e-300);
  std::vector<Eigen::VectorXd> costs;
  costs.reserve(cost_vectors.size());
  for (const auto& c : cost_vectors) {
    costs.push_back(c / scale);
  }
  const int n_cost = static_cast<int>(costs.size());

  const Eigen::MatrixXd a_eq = polytope_equalities(transition, m_s, m_a);
  const int n_eq = static_cast<int>(a_eq.rows());
  const int dim = n + 1;

  double t = 1.5 * max_cost(costs, w) + 1e-6;
  double tau = 1.0;
  const int n_ineq = n_cost + n;

  for (int outer = 0; outer < opts.max_outer_iter; ++outer) {
    for (int it = 0; it < opts.max_newton_iter; ++it) {
      // Slacks of the epigraph and floor constraints.
      Eigen::VectorXd g(n_cost);
      for (int c = 0; c < n_cost; ++c) {
        g[c] = (costs[c].array() / w.array()).sum();
      }
      const Eigen::VectorXd slack = Eigen::VectorXd::Constant(n_cost, t) - g;
      const Eigen::VectorXd floor_gap = w.array() - eta;

      Eigen::VectorXd grad = Eigen::VectorXd::Zero(dim);
      Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(dim, dim);
      grad[n] = tau;
      for (int c = 0; c < n_cost; ++c) {
        const Eigen::VectorXd ds = costs[c].array() / w.array().square();  // d slack / d w
        grad.head(n) -= ds / slack[c];
        grad[n] -= 1.0 / slack[c];
        Eigen::VectorXd full(dim);
        full.head(n) = ds;
        full[n] = 1.0;
        hess += (full * full.transpose()) / (slack[c] * slack[c]);
        hess.diagonal().head(n) +=
            2.0 * (costs[c].array() / w.array().cube()).matrix() / slack[c];
      }
      grad.head(n) -= floor_gap.cwiseInverse();
      hess.diagonal().head(n) += floor_gap.array().square().inverse().matrix();

      Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(dim + n_eq, dim + n_eq);
      kkt.topLeftCorner(dim, dim) = hess;
      kkt.topRightCorner(dim, n_eq) = a_eq.transpose();
      kkt.bottomLeftCorner(n_eq, dim) = a_eq;
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim + n_eq);
      rhs.head(dim) = -grad;
      const Eigen::VectorXd sol = kkt.partialPivLu().solve(rhs);
      const Eigen::VectorXd dw = sol.head(n);
      const double dt = sol[n];

      const double decrement = -grad.dot(sol.head(dim));
      ++dg.newton_iterations;
      if (!std::isfinite(decrement) || decrement / 2.0 < 1e-10) {
        break;
      }

      // Largest step keeping the floor strictly slack, then backtrack until
      // the epigraph slacks stay positive and the barrier value decreases.
      double alpha = 1.0;
      for (int k = 0; k < n; ++k) {
        if (dw[k] < 0.0) {
          alpha = std::min(alpha, 0.99 * floor_gap[k] / (-dw[k]));
        }
      }
      auto barrier = [&](const Eigen::VectorXd& wv, double tv) {
        double val = tau * tv;
        for (int c = 0; c < n_cost; ++c) {
          const double s = tv - (costs[c].array() / wv.array()).sum();
          if (s <= 0.0) {
            return std::numeric_limits<double>::infinity();
          }
          val -= std::log(s);
        }
        for (int k = 0; k < n; ++k) {
          const double fg = wv[k] - eta;
          if (fg <= 0.0) {
            return std::numeric_limits<double>::infinity();
          }
          val -= std::log(fg);
        }
        return val;
      };
      const double phi0 = barrier(w, t);
      const double slope = grad.dot(sol.head(dim));
      bool moved = false;
      for (int bt = 0; bt < 60; ++bt) {
        const Eigen::VectorXd w_new = w + alpha * dw;
        const double t_new = t + alpha * dt;
        if (barrier(w_new, t_new) <= phi0 + 0.25 * alpha * slope) {
          w = w_new;
          t = t_new;
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!moved) {
        break;
      }
    }

    const double obj = scale * max_cost(costs, w);
    if (obj < best_obj) {
      best_obj = obj;
      best_w = w;
    }
    dg.objective_trace.push_back(best_obj);
    if (static_cast<double>(n_ineq) / tau <= opts.rel_tol * std::max(t, 1e-12)) {
      break;
    }
    tau *= opts.barrier_growth;
  }

  dg.objective = best_obj;
  Allocation alloc{best_w, eta};
  validate_allocation(alloc, transition, m_s, m_a);
  return alloc;
}

Allocation solve_qocba_allocation(const CostCoefficients& coeffs, const QTable& q,
                                  const Eigen::MatrixXd& transition,
                                  const AllocationSolverOptions& opts,
                                  AllocationDiagnostics* diag) {
  std::vector<Eigen::VectorXd> costs;
  costs.reserve(coeffs.pairs.size());
  for (const auto& pair : coeffs.pairs) {
    const double gap = q(pair.state, coeffs.a_star[pair.state]) - q(pair.state, pair.action);
    // A zero gap (broken tie) makes the comparison infinitely hard; floor it
    // so the solver pours frequency there instead of dividing by zero.
    const double g = std::max(gap, 1e-9);
    costs.push_back(pair.c / (g * g));
  }
  return solve_allocation(costs, transition, coeffs.m_s, coeffs.m_a, opts, diag);
}

Allocation solve_chi_allocation(const ModelParams& params, const Eigen::VectorXd& rho,
                                const AllocationSolverOptions& opts,
                                AllocationDiagnostics* diag) {
  const int m_s = params.m_s;
  const int m_a = params.m_a;
  const int n = m_s * m_a;
  const QTable q = solve_q(params.mu_r, params.p, params.gamma, m_s, m_a);
  const GreedyResult greedy = greedy_policy(q);
  if (!greedy.unique) {
    throw AssumptionError("Assumption 2 violated (argmax not unique)");
  }
  const ValueVector v_star{q.state_max(), ValueRole::Optimal};

  // State-to-state resolvent under the optimal policy, applied to rho.
  Eigen::MatrixXd p_star(m_s, m_s);
  std::vector<int> a_star(m_s);
  for (int i = 0; i < m_s; ++i) {
    a_star[i] = q.best_action(i);
    p_star.row(i) = params.p.row(pair_index(i, a_star[i], m_a));
  }
  const Eigen::MatrixXd x = Eigen::MatrixXd::Identity(m_s, m_s) - params.gamma * p_star;
  const Eigen::VectorXd y = x.transpose().partialPivLu().solve(rho);  // y = X^T rho

  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < m_s; ++i) {
    const int k = pair_index(i, a_star[i], m_a);
    const Eigen::VectorXd row = params.p.row(k).transpose();
    const double mean = row.dot(v_star.values);
    double second = 0.0;
    for (int s = 0; s < m_s; ++s) {
      second += row[s] * v_star.values[s] * v_star.values[s];
    }
    const double d_v = std::max(0.0, second - mean * mean);
    c[k] = y[i] * y[i] *
           (params.sigma2_r[k] + params.gamma * params.gamma * d_v);
  }
  return solve_allocation({c}, params.p, m_s, m_a, opts, diag);
}

QocbaResult run_qocba(const TabularMdp& env, const QocbaOptions& opts, std::uint64_t seed,
                      std::uint64_t stream) {
  if (opts.stages < 1) {
    throw ConfigError("stages must be at least 1");
  }
  if (static_cast<int>(opts.batches.size()) != opts.stages) {
    throw ConfigError("need one batch size per stage");
  }
  for (const auto b : opts.batches) {
    if (b <= 0) {
      throw ConfigError("batch sizes must be positive");
    }
  }
  env.validate();

  QocbaResult result{TrajectoryDataset(env.m_s, env.m_a), {}, {}, {}, {}, {}};
  RngStream rng(seed, stream);
  int state = rng.categorical(env.rho);
  Policy pi = opts.pi0.probs.size() > 0 ? opts.pi0 : Policy::uniform(env.m_s, env.m_a);
  std::int64_t last_stage_start = 0;

  for (int stage = 0; stage < opts.stages; ++stage) {
    last_stage_start = result.data.n();
    state = collect_steps(result.data, env, pi, opts.batches[stage], rng, state);
    if (stage + 1 == opts.stages) {
      break;
    }

    const EmpiricalModel est = empirical_model(result.data);
    if (!est.unvisited.empty()) {
      throw UnvisitedError(
          "state-action pairs unvisited after warm-up; grow the first batch or start from a "
          "better-mixing policy",
          est.unvisited);
    }
    const ModelParams params = ModelParams::from_empirical(est, env.gamma);
    Allocation alloc;
    if (opts.chi_objective) {
      alloc = solve_chi_allocation(params, env.rho, opts.solver);
    } else {
      const QTable q = solve_q(params.mu_r, params.p, params.gamma, env.m_s, env.m_a, opts.solve);
      const ValueVector v_star{q.state_max(), ValueRole::Optimal};
      const CostCoefficients coeffs = compute_cost_coefficients(
          params.p, params.sigma2_r, params.gamma, q, v_star, opts.tie_tol, /*force=*/true);
      alloc = solve_qocba_allocation(coeffs, q, params.p, opts.solver);
    }
    pi = policy_from_allocation(alloc, env.m_s, env.m_a);
    result.allocations.push_back(std::move(alloc));
  }

  if (!opts.pool_stages && opts.stages > 1) {
    TrajectoryDataset tail(env.m_s, env.m_a);
    const auto& recs = result.data.records();
    for (std::size_t idx = static_cast<std::size_t>(last_stage_start); idx < recs.size(); ++idx) {
      tail.push(recs[idx]);
    }
    result.model = empirical_model(tail);
  } else {
    result.model = empirical_model(result.data);
  }
  if (!result.model.unvisited.empty()) {
    throw UnvisitedError("estimates contain unvisited state-action pairs",
                         result.model.unvisited);
  }

  CovarianceOptions cov_opts;
  cov_opts.tie_tol = opts.tie_tol;
  cov_opts.force = true;
  cov_opts.solve = opts.solve;
  const ModelParams params = ModelParams::from_empirical(result.model, env.gamma);
  result.report =
      covariance_report(params, env.rho, PluginInfo::from_data(result.model.n), cov_opts);
  result.q_hat = result.report.q;
  result.pi_hat = result.report.pi_star;
  return result;
}

}  // namespace mdpstat
