#include "mdpstat/approx_vi.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "mdpstat/errors.hpp"

namespace mdpstat {

void RepresentativeSet::validate(int m_s) const {
  if (s0.empty()) {
    throw ModelError("representative set is empty");
  }
  for (std::size_t i = 0; i < s0.size(); ++i) {
    if (s0[i] < 0 || s0[i] >= m_s) {
      throw ModelError("representative state out of range");
    }
    if (i > 0 && s0[i] <= s0[i - 1]) {
      throw ModelError("representative states must be strictly increasing");
    }
  }
  if (s0.front() != 0 || s0.back() != m_s - 1) {
    throw ModelError("representative set must contain both boundary states");
  }
}

RepresentativeSet stride_representative_set(int m_s, int stride) {
  if (stride <= 0) {
    throw ModelError("stride must be positive");
  }
  RepresentativeSet set;
  for (int s = 0; s < m_s; s += stride) {
    set.s0.push_back(s);
  }
  if (set.s0.back() != m_s - 1) {
    set.s0.push_back(m_s - 1);
  }
  set.validate(m_s);
  return set;
}

GeneralizationMap interp_jacobian(int m_s, int m_a, const RepresentativeSet& s0) {
  s0.validate(m_s);
  const int n0 = s0.size();
  GeneralizationMap map;
  map.jacobian = Eigen::MatrixXd::Zero(m_s * m_a, n0 * m_a);
  int hi = 0;  // index into s0 of the first knot >= s
  for (int s = 0; s < m_s; ++s) {
    while (s0.s0[hi] < s) {
      ++hi;
    }
    for (int a = 0; a < m_a; ++a) {
      const int row = pair_index(s, a, m_a);
      if (s0.s0[hi] == s) {
        map.jacobian(row, s0.reduced_index(hi, a, m_a)) = 1.0;
      } else {
        const int p = s0.s0[hi - 1];
        const int q = s0.s0[hi];
        const double t = static_cast<double>(s - p) / static_cast<double>(q - p);
        map.jacobian(row, s0.reduced_index(hi - 1, a, m_a)) = 1.0 - t;
        map.jacobian(row, s0.reduced_index(hi, a, m_a)) = t;
      }
    }
  }
  return map;
}

ApproxSolution approx_solve_q(const Eigen::VectorXd& mu, const Eigen::MatrixXd& transition,
                              double gamma, int m_s, int m_a, const RepresentativeSet& s0,
                              const GeneralizationMap& map, const SolveOptions& opts) {
  s0.validate(m_s);
  const int n0 = s0.size() * m_a;
  if (map.jacobian.rows() != m_s * m_a || map.jacobian.cols() != n0) {
    throw ModelError("generalization map has wrong shape");
  }

  // Reduced-space iteration: lift, back up at representative pairs only,
  // restrict.  The composition contracts at rate gamma in max norm because
  // the lift and the restriction are both non-expansive.
  Eigen::VectorXd q0 = Eigen::VectorXd::Zero(n0);
  const double stop = opts.tol * (1.0 - gamma) / (2.0 * gamma);
  ApproxSolution out;
  for (int it = 0; it < opts.max_iter; ++it) {
    const Eigen::VectorXd lifted = map.jacobian * q0;
    Eigen::VectorXd v(m_s);
    for (int s = 0; s < m_s; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < m_a; ++a) {
        best = std::max(best, lifted[pair_index(s, a, m_a)]);
      }
      v[s] = best;
    }
    Eigen::VectorXd q1(n0);
    for (int i = 0; i < s0.size(); ++i) {
      for (int a = 0; a < m_a; ++a) {
        const int k = pair_index(s0.s0[i], a, m_a);
        q1[s0.reduced_index(i, a, m_a)] = mu[k] + gamma * transition.row(k).dot(v);
      }
    }
    const double step = (q1 - q0).cwiseAbs().maxCoeff();
    q0 = q1;
    out.iterations = it + 1;
    out.residual = step;
    if (step <= stop) {
      out.q_s0 = q0;
      out.q = QTable(m_s, m_a);
      out.q.values = map.jacobian * q0;
      return out;
    }
  }
  throw SolverError("approximate value iteration did not converge", out.residual,
                    out.iterations);
}

ModelParams approx_params_from_empirical(const EmpiricalModel& est, double gamma,
                                         const RepresentativeSet& s0) {
  s0.validate(est.m_s);
  std::vector<int> missing;
  for (int i = 0; i < s0.size(); ++i) {
    for (int a = 0; a < est.m_a; ++a) {
      const int k = pair_index(s0.s0[i], a, est.m_a);
      if (!(est.w_hat[k] > 0.0)) {
        missing.push_back(k);
      }
    }
  }
  if (!missing.empty()) {
    throw UnvisitedError("representative state-action pairs unvisited", missing);
  }
  ModelParams params;
  params.m_s = est.m_s;
  params.m_a = est.m_a;
  params.gamma = gamma;
  params.mu_r = est.mu_hat;
  params.sigma2_r = est.sigma2_hat;
  params.p = est.p_hat;
  params.w = est.w_hat;
  return params;
}

Eigen::MatrixXd approx_q_covariance(const ModelParams& params, const RepresentativeSet& s0,
                                    const GeneralizationMap& map,
                                    const CovarianceOptions& opts) {
  const int m_s = params.m_s;
  const int m_a = params.m_a;
  const int n = m_s * m_a;
  const int n0 = s0.size() * m_a;
  s0.validate(m_s);
  if (map.jacobian.rows() != n || map.jacobian.cols() != n0) {
    throw ModelError("generalization map has wrong shape");
  }
  for (int i = 0; i < s0.size(); ++i) {
    for (int a = 0; a < m_a; ++a) {
      if (!(params.w[pair_index(s0.s0[i], a, m_a)] > 0.0)) {
        throw AssumptionError(
            "Assumption 6 violated (some representative pair has nonpositive visit frequency)");
      }
    }
  }

  const ApproxSolution sol =
      approx_solve_q(params.mu_r, params.p, params.gamma, m_s, m_a, s0, map, opts.solve);
  const GreedyResult greedy = greedy_policy(sol.q, opts.tie_tol);
  if (!greedy.unique && !opts.force) {
    throw AssumptionError("Assumption 5 violated (approximate argmax not unique)");
  }
  const Eigen::VectorXd v_m = sol.q.state_max();

  // Representative rows of the pair-chain transition under the greedy policy.
  Eigen::MatrixXd p_s0 = Eigen::MatrixXd::Zero(n0, n);
  for (int i = 0; i < s0.size(); ++i) {
    for (int a = 0; a < m_a; ++a) {
      const int k = pair_index(s0.s0[i], a, m_a);
      const int r = s0.reduced_index(i, a, m_a);
      for (int s_next = 0; s_next < m_s; ++s_next) {
        const double p_next = params.p(k, s_next);
        if (p_next == 0.0) {
          continue;
        }
        for (int a_next = 0; a_next < m_a; ++a_next) {
          p_s0(r, pair_index(s_next, a_next, m_a)) =
              p_next * greedy.policy.probs(s_next, a_next);
        }
      }
    }
  }

  // Per-representative-pair target variance over the visit frequency.
  Eigen::VectorXd d(n0);
  for (int i = 0; i < s0.size(); ++i) {
    for (int a = 0; a < m_a; ++a) {
      const int k = pair_index(s0.s0[i], a, m_a);
      const Eigen::VectorXd row = params.p.row(k).transpose();
      const double mean = row.dot(v_m);
      double second = 0.0;
      for (int s = 0; s < m_s; ++s) {
        second += row[s] * v_m[s] * v_m[s];
      }
      const double d_q = std::max(0.0, second - mean * mean);
      d[s0.reduced_index(i, a, m_a)] =
          (params.sigma2_r[k] + params.gamma * params.gamma * d_q) / params.w[k];
    }
  }

  const Eigen::MatrixXd m =
      Eigen::MatrixXd::Identity(n, n) - params.gamma * (map.jacobian * p_s0);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  const Eigen::MatrixXd aj = lu.solve(map.jacobian);  // (I - gamma J P~)^{-1} J
  const Eigen::MatrixXd sigma = aj * d.asDiagonal() * aj.transpose();
  return 0.5 * (sigma + sigma.transpose());
}

}  // namespace mdpstat
