#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "mdpstat/estimation.hpp"
#include "mdpstat/mdp.hpp"

namespace mdpstat {

// The covariance formulas in this module and its consumers rest on numbered
// assumptions, referenced by error messages:
//   1. rewards are bounded with finite variance, and the reward and
//      next-state draws at each step are independent given (s,a);
//   2. the optimal action is unique in every state;
//   3. the exploration chain on state-action pairs has a unique stationary
//      distribution giving every pair positive visit frequency;
//   4. the generalization map is a max-norm non-expansion (approximate path);
//   5. the approximate fixed point has a unique greedy action per state;
//   6. every representative state-action pair has positive visit frequency.

/// Plug-in inputs for the asymptotic formulas: per-pair reward means and
/// variances, transition rows, long-run visit frequencies, and the discount.
/// Built either from a ground-truth model or from an EmpiricalModel.
struct ModelParams {
  int m_s = 0;
  int m_a = 0;
  double gamma = 0.0;
  Eigen::VectorXd mu_r;
  Eigen::VectorXd sigma2_r;
  Eigen::MatrixXd p;  // n_pairs x m_s
  Eigen::VectorXd w;

  static ModelParams from_model(const TabularMdp& model, const Eigen::VectorXd& w);
  /// Throws UnvisitedError when the estimate has unvisited pairs: the
  /// covariance formulas refuse to impute.
  static ModelParams from_empirical(const EmpiricalModel& est, double gamma);

  int n_pairs() const { return m_s * m_a; }
  void check_shapes() const;
};

struct CovarianceOptions {
  double tie_tol = 1e-9;
  /// Proceed past a non-unique argmax (Assumption 2) instead of throwing.
  bool force = false;
  SolveOptions solve;
};

/// Which inputs were plugged in, and the sample size behind them.
struct PluginInfo {
  bool empirical = false;
  std::int64_t n = 0;

  static PluginInfo exact() { return {false, 0}; }
  static PluginInfo from_data(std::int64_t n) { return {true, n}; }
};

struct QCovariance {
  Eigen::MatrixXd sigma;  // N x N asymptotic covariance of sqrt(n)(Q_hat - Q)
  QTable q;
  ValueVector v_star;
  Policy pi_star;
  bool argmax_unique = true;
};

/// Asymptotic covariance of the plug-in optimal Q-table:
///   Sigma = (I - gamma P~)^{-1} W^{-1} (D_R + D_Q) (I - gamma P~)^{-T}
/// where P~ is the extended transition under the greedy policy, W holds the
/// visit frequencies, D_R the reward variances, and D_Q(k) is gamma^2 times
/// the variance of V*(S') under transition row k.
QCovariance q_covariance(const ModelParams& params, const CovarianceOptions& opts = {});

struct VCovariance {
  Eigen::MatrixXd sigma_v;  // m_s x m_s
  double sigma_chi = 0.0;
};

/// Covariance of the optimal value estimate (restriction of q_covariance to
/// the optimal actions) and of its rho-weighted aggregate.
VCovariance v_covariance(const ModelParams& params, const Eigen::VectorXd& rho,
                         const CovarianceOptions& opts = {});

/// Covariance of the value estimate of a fixed stochastic policy:
///   Sigma = X' W' X'^T, X' = (I - gamma P^pi)^{-1},
///   W'(i,i) = sum_j pi(j|i)^2 / w(i,j) * [(gamma V)^T Cov_P (gamma V) + sigma2_R(i,j)].
Eigen::MatrixXd fixed_policy_covariance(const ModelParams& params, const Policy& pi);

/// Variance of the estimated gap Q(s,a1) - Q(s,a2) read off Sigma.
double delta_q_variance(const Eigen::MatrixXd& sigma, int m_a, int s, int a1, int a2);

struct ConfidenceInterval {
  double center = 0.0;
  double half_width = 0.0;
  double alpha = 0.0;

  double lower() const { return center - half_width; }
  double upper() const { return center + half_width; }
  bool contains(double x) const { return x >= lower() && x <= upper(); }
};

/// Two-sided CI from an asymptotic variance: center ± z * sqrt(asym_var/n),
/// z the (1-alpha/2) normal quantile.
ConfidenceInterval confidence_interval(double point, double asym_var, std::int64_t n,
                                       double alpha);

/// Inverse standard-normal CDF (rational approximation, relative error below
/// 1.2e-9 everywhere on (0,1)).
double normal_quantile(double p);

struct NearTie {
  int state = 0;
  int best = 0;
  int runner_up = 0;
  double gap = 0.0;
};

/// Diagnostic for Assumption 2: rows whose top-two Q gap is below tol.
std::vector<NearTie> check_unique_argmax(const QTable& q, double tol);

/// Bundled Theorem-level output used by the experiment harness and the
/// report serializer.
struct CovarianceReport {
  int m_s = 0;
  int m_a = 0;
  Eigen::MatrixXd sigma_q;
  Eigen::MatrixXd sigma_v;
  double sigma_chi = 0.0;
  QTable q;
  ValueVector v_star;
  Policy pi_star;
  PluginInfo inputs;
};

CovarianceReport covariance_report(const ModelParams& params, const Eigen::VectorXd& rho,
                                   const PluginInfo& info,
                                   const CovarianceOptions& opts = {});

}  // namespace mdpstat
