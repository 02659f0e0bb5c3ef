#include "mdpstat/inference.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Dense>

namespace mdpstat {

namespace {

void check_positive_frequencies(const Eigen::VectorXd& w) {
  for (int k = 0; k < w.size(); ++k)
    if (!(w[k] > 0.0))
      throw AssumptionError(
          "Assumption 3 violated (some state-action pair has nonpositive visit frequency)");
}

// Variance of v(S') when S' ~ p: v^T (diag(p) - p p^T) v.
double next_state_value_variance(const Eigen::Ref<const Eigen::VectorXd>& p,
                                 const Eigen::VectorXd& v) {
  return v.dot(multinomial_cov(p) * v);
}

}  // namespace

ModelParams ModelParams::from_model(const TabularMdp& model, const Eigen::VectorXd& w) {
  ModelParams params;
  params.m_s = model.m_s;
  params.m_a = model.m_a;
  params.gamma = model.gamma;
  params.mu_r = model.reward_means();
  params.sigma2_r = model.reward_variances();
  params.p = model.transition;
  params.w = w;
  params.check_shapes();
  return params;
}

ModelParams ModelParams::from_empirical(const EmpiricalModel& est, double gamma) {
  if (!est.unvisited.empty())
    throw UnvisitedError("estimates contain unvisited state-action pairs", est.unvisited);
  ModelParams params;
  params.m_s = est.m_s;
  params.m_a = est.m_a;
  params.gamma = gamma;
  params.mu_r = est.mu_hat;
  params.sigma2_r = est.sigma2_hat;
  params.p = est.p_hat;
  params.w = est.w_hat;
  params.check_shapes();
  return params;
}

void ModelParams::check_shapes() const {
  if (m_s <= 0 || m_a <= 0) throw ModelError("state and action counts must be positive");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ModelError("discount must lie strictly in (0,1)");
  int n = n_pairs();
  if (mu_r.size() != n || sigma2_r.size() != n || w.size() != n ||
      p.rows() != n || p.cols() != m_s)
    throw ModelError("plug-in input shapes do not agree");
}

QCovariance q_covariance(const ModelParams& params, const CovarianceOptions& opts) {
  params.check_shapes();
  check_positive_frequencies(params.w);
  int n = params.n_pairs();

  QCovariance out;
  out.q = solve_q(params.mu_r, params.p, params.gamma, params.m_s, params.m_a, opts.solve);
  GreedyResult greedy = greedy_policy(out.q, opts.tie_tol);
  out.argmax_unique = greedy.unique;
  if (!greedy.unique && !opts.force)
    throw AssumptionError("Assumption 2 violated (argmax not unique)");
  out.pi_star = greedy.policy;
  out.v_star = ValueVector{out.q.state_max(), ValueRole::Optimal};

  Eigen::MatrixXd p_tilde = extended_transition(params.p, out.pi_star);
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n) - params.gamma * p_tilde;
  Eigen::MatrixXd a_inv = system.partialPivLu().solve(Eigen::MatrixXd::Identity(n, n));

  // The per-pair noise enters through mu_hat + gamma * p_hat V*, so the
  // next-state term carries gamma squared.
  double g2 = params.gamma * params.gamma;
  Eigen::VectorXd d(n);
  for (int k = 0; k < n; ++k) {
    double d_q = next_state_value_variance(params.p.row(k), out.v_star.values);
    d[k] = (params.sigma2_r[k] + g2 * d_q) / params.w[k];
  }
  out.sigma = a_inv * d.asDiagonal() * a_inv.transpose();
  out.sigma = ((out.sigma + out.sigma.transpose()) / 2.0).eval();
  return out;
}

VCovariance v_covariance(const ModelParams& params, const Eigen::VectorXd& rho,
                         const CovarianceOptions& opts) {
  if (rho.size() != params.m_s) throw ModelError("rho length does not match the model");
  QCovariance qc = q_covariance(params, opts);

  int m_s = params.m_s;
  int m_a = params.m_a;
  Eigen::MatrixXd p_star(m_s, m_s);
  Eigen::VectorXd d_star(m_s);
  std::vector<int> k_star(m_s);
  for (int s = 0; s < m_s; ++s) {
    int k = s * m_a + qc.q.best_action(s);
    k_star[s] = k;
    p_star.row(s) = params.p.row(k);
    double d_q = next_state_value_variance(params.p.row(k), qc.v_star.values);
    d_star[s] = (params.sigma2_r[k] + params.gamma * params.gamma * d_q) / params.w[k];
  }
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(m_s, m_s) - params.gamma * p_star;
  Eigen::MatrixXd x = system.partialPivLu().solve(Eigen::MatrixXd::Identity(m_s, m_s));

  VCovariance out;
  out.sigma_v = x * d_star.asDiagonal() * x.transpose();
  out.sigma_v = ((out.sigma_v + out.sigma_v.transpose()) / 2.0).eval();

  // The same matrix must fall out of selecting the optimal-action block of
  // the full sandwich (delta method through V(s) = max_a Q(s,a)); disagreement
  // signals a bug, not bad data.
  Eigen::MatrixXd selected(m_s, m_s);
  for (int i = 0; i < m_s; ++i)
    for (int j = 0; j < m_s; ++j) selected(i, j) = qc.sigma(k_star[i], k_star[j]);
  double scale = std::max(1.0, out.sigma_v.cwiseAbs().maxCoeff());
  if ((out.sigma_v - selected).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw Error("internal check failed: value covariance routes disagree");

  out.sigma_chi = rho.dot(out.sigma_v * rho);
  return out;
}

Eigen::MatrixXd fixed_policy_covariance(const ModelParams& params, const Policy& pi) {
  params.check_shapes();
  check_positive_frequencies(params.w);
  if (pi.m_s() != params.m_s || pi.m_a() != params.m_a)
    throw ModelError("policy shape does not match the plug-in inputs");
  pi.validate();

  int m_s = params.m_s;
  int m_a = params.m_a;
  Eigen::VectorXd v = policy_value_means(params.mu_r, params.p, params.gamma, pi);
  Eigen::VectorXd gv = params.gamma * v;

  Eigen::MatrixXd p_pi = Eigen::MatrixXd::Zero(m_s, m_s);
  Eigen::VectorXd w_diag = Eigen::VectorXd::Zero(m_s);
  for (int i = 0; i < m_s; ++i) {
    for (int j = 0; j < m_a; ++j) {
      double pr = pi.probs(i, j);
      if (pr == 0.0) continue;
      int k = i * m_a + j;
      p_pi.row(i) += pr * params.p.row(k);
      double noise = next_state_value_variance(params.p.row(k), gv) + params.sigma2_r[k];
      w_diag[i] += pr * pr / params.w[k] * noise;
    }
  }
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(m_s, m_s) - params.gamma * p_pi;
  Eigen::MatrixXd x = system.partialPivLu().solve(Eigen::MatrixXd::Identity(m_s, m_s));
  Eigen::MatrixXd sigma = x * w_diag.asDiagonal() * x.transpose();
  return (sigma + sigma.transpose()) / 2.0;
}

double delta_q_variance(const Eigen::MatrixXd& sigma, int m_a, int s, int a1, int a2) {
  if (a1 == a2) throw ModelError("gap variance needs two distinct actions");
  int k1 = s * m_a + a1;
  int k2 = s * m_a + a2;
  if (k1 < 0 || k2 < 0 || k1 >= sigma.rows() || k2 >= sigma.rows() || a1 < 0 || a2 < 0 ||
      a1 >= m_a || a2 >= m_a)
    throw ModelError("state or action index out of range");
  return sigma(k1, k1) + sigma(k2, k2) - 2.0 * sigma(k1, k2);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ModelError("quantile argument must lie in (0,1)");
  // Acklam's rational approximation to the inverse normal CDF; relative
  // error below 1.15e-9 over the whole domain.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  double x;
  if (p < p_low) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    double q = p - 0.5;
    double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  return x;
}

ConfidenceInterval confidence_interval(double point, double asym_var, std::int64_t n,
                                       double alpha) {
  if (asym_var < 0.0) throw ModelError("asymptotic variance must be nonnegative");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ModelError("alpha must lie strictly in (0,1)");
  if (n < 1) throw ModelError("sample size must be at least 1");
  ConfidenceInterval ci;
  ci.center = point;
  ci.alpha = alpha;
  double z = normal_quantile(1.0 - alpha / 2.0);
  ci.half_width = z * std::sqrt(asym_var / static_cast<double>(n));
  return ci;
}

std::vector<NearTie> check_unique_argmax(const QTable& q, double tol) {
  std::vector<NearTie> ties;
  for (int s = 0; s < q.m_s; ++s) {
    if (q.m_a < 2) continue;
    int best = q.best_action(s);
    int second = -1;
    for (int a = 0; a < q.m_a; ++a) {
      if (a == best) continue;
      if (second < 0 || q(s, a) > q(s, second)) second = a;
    }
    double gap = q(s, best) - q(s, second);
    if (gap < tol) ties.push_back({s, best, second, gap});
  }
  return ties;
}

CovarianceReport covariance_report(const ModelParams& params, const Eigen::VectorXd& rho,
                                   const PluginInfo& info, const CovarianceOptions& opts) {
  CovarianceReport report;
  QCovariance qc = q_covariance(params, opts);
  VCovariance vc = v_covariance(params, rho, opts);
  report.m_s = params.m_s;
  report.m_a = params.m_a;
  report.sigma_q = std::move(qc.sigma);
  report.sigma_v = std::move(vc.sigma_v);
  report.sigma_chi = vc.sigma_chi;
  report.q = std::move(qc.q);
  report.v_star = std::move(qc.v_star);
  report.pi_star = std::move(qc.pi_star);
  report.inputs = info;
  return report;
}

}  // namespace mdpstat
