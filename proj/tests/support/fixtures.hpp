#pragma once

// Shared fixtures and oracle helpers for the test binaries.  The oracles here
// are deliberately independent of the library's covariance formulas: they
// sample data and recompute plug-in estimates from scratch.

#include <cmath>
#include <cstdint>
#include <algorithm>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mdpstat/constrained.hpp"
#include "mdpstat/inference.hpp"
#include "mdpstat/io.hpp"
#include "mdpstat/mdp.hpp"
#include "mdpstat/rng.hpp"

#ifndef TESTS_DATA_DIR
#error "TESTS_DATA_DIR must be defined by the build"
#endif

namespace testsup {

inline std::string data_path(const std::string& name) {
  return std::string(TESTS_DATA_DIR) + "/" + name;
}

// One self-looping state, one action.
inline mdpstat::TabularMdp fix_a(double gamma = 0.5, double mean = 1.0,
                                 double variance = 0.0) {
  mdpstat::TabularMdp m;
  m.m_s = 1;
  m.m_a = 1;
  m.gamma = gamma;
  m.reward = {variance > 0.0 ? mdpstat::ScalarDistribution::gaussian(mean, variance)
                             : mdpstat::ScalarDistribution::deterministic(mean)};
  m.transition = Eigen::MatrixXd::Ones(1, 1);
  m.rho = Eigen::VectorXd::Ones(1);
  return m;
}

// Two states, two actions, deterministic everything: action 0 stays put,
// action 1 swaps states.  Optimal policy: swap at 0, stay at 1.
inline mdpstat::TabularMdp fix_b() {
  mdpstat::TabularMdp m;
  m.m_s = 2;
  m.m_a = 2;
  m.gamma = 0.9;
  m.reward = {mdpstat::ScalarDistribution::deterministic(1.0),
              mdpstat::ScalarDistribution::deterministic(3.0),
              mdpstat::ScalarDistribution::deterministic(2.0),
              mdpstat::ScalarDistribution::deterministic(0.5)};
  m.transition.resize(4, 2);
  m.transition << 1, 0,  // (0, stay)
      0, 1,              // (0, swap)
      0, 1,              // (1, stay)
      1, 0;              // (1, swap)
  m.rho = Eigen::VectorXd::Constant(2, 0.5);
  return m;
}

// Two states, one action, deterministic swap.
inline mdpstat::TabularMdp fix_c() {
  mdpstat::TabularMdp m;
  m.m_s = 2;
  m.m_a = 1;
  m.gamma = 0.9;
  m.reward = {mdpstat::ScalarDistribution::deterministic(1.0),
              mdpstat::ScalarDistribution::deterministic(0.0)};
  m.transition.resize(2, 2);
  m.transition << 0, 1, 1, 0;
  m.rho = Eigen::VectorXd::Constant(2, 0.5);
  return m;
}

// Three states, two actions, randomly generated once and committed as data.
inline mdpstat::TabularMdp fix_d() { return mdpstat::load_mdp(data_path("fix_d.json")); }

// Visit frequencies used with fix_d in the Monte-Carlo oracles: uneven on
// purpose so W^{-1} actually matters.
inline Eigen::VectorXd fix_d_w() {
  Eigen::VectorXd w(6);
  w << 0.10, 0.15, 0.12, 0.18, 0.20, 0.25;
  return w;
}

// Two-state constrained fixture.  budget=7.0 binds (the occupancy optimum
// randomizes state 0); budget=100.0 leaves the unconstrained optimum.
inline mdpstat::ConstrainedMdp fix_e(double budget = 7.0) {
  mdpstat::ConstrainedMdp cm;
  cm.base.m_s = 2;
  cm.base.m_a = 2;
  cm.base.gamma = 0.9;
  cm.base.reward = {mdpstat::ScalarDistribution::gaussian(1.0, 0.25),
                    mdpstat::ScalarDistribution::gaussian(2.0, 0.25),
                    mdpstat::ScalarDistribution::gaussian(0.5, 0.25),
                    mdpstat::ScalarDistribution::gaussian(1.8, 0.25)};
  cm.base.transition.resize(4, 2);
  cm.base.transition << 0.7, 0.3, 0.2, 0.8, 0.6, 0.4, 0.3, 0.7;
  cm.base.rho = Eigen::VectorXd::Constant(2, 0.5);
  cm.cost = {mdpstat::ScalarDistribution::gaussian(0.2, 0.09),
             mdpstat::ScalarDistribution::gaussian(1.0, 0.09),
             mdpstat::ScalarDistribution::gaussian(0.1, 0.09),
             mdpstat::ScalarDistribution::gaussian(0.9, 0.09)};
  cm.budget = budget;
  return cm;
}

inline Eigen::VectorXd fix_e_w() {
  Eigen::VectorXd w(4);
  w << 0.30, 0.25, 0.20, 0.25;
  return w;
}

// Sufficient statistics of n i.i.d. draws: pair k ~ Cat(w), then reward and
// next state from the model.  This is the sampling regime the asymptotic
// formulas assume, so it is the cleanest independent check of them.
struct GenerativeSample {
  Eigen::VectorXd mu_r;
  Eigen::VectorXd sigma2_r;
  Eigen::VectorXd mu_c;
  Eigen::VectorXd sigma2_c;
  Eigen::MatrixXd p;
  Eigen::VectorXd w_hat;
};

inline GenerativeSample sample_generative(const mdpstat::TabularMdp& model,
                                          const std::vector<mdpstat::ScalarDistribution>* cost,
                                          const Eigen::VectorXd& w, std::int64_t n,
                                          mdpstat::RngStream& rng) {
  const int n_pairs = model.n_pairs();
  const int m_s = model.m_s;
  std::vector<std::int64_t> count(n_pairs, 0);
  Eigen::VectorXd r_sum = Eigen::VectorXd::Zero(n_pairs);
  Eigen::VectorXd r_sumsq = Eigen::VectorXd::Zero(n_pairs);
  Eigen::VectorXd c_sum = Eigen::VectorXd::Zero(n_pairs);
  Eigen::VectorXd c_sumsq = Eigen::VectorXd::Zero(n_pairs);
  Eigen::MatrixXd trans = Eigen::MatrixXd::Zero(n_pairs, m_s);

  for (std::int64_t t = 0; t < n; ++t) {
    const int k = rng.categorical(w);
    const double r = model.reward[k].sample(rng);
    count[k] += 1;
    r_sum[k] += r;
    r_sumsq[k] += r * r;
    if (cost != nullptr) {
      const double c = (*cost)[k].sample(rng);
      c_sum[k] += c;
      c_sumsq[k] += c * c;
    }
    const int s_next = rng.categorical(model.transition.row(k).transpose());
    trans(k, s_next) += 1.0;
  }

  GenerativeSample out;
  out.mu_r.resize(n_pairs);
  out.sigma2_r.resize(n_pairs);
  out.mu_c.resize(n_pairs);
  out.sigma2_c.resize(n_pairs);
  out.p.resize(n_pairs, m_s);
  out.w_hat.resize(n_pairs);
  for (int k = 0; k < n_pairs; ++k) {
    if (count[k] == 0) {
      throw std::runtime_error("generative oracle: pair unvisited, raise n");
    }
    const double c = static_cast<double>(count[k]);
    out.mu_r[k] = r_sum[k] / c;
    out.sigma2_r[k] = std::max(0.0, r_sumsq[k] / c - out.mu_r[k] * out.mu_r[k]);
    out.mu_c[k] = c_sum[k] / c;
    out.sigma2_c[k] = std::max(0.0, c_sumsq[k] / c - out.mu_c[k] * out.mu_c[k]);
    out.p.row(k) = trans.row(k) / c;
    out.w_hat[k] = c / static_cast<double>(n);
  }
  return out;
}

// Rows are replications; returns the sample covariance (denominator m-1).
inline Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& samples) {
  const auto m = static_cast<double>(samples.rows());
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  const Eigen::MatrixXd centered = samples.rowwise() - mean;
  return centered.transpose() * centered / (m - 1.0);
}

inline double rel_frobenius(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want) {
  return (got - want).norm() / want.norm();
}

// Kolmogorov-Smirnov distance against the standard normal.
inline double ks_normal(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const auto n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double cdf = 0.5 * std::erfc(-xs[i] / std::sqrt(2.0));
    d = std::max(d, std::abs(cdf - static_cast<double>(i + 1) / n));
    d = std::max(d, std::abs(cdf - static_cast<double>(i) / n));
  }
  return d;
}

inline double min_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  return eig.eigenvalues().minCoeff();
}

}  // namespace testsup
