#include "mdpstat/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mdpstat {

TrajectoryDataset::TrajectoryDataset(int m_s, int m_a)
    : m_s_(m_s),
      m_a_(m_a),
      counts_(static_cast<std::size_t>(m_s) * m_a, 0),
      trans_counts_(Eigen::MatrixXd::Zero(m_s * m_a, m_s)),
      reward_sum_(static_cast<std::size_t>(m_s) * m_a, 0.0),
      reward_sumsq_(static_cast<std::size_t>(m_s) * m_a, 0.0),
      cost_sum_(static_cast<std::size_t>(m_s) * m_a, 0.0),
      cost_sumsq_(static_cast<std::size_t>(m_s) * m_a, 0.0) {
  if (m_s <= 0 || m_a <= 0) throw ModelError("dataset needs positive state and action counts");
}

void TrajectoryDataset::push(const TransitionRecord& rec) {
  if (rec.s < 0 || rec.s >= m_s_ || rec.s_next < 0 || rec.s_next >= m_s_ ||
      rec.a < 0 || rec.a >= m_a_)
    throw ModelError("record indices out of range");
  records_.push_back(rec);
  int k = rec.s * m_a_ + rec.a;
  ++counts_[k];
  trans_counts_(k, rec.s_next) += 1.0;
  reward_sum_[k] += rec.r;
  reward_sumsq_[k] += rec.r * rec.r;
  cost_sum_[k] += rec.cost;
  cost_sumsq_[k] += rec.cost * rec.cost;
}

int collect_steps(TrajectoryDataset& data, const TabularMdp& model, const Policy& pi,
                  std::int64_t steps, RngStream& rng) {
  Eigen::VectorXd rho = model.rho;
  int state = rng.categorical(rho);
  return collect_steps(data, model, pi, steps, rng, state);
}

int collect_steps(TrajectoryDataset& data, const TabularMdp& model, const Policy& pi,
                  std::int64_t steps, RngStream& rng, int state) {
  if (data.m_s() != model.m_s || data.m_a() != model.m_a)
    throw ModelError("dataset shape does not match the model");
  if (pi.m_s() != model.m_s || pi.m_a() != model.m_a)
    throw ModelError("policy shape does not match the model");
  if (state < 0 || state >= model.m_s) throw ModelError("initial state out of range");
  for (std::int64_t i = 0; i < steps; ++i) {
    TransitionRecord rec;
    rec.t = data.n();
    rec.s = state;
    rec.a = pi.sample(state, rng);
    int k = rec.s * model.m_a + rec.a;
    rec.r = model.reward[k].sample(rng);
    rec.s_next = rng.categorical(model.transition.row(k).transpose());
    data.push(rec);
    state = rec.s_next;
  }
  return state;
}

TrajectoryDataset collect_trajectory(const TabularMdp& model, const Policy& pi,
                                     std::int64_t n, RngStream& rng,
                                     std::optional<int> initial_state) {
  TrajectoryDataset data(model.m_s, model.m_a);
  if (initial_state)
    collect_steps(data, model, pi, n, rng, *initial_state);
  else
    collect_steps(data, model, pi, n, rng);
  return data;
}

EmpiricalModel empirical_model(const TrajectoryDataset& data) {
  if (data.n() == 0) throw ModelError("cannot estimate from an empty dataset");
  int n_pairs = data.m_s() * data.m_a();
  EmpiricalModel est;
  est.m_s = data.m_s();
  est.m_a = data.m_a();
  est.n = data.n();
  est.mu_hat.resize(n_pairs);
  est.sigma2_hat.resize(n_pairs);
  est.p_hat.resize(n_pairs, data.m_s());
  est.w_hat.resize(n_pairs);
  double nan = std::numeric_limits<double>::quiet_NaN();
  for (int k = 0; k < n_pairs; ++k) {
    std::int64_t c = data.visit_count(k);
    est.w_hat[k] = static_cast<double>(c) / static_cast<double>(est.n);
    if (c == 0) {
      est.unvisited.push_back(k);
      est.mu_hat[k] = nan;
      est.sigma2_hat[k] = nan;
      est.p_hat.row(k).setConstant(nan);
      continue;
    }
    double mean = data.reward_sum(k) / static_cast<double>(c);
    est.mu_hat[k] = mean;
    // Population form; clamp tiny negative round-off.
    est.sigma2_hat[k] =
        std::max(0.0, data.reward_sumsq(k) / static_cast<double>(c) - mean * mean);
    est.p_hat.row(k) = data.transition_counts().row(k) / static_cast<double>(c);
  }
  return est;
}

Eigen::MatrixXd multinomial_cov(const Eigen::Ref<const Eigen::VectorXd>& p) {
  Eigen::MatrixXd cov = -p * p.transpose();
  cov.diagonal() += p;
  return cov;
}

}  // namespace mdpstat
