#include "mdpstat/baselines.hpp"

#include <cmath>

#include "mdpstat/errors.hpp"

namespace mdpstat {

Policy random_explore_policy(int m_s, double p_right) {
  if (p_right < 0.0 || p_right > 1.0) {
    throw ModelError("p_right must be a probability");
  }
  Eigen::MatrixXd probs(m_s, 2);
  probs.col(0).setConstant(1.0 - p_right);
  probs.col(1).setConstant(p_right);
  Policy pi{probs};
  pi.validate();
  return pi;
}

int eps_greedy_step(const QTable& q, int s, double eps, RngStream& rng) {
  if (rng.uniform() < eps) {
    return static_cast<int>(rng.uniform() * q.m_a);
  }
  return q.best_action(s);
}

namespace {

// Plug-in model from running estimates; unvisited pairs get zero reward and
// a uniform transition row so the solve is always well posed.
QTable imputed_q(const TrajectoryDataset& data, double gamma, const SolveOptions& solve) {
  const int m_s = data.m_s();
  const int m_a = data.m_a();
  const int n = m_s * m_a;
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd p = Eigen::MatrixXd::Constant(n, m_s, 1.0 / m_s);
  const Eigen::MatrixXd counts = data.transition_counts();
  for (int k = 0; k < n; ++k) {
    const auto visits = data.visit_count(k);
    if (visits == 0) {
      continue;
    }
    mu[k] = data.reward_sum(k) / static_cast<double>(visits);
    p.row(k) = counts.row(k) / static_cast<double>(visits);
  }
  return solve_q(mu, p, gamma, m_s, m_a, solve);
}

double gamma_variate(RngStream& rng, double shape) {
  if (shape < 1.0) {
    // Boost to shape+1, then shrink by a uniform power.
    const double y = gamma_variate(rng, shape + 1.0);
    return y * std::pow(rng.uniform(), 1.0 / shape);
  }
  // Marsaglia-Tsang squeeze.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) {
      return d * v;
    }
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
      return d * v;
    }
  }
}

}  // namespace

int run_eps_greedy(TrajectoryDataset& data, const TabularMdp& env, const EpsGreedyOptions& opts,
                   std::int64_t steps, RngStream& rng, int state) {
  if (opts.eps < 0.0 || opts.eps > 1.0) {
    throw ConfigError("eps must be a probability");
  }
  const int refreshes = std::max(1, opts.refreshes);
  QTable q = imputed_q(data, env.gamma, opts.solve);
  std::int64_t next_refresh = steps / refreshes;
  for (std::int64_t t = 0; t < steps; ++t) {
    if (t == next_refresh) {
      q = imputed_q(data, env.gamma, opts.solve);
      next_refresh += std::max<std::int64_t>(1, steps / refreshes);
    }
    const int action = eps_greedy_step(q, state, opts.eps, rng);
    const int k = pair_index(state, action, env.m_a);
    TransitionRecord rec;
    rec.t = data.n();
    rec.s = state;
    rec.a = action;
    rec.r = env.reward[k].sample(rng);
    rec.s_next = rng.categorical(env.transition.row(k));
    data.push(rec);
    state = rec.s_next;
  }
  return state;
}

PsrlAgent::PsrlAgent(int m_s, int m_a, double gamma, const PsrlPrior& prior)
    : m_s_(m_s), m_a_(m_a), gamma_(gamma), prior_(prior) {
  if (prior.dirichlet_weight <= 0.0 || prior.var0 <= 0.0 || prior.obs_var <= 0.0) {
    throw ConfigError("PSRL prior parameters must be positive");
  }
  const int n = m_s * m_a;
  dirichlet_ = Eigen::MatrixXd::Constant(n, m_s, prior.dirichlet_weight);
  reward_sum_ = Eigen::VectorXd::Zero(n);
  reward_count_ = Eigen::VectorXd::Zero(n);
}

TabularMdp PsrlAgent::sample_model(RngStream& rng) const {
  const int n = m_s_ * m_a_;
  TabularMdp model;
  model.m_s = m_s_;
  model.m_a = m_a_;
  model.gamma = gamma_;
  model.rho = Eigen::VectorXd::Constant(m_s_, 1.0 / m_s_);
  model.transition.resize(n, m_s_);
  model.reward.resize(n);
  for (int k = 0; k < n; ++k) {
    Eigen::VectorXd g(m_s_);
    for (int s = 0; s < m_s_; ++s) {
      g[s] = gamma_variate(rng, dirichlet_(k, s));
    }
    model.transition.row(k) = (g / g.sum()).transpose();

    const double precision = 1.0 / prior_.var0 + reward_count_[k] / prior_.obs_var;
    const double post_mean =
        (prior_.mean0 / prior_.var0 + reward_sum_[k] / prior_.obs_var) / precision;
    const double post_var = 1.0 / precision;
    model.reward[k] =
        ScalarDistribution::deterministic(post_mean + std::sqrt(post_var) * rng.normal());
  }
  return model;
}

void PsrlAgent::observe(int s, int a, double r, int s_next) {
  const int k = pair_index(s, a, m_a_);
  dirichlet_(k, s_next) += 1.0;
  reward_sum_[k] += r;
  reward_count_[k] += 1.0;
}

int PsrlAgent::run_episode(TrajectoryDataset& data, const TabularMdp& env,
                           std::int64_t episode_length, RngStream& rng, int state,
                           const SolveOptions& solve) {
  const TabularMdp sampled = sample_model(rng);
  const QTable q = solve_q(sampled, solve);
  for (std::int64_t t = 0; t < episode_length; ++t) {
    const int action = q.best_action(state);
    const int k = pair_index(state, action, env.m_a);
    TransitionRecord rec;
    rec.t = data.n();
    rec.s = state;
    rec.a = action;
    rec.r = env.reward[k].sample(rng);
    rec.s_next = rng.categorical(env.transition.row(k));
    data.push(rec);
    observe(rec.s, rec.a, rec.r, rec.s_next);
    state = rec.s_next;
  }
  return state;
}

}  // namespace mdpstat
