#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "mdpstat/baselines.hpp"
#include "mdpstat/errors.hpp"
#include "mdpstat/inference.hpp"
#include "mdpstat/qocba.hpp"
#include "mdpstat/riverswim.hpp"
#include "support/fixtures.hpp"

using namespace mdpstat;
using namespace testsup;

namespace {

// One state, two self-looping actions with distinct mean rewards: the value
// term cancels in the Q gap, so the gap estimator is just the difference of
// reward means and its cost coefficients are the reward variances.
TabularMdp two_arm_loop(double mu0 = 1.0, double mu1 = 0.5, double var0 = 0.3,
                        double var1 = 0.7) {
  TabularMdp m;
  m.m_s = 1;
  m.m_a = 2;
  m.gamma = 0.5;
  m.reward = {ScalarDistribution::gaussian(mu0, var0),
              ScalarDistribution::gaussian(mu1, var1)};
  m.transition = Eigen::MatrixXd::Ones(2, 1);
  m.rho = Eigen::VectorXd::Ones(1);
  return m;
}

Policy random_policy(int m_s, int m_a, RngStream& rng) {
  Policy pi;
  pi.probs.resize(m_s, m_a);
  for (int s = 0; s < m_s; ++s) {
    double total = 0.0;
    for (int a = 0; a < m_a; ++a) {
      pi.probs(s, a) = 0.05 + rng.uniform();
      total += pi.probs(s, a);
    }
    pi.probs.row(s) /= total;
  }
  return pi;
}

double max_relative_cost(const std::vector<Eigen::VectorXd>& cost_vectors,
                         const std::vector<double>& gap2, const Eigen::VectorXd& w) {
  double worst = 0.0;
  for (std::size_t i = 0; i < cost_vectors.size(); ++i) {
    double v = 0.0;
    for (int k = 0; k < w.size(); ++k) v += cost_vectors[i][k] / w[k];
    worst = std::max(worst, v / gap2[i]);
  }
  return worst;
}

bool records_equal(const std::vector<TransitionRecord>& a,
                   const std::vector<TransitionRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].t != b[i].t || a[i].s != b[i].s || a[i].a != b[i].a || a[i].r != b[i].r ||
        a[i].s_next != b[i].s_next || a[i].cost != b[i].cost)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("policy_from_allocation inverts the stationary map") {
  // m_a = 1: the only policy.
  const Allocation uni{Eigen::VectorXd::Constant(2, 0.5), 0.0};
  const Policy pc = policy_from_allocation(uni, 2, 1);
  CHECK(pc.probs(0, 0) == doctest::Approx(1.0));
  CHECK(pc.probs(1, 0) == doctest::Approx(1.0));

  Eigen::VectorXd w(2);
  w << 0.6, 0.4;
  const Policy p1 = policy_from_allocation({w, 0.0}, 1, 2);
  CHECK(p1.probs(0, 0) == doctest::Approx(0.6));
  CHECK(p1.probs(0, 1) == doctest::Approx(0.4));

  CHECK_THROWS_AS(policy_from_allocation({Eigen::VectorXd::Zero(2), 0.0}, 1, 2),
                  ModelError);
}

TEST_CASE("visit-frequency polytope: policies and allocations are in bijection") {
  for (const TabularMdp& model : {fix_d(), build_riverswim({})}) {
    RngStream rng(2024, model.m_s);
    const int n_pairs = model.n_pairs();

    // Policy -> stationary distribution lands in the polytope and maps back.
    std::vector<Eigen::VectorXd> corners;
    for (int trial = 0; trial < 20; ++trial) {
      const Policy pi = random_policy(model.m_s, model.m_a, rng);
      const Eigen::VectorXd w =
          stationary_distribution(extended_transition(model, pi));
      validate_allocation({w, 0.0}, model.transition, model.m_s, model.m_a, 1e-8);
      const Policy back = policy_from_allocation({w, 0.0}, model.m_s, model.m_a);
      CHECK((back.probs - pi.probs).cwiseAbs().maxCoeff() < 1e-8);
      corners.push_back(w);
    }

    // Convex mixtures stay balanced, and each one is the stationary law of
    // the policy it induces.
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd mix = Eigen::VectorXd::Zero(n_pairs);
      double total = 0.0;
      for (const auto& c : corners) {
        const double lambda = rng.uniform();
        mix += lambda * c;
        total += lambda;
      }
      mix /= total;
      validate_allocation({mix, 0.0}, model.transition, model.m_s, model.m_a, 1e-8);
      const Policy pi = policy_from_allocation({mix, 0.0}, model.m_s, model.m_a);
      const Eigen::VectorXd back =
          stationary_distribution(extended_transition(model, pi));
      CHECK((back - mix).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("validate_allocation rejects floor, normalization, and balance breaks") {
  const TabularMdp model = fix_d();
  const Policy uniform = Policy::uniform(3, 2);
  const Eigen::VectorXd w = stationary_distribution(extended_transition(model, uniform));
  validate_allocation({w, 1e-6}, model.transition, 3, 2);

  CHECK_THROWS_AS(validate_allocation({w.head(4), 1e-6}, model.transition, 3, 2),
                  ModelError);

  Allocation floored{w, 0.5};
  CHECK_THROWS_AS(validate_allocation(floored, model.transition, 3, 2), SolverError);

  Allocation unnormalized{2.0 * w, 1e-6};
  CHECK_THROWS_AS(validate_allocation(unnormalized, model.transition, 3, 2), SolverError);

  Allocation unbalanced{w, 1e-6};
  unbalanced.w[0] += 1e-3;
  unbalanced.w[1] -= 1e-3;
  CHECK_THROWS_AS(validate_allocation(unbalanced, model.transition, 3, 2), SolverError);
}

TEST_CASE("cost coefficients: common value term cancels for self-looping arms") {
  const TabularMdp model = two_arm_loop();
  const QTable q = solve_q(model);
  const ValueVector v_star{q.state_max(), ValueRole::Optimal};
  const CostCoefficients coeffs = compute_cost_coefficients(
      model.transition, model.reward_variances(), model.gamma, q, v_star);

  CHECK(coeffs.a_star == std::vector<int>{0});
  REQUIRE(coeffs.pairs.size() == 1);
  CHECK(coeffs.pairs[0].state == 0);
  CHECK(coeffs.pairs[0].action == 1);
  CHECK(coeffs.pairs[0].c[0] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(coeffs.pairs[0].c[1] == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("cost coefficients vanish for a fully deterministic model") {
  const TabularMdp model = fix_b();
  const QTable q = solve_q(model);
  const ValueVector v_star{q.state_max(), ValueRole::Optimal};
  const CostCoefficients coeffs = compute_cost_coefficients(
      model.transition, model.reward_variances(), model.gamma, q, v_star);
  for (const auto& pair : coeffs.pairs) CHECK(pair.c.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("cost expansion reproduces the sandwich gap variance on fix_d") {
  const TabularMdp model = fix_d();
  const QTable q = solve_q(model);
  const ValueVector v_star{q.state_max(), ValueRole::Optimal};
  const CostCoefficients coeffs = compute_cost_coefficients(
      model.transition, model.reward_variances(), model.gamma, q, v_star);

  RngStream rng(7, 7);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd w(6);
    for (int k = 0; k < 6; ++k) w[k] = 0.05 + rng.uniform();
    w /= w.sum();

    const QCovariance qc = q_covariance(ModelParams::from_model(model, w));
    for (const auto& pair : coeffs.pairs) {
      const double direct =
          delta_q_variance(qc.sigma, 2, pair.state, coeffs.a_star[pair.state], pair.action);
      double expanded = 0.0;
      for (int k = 0; k < 6; ++k) expanded += pair.c[k] / w[k];
      CHECK(expanded == doctest::Approx(direct).epsilon(1e-10));
    }
  }
}

TEST_CASE("relative discrepancies rank comparisons by normalized gap") {
  QTable q(2, 2);
  q(0, 0) = 1.0;
  q(0, 1) = 0.0;
  q(1, 0) = 2.0;
  q(1, 1) = 1.5;
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(4, 4);
  sigma.diagonal() << 0.5, 0.5, 1.0, 1.0;

  const DiscrepancyTable table = relative_discrepancies(q, sigma);
  REQUIRE(table.entries.size() == 2);
  // State 0: gap^2 / (0.5 + 0.5) = 1; state 1: 0.25 / 2.
  CHECK(table.entries[0].h == doctest::Approx(1.0));
  CHECK(table.entries[1].h == doctest::Approx(0.125));
  CHECK(table.argmin_state == 1);
  CHECK(table.argmin_action == 1);
  CHECK(table.min_h == doctest::Approx(0.125));
}

TEST_CASE("allocation solver: closed-form optima on one state") {
  // Single cost vector (1,1): symmetric, optimum splits evenly.
  const Eigen::MatrixXd self_loops = Eigen::MatrixXd::Ones(2, 1);
  Eigen::VectorXd even(2);
  even << 1.0, 1.0;
  const Allocation a = solve_allocation({even}, self_loops, 1, 2);
  validate_allocation(a, self_loops, 1, 2);
  CHECK(a.w[0] == doctest::Approx(0.5).epsilon(1e-3));

  // Cost (4,1): minimize 4/w + 1/(1-w) -> w = 2/3.
  Eigen::VectorXd skewed(2);
  skewed << 4.0, 1.0;
  const Allocation b = solve_allocation({skewed}, self_loops, 1, 2);
  CHECK(b.w[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-3));

  // Scaling every cost by 1000 must not move the optimum.
  Eigen::VectorXd scaled = 1000.0 * skewed;
  const Allocation c = solve_allocation({scaled}, self_loops, 1, 2);
  CHECK((b.w - c.w).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("allocation solver beats an exhaustive grid on one state") {
  const Eigen::MatrixXd self_loops = Eigen::MatrixXd::Ones(2, 1);
  std::vector<Eigen::VectorXd> costs(2, Eigen::VectorXd(2));
  costs[0] << 3.0, 0.5;
  costs[1] << 0.25, 2.0;

  double grid_best = 1e300;
  for (int i = 1; i < 1000; ++i) {
    const double w0 = static_cast<double>(i) * 1e-3;
    const double value = std::max(costs[0][0] / w0 + costs[0][1] / (1.0 - w0),
                                  costs[1][0] / w0 + costs[1][1] / (1.0 - w0));
    grid_best = std::min(grid_best, value);
  }

  AllocationDiagnostics diag;
  const Allocation a = solve_allocation(costs, self_loops, 1, 2, {}, &diag);
  const double got = std::max(costs[0][0] / a.w[0] + costs[0][1] / a.w[1],
                              costs[1][0] / a.w[0] + costs[1][1] / a.w[1]);
  CHECK(std::abs(got - grid_best) <= 1e-3 * std::max(1.0, std::abs(grid_best)));
  CHECK(diag.objective == doctest::Approx(got).epsilon(1e-9));
}

TEST_CASE("allocation solver beats an exhaustive grid on a two-state chain") {
  // Action 0 stays, action 1 swaps: the exploration chain is a birth-death
  // chain whose stationary law has a closed form in the policy, so the whole
  // polytope can be swept on a grid.
  const TabularMdp model = fix_b();
  std::vector<Eigen::VectorXd> costs(2, Eigen::VectorXd(4));
  costs[0] << 1.0, 2.0, 0.5, 1.5;
  costs[1] << 2.0, 0.5, 1.5, 1.0;

  double grid_best = 1e300;
  for (int i = 1; i < 1000; ++i) {
    const double p0 = static_cast<double>(i) * 1e-3;  // P(swap | state 0)
    for (int j = 1; j < 1000; ++j) {
      const double p1 = static_cast<double>(j) * 1e-3;  // P(swap | state 1)
      const double m0 = p1 / (p0 + p1);
      const double m1 = 1.0 - m0;
      const double w[4] = {m0 * (1.0 - p0), m0 * p0, m1 * (1.0 - p1), m1 * p1};
      double value = 0.0;
      for (const auto& c : costs) {
        double v = 0.0;
        for (int k = 0; k < 4; ++k) v += c[k] / w[k];
        value = std::max(value, v);
      }
      grid_best = std::min(grid_best, value);
    }
  }

  const Allocation a = solve_allocation(costs, model.transition, 2, 2);
  validate_allocation(a, model.transition, 2, 2);
  double got = 0.0;
  for (const auto& c : costs) {
    double v = 0.0;
    for (int k = 0; k < 4; ++k) v += c[k] / a.w[k];
    got = std::max(got, v);
  }
  CHECK(std::abs(got - grid_best) <= 1e-3 * std::abs(grid_best));
}

TEST_CASE("allocation solver diagnostics and failure modes") {
  const TabularMdp model = build_riverswim({.r_l = 3.0});
  const QTable q = solve_q(model);
  const ValueVector v_star{q.state_max(), ValueRole::Optimal};
  const CostCoefficients coeffs = compute_cost_coefficients(
      model.transition, model.reward_variances(), model.gamma, q, v_star);

  AllocationDiagnostics diag;
  const Allocation alloc =
      solve_qocba_allocation(coeffs, q, model.transition, {}, &diag);
  validate_allocation(alloc, model.transition, model.m_s, model.m_a);
  REQUIRE(!diag.objective_trace.empty());
  for (std::size_t i = 1; i < diag.objective_trace.size(); ++i)
    CHECK(diag.objective_trace[i] <= diag.objective_trace[i - 1] + 1e-12);

  // A floor above the uniform-policy stationary minimum leaves no feasible start.
  AllocationSolverOptions tight;
  tight.eta = 0.5;
  CHECK_THROWS_AS(
      solve_allocation({Eigen::VectorXd::Ones(12)}, model.transition, 6, 2, tight),
      SolverError);

  CHECK_THROWS_AS(
      solve_allocation({Eigen::VectorXd::Ones(3)}, model.transition, 6, 2),
      ModelError);
  CHECK_THROWS_AS(
      solve_allocation({Eigen::VectorXd::Constant(12, -1.0)}, model.transition, 6, 2),
      ModelError);
}

TEST_CASE("qocba allocation dominates random exploration policies") {
  const TabularMdp model = build_riverswim({.r_l = 3.0});
  const QTable q = solve_q(model);
  const auto ties = check_unique_argmax(q, 1e-6);
  REQUIRE(ties.empty());

  const ValueVector v_star{q.state_max(), ValueRole::Optimal};
  const CostCoefficients coeffs = compute_cost_coefficients(
      model.transition, model.reward_variances(), model.gamma, q, v_star);

  std::vector<Eigen::VectorXd> costs;
  std::vector<double> gap2;
  for (const auto& pair : coeffs.pairs) {
    costs.push_back(pair.c);
    const double gap =
        q(pair.state, coeffs.a_star[pair.state]) - q(pair.state, pair.action);
    gap2.push_back(gap * gap);
  }

  const Allocation best = solve_qocba_allocation(coeffs, q, model.transition);
  const double opt = max_relative_cost(costs, gap2, best.w);

  RngStream rng(31337, 0);
  for (int trial = 0; trial < 10000; ++trial) {
    const Policy pi = random_policy(model.m_s, model.m_a, rng);
    const Eigen::VectorXd w = stationary_distribution(extended_transition(model, pi));
    CHECK(max_relative_cost(costs, gap2, w) >= opt * (1.0 - 1e-3));
  }
}

TEST_CASE("chi allocation: degenerate and structured cases") {
  // One pair: the only allocation is w = (1).
  const TabularMdp single = fix_a(0.5, 1.0, 1.0);
  const Allocation only = solve_chi_allocation(
      ModelParams::from_model(single, Eigen::VectorXd::Ones(1)), single.rho);
  CHECK(only.w[0] == doctest::Approx(1.0).epsilon(1e-9));

  // Two self-looping arms: the aggregate-value variance only involves the
  // optimal pair, so nearly all mass should go there.
  const TabularMdp arms = two_arm_loop(1.0, 0.5, 0.4, 0.3);
  const Allocation alloc = solve_chi_allocation(
      ModelParams::from_model(arms, Eigen::VectorXd::Constant(2, 0.5)), arms.rho);
  CHECK(alloc.w[0] > 0.99);
  CHECK(alloc.w[1] < 1e-3);
}

TEST_CASE("chi allocation beats random exploration on riverswim") {
  RiverSwimSpec spec;
  spec.reward_noise_var = 1.0;
  const TabularMdp model = build_riverswim(spec);
  const Eigen::VectorXd w_any =
      stationary_distribution(extended_transition(model, Policy::uniform(6, 2)));
  const ModelParams params = ModelParams::from_model(model, w_any);

  const Allocation alloc = solve_chi_allocation(params, model.rho);
  validate_allocation(alloc, model.transition, 6, 2);

  const auto chi_var = [&](const Eigen::VectorXd& w) {
    return v_covariance(ModelParams::from_model(model, w), model.rho).sigma_chi;
  };
  const Eigen::VectorXd w_re =
      stationary_distribution(extended_transition(model, random_explore_policy(6, 0.8)));
  CHECK(chi_var(alloc.w) < chi_var(w_re));
  CHECK(chi_var(alloc.w) < chi_var(w_any));
}

TEST_CASE("run_qocba with one stage is plain policy exploration") {
  const TabularMdp model = fix_d();
  QocbaOptions opts;
  opts.stages = 1;
  opts.batches = {500};
  opts.pi0 = Policy::uniform(3, 2);

  const QocbaResult result = run_qocba(model, opts, 99, 5);
  CHECK(result.allocations.empty());

  RngStream rng(99, 5);
  TrajectoryDataset manual(3, 2);
  const int start = rng.categorical(model.rho);
  collect_steps(manual, model, opts.pi0, 500, rng, start);
  CHECK(records_equal(result.data.records(), manual.records()));
}

TEST_CASE("run_qocba staging: re-solved allocations, pooling, determinism") {
  const TabularMdp model = fix_d();
  QocbaOptions opts;
  opts.stages = 2;
  opts.batches = {400, 600};
  opts.pi0 = Policy::uniform(3, 2);

  const QocbaResult result = run_qocba(model, opts, 4242, 1);
  CHECK(result.data.n() == 1000);
  REQUIRE(result.allocations.size() == 1);

  // The re-solved allocation balances the empirical transition estimated from
  // the first batch, which the protocol's RNG sequence lets us reconstruct.
  RngStream proto(4242, 1);
  TrajectoryDataset first_batch(3, 2);
  const int start = proto.categorical(model.rho);
  collect_steps(first_batch, model, opts.pi0, 400, proto, start);
  validate_allocation(result.allocations[0], empirical_model(first_batch).p_hat, 3, 2);
  CHECK(result.model.n == 1000);
  CHECK(result.report.inputs.empirical);
  CHECK(result.report.inputs.n == 1000);

  const GreedyResult greedy = greedy_policy(result.q_hat);
  CHECK((greedy.policy.probs - result.pi_hat.probs).cwiseAbs().maxCoeff() == 0.0);

  const QocbaResult again = run_qocba(model, opts, 4242, 1);
  CHECK(records_equal(result.data.records(), again.data.records()));
  CHECK((result.q_hat.values - again.q_hat.values).norm() == 0.0);

  QocbaOptions tail_only = opts;
  tail_only.pool_stages = false;
  const QocbaResult tail = run_qocba(model, tail_only, 4242, 1);
  CHECK(tail.model.n == 600);

  QocbaOptions chi = opts;
  chi.chi_objective = true;
  const QocbaResult chi_result = run_qocba(model, chi, 4242, 1);
  CHECK(chi_result.allocations.size() == 1);
  CHECK(chi_result.data.n() == 1000);
}

TEST_CASE("run_qocba rejects malformed staging") {
  const TabularMdp model = fix_d();
  QocbaOptions opts;
  opts.stages = 0;
  opts.batches = {};
  CHECK_THROWS_AS(run_qocba(model, opts, 1, 0), ConfigError);

  opts.stages = 2;
  opts.batches = {100};
  CHECK_THROWS_AS(run_qocba(model, opts, 1, 0), ConfigError);

  opts.batches = {100, -5};
  CHECK_THROWS_AS(run_qocba(model, opts, 1, 0), ConfigError);
}
