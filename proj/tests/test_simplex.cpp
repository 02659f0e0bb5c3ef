#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "mdpstat/rng.hpp"
#include "mdpstat/simplex.hpp"

using namespace mdpstat;

namespace {

LpProblem ub_problem(const Eigen::VectorXd& c, const Eigen::MatrixXd& a,
                     const Eigen::VectorXd& b) {
  LpProblem lp;
  lp.maximize = true;
  lp.c = c;
  lp.a_eq.resize(0, c.size());
  lp.b_eq.resize(0);
  lp.a_ub = a;
  lp.b_ub = b;
  return lp;
}

// Brute-force vertex enumeration for max c'x s.t. Ax <= b, x >= 0.  Visits
// every choice of n active constraints among the m rows and n sign bounds.
double vertex_enumeration_optimum(const Eigen::VectorXd& c, const Eigen::MatrixXd& a,
                                  const Eigen::VectorXd& b) {
  const int n = static_cast<int>(c.size());
  const int m = static_cast<int>(a.rows());
  const int total = m + n;
  double best = -1e300;
  bool found = false;

  // Iterative enumeration of all n-subsets of [0, total).
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) {
    idx[i] = i;
  }
  for (;;) {
    Eigen::MatrixXd rows(n, n);
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) {
      if (idx[i] < m) {
        rows.row(i) = a.row(idx[i]);
        rhs[i] = b[idx[i]];
      } else {
        rows.row(i).setZero();
        rows(i, idx[i] - m) = 1.0;
        rhs[i] = 0.0;
      }
    }
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(rows);
    if (lu.isInvertible()) {
      const Eigen::VectorXd x = lu.solve(rhs);
      const bool feasible =
          x.minCoeff() >= -1e-9 && ((a * x - b).maxCoeff() <= 1e-9);
      if (feasible) {
        best = std::max(best, c.dot(x));
        found = true;
      }
    }
    // next combination
    int i = n - 1;
    while (i >= 0 && idx[i] == total - n + i) {
      --i;
    }
    if (i < 0) {
      break;
    }
    ++idx[i];
    for (int j = i + 1; j < n; ++j) {
      idx[j] = idx[j - 1] + 1;
    }
  }
  REQUIRE(found);
  return best;
}

}  // namespace

TEST_CASE("one-variable box") {
  Eigen::VectorXd c(1), b(1);
  c << 1.0;
  b << 1.0;
  const LpSolution sol = solve_lp(ub_problem(c, Eigen::MatrixXd::Ones(1, 1), b));
  CHECK(sol.x[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sol.ub_binding.size() == 1);
  CHECK(sol.ub_binding[0]);
}

TEST_CASE("tied objective lands on the lowest-index vertex") {
  Eigen::VectorXd c(2), b(1);
  c << 1.0, 1.0;
  Eigen::MatrixXd a(1, 2);
  a << 1.0, 1.0;
  b << 1.0;
  const LpSolution sol = solve_lp(ub_problem(c, a, b));
  CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sol.x[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sol.x[1] == doctest::Approx(0.0));
}

TEST_CASE("infeasible and unbounded problems raise typed errors") {
  LpProblem infeasible;
  infeasible.maximize = true;
  infeasible.c = Eigen::VectorXd::Ones(1);
  infeasible.a_eq = Eigen::MatrixXd::Ones(1, 1);
  infeasible.b_eq = Eigen::VectorXd::Constant(1, -1.0);  // x = -1 with x >= 0
  infeasible.a_ub.resize(0, 1);
  infeasible.b_ub.resize(0);
  CHECK_THROWS_AS(solve_lp(infeasible), LpInfeasibleError);

  LpProblem unbounded;
  unbounded.maximize = true;
  unbounded.c = Eigen::VectorXd::Ones(1);
  unbounded.a_eq.resize(0, 1);
  unbounded.b_eq.resize(0);
  unbounded.a_ub.resize(0, 1);
  unbounded.b_ub.resize(0);
  CHECK_THROWS_AS(solve_lp(unbounded), LpUnboundedError);
}

TEST_CASE("equality constraints are honored") {
  LpProblem lp;
  lp.maximize = true;
  lp.c.resize(2);
  lp.c << 3.0, 1.0;
  lp.a_eq.resize(1, 2);
  lp.a_eq << 1.0, 1.0;
  lp.b_eq = Eigen::VectorXd::Constant(1, 2.0);
  lp.a_ub.resize(1, 2);
  lp.a_ub << 1.0, 0.0;
  lp.b_ub = Eigen::VectorXd::Constant(1, 1.5);
  const LpSolution sol = solve_lp(lp);
  CHECK(sol.x[0] == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(sol.x[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(sol.objective == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("random LPs match vertex enumeration") {
  RngStream rng(31, 0);
  for (int instance = 0; instance < 50; ++instance) {
    const int n = 8, m = 5;
    Eigen::VectorXd c(n);
    for (int i = 0; i < n; ++i) {
      c[i] = 2.0 * rng.uniform() - 1.0;
    }
    // b > 0 keeps the origin feasible; the ones row keeps the LP bounded.
    Eigen::MatrixXd a(m + 1, n);
    Eigen::VectorXd b(m + 1);
    for (int r = 0; r < m; ++r) {
      for (int i = 0; i < n; ++i) {
        a(r, i) = 2.0 * rng.uniform() - 1.0;
      }
      b[r] = 0.5 + 1.5 * rng.uniform();
    }
    a.row(m).setOnes();
    b[m] = 10.0;

    const double want = vertex_enumeration_optimum(c, a, b);
    const LpSolution sol = solve_lp(ub_problem(c, a, b));
    CHECK(sol.objective == doctest::Approx(want).epsilon(1e-8));
    CHECK(sol.x.minCoeff() >= -1e-9);
    CHECK((a * sol.x - b).maxCoeff() <= 1e-9);
  }
}
