#include "mdpstat/simplex.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace mdpstat {

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kFeasTol = 1e-7;
constexpr int kMaxPivots = 20000;

// One simplex phase on min c^T z, A z = b, z >= 0.  Only columns below
// `allowed` may enter the basis.  Returns false on detecting unboundedness.
bool run_simplex(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                 const Eigen::VectorXd& c, std::vector<int>& basis, int allowed) {
  int m = static_cast<int>(a.rows());
  for (int pivot = 0; pivot < kMaxPivots; ++pivot) {
    Eigen::MatrixXd basis_mat(m, m);
    for (int i = 0; i < m; ++i) basis_mat.col(i) = a.col(basis[i]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis_mat);

    Eigen::VectorXd x_b = lu.solve(b);
    Eigen::VectorXd c_b(m);
    for (int i = 0; i < m; ++i) c_b[i] = c[basis[i]];
    Eigen::VectorXd y = lu.transpose().solve(c_b);

    // Bland: lowest-index column with negative reduced cost enters.
    int entering = -1;
    for (int j = 0; j < allowed; ++j) {
      if (std::find(basis.begin(), basis.end(), j) != basis.end()) continue;
      double reduced = c[j] - y.dot(a.col(j));
      if (reduced < -kPivotTol) {
        entering = j;
        break;
      }
    }
    if (entering < 0) return true;

    Eigen::VectorXd direction = lu.solve(a.col(entering));
    int leaving = -1;
    double best_ratio = 0.0;
    for (int i = 0; i < m; ++i) {
      if (direction[i] <= kPivotTol) continue;
      double ratio = std::max(x_b[i], 0.0) / direction[i];
      if (leaving < 0 || ratio < best_ratio - 1e-12 ||
          (ratio < best_ratio + 1e-12 && basis[i] < basis[leaving]))
        leaving = i, best_ratio = ratio;
    }
    if (leaving < 0) return false;
    basis[leaving] = entering;
  }
  throw SolverError("simplex exceeded its pivot budget", 0.0, kMaxPivots);
}

}  // namespace

LpSolution solve_lp(const LpProblem& lp) {
  int n = static_cast<int>(lp.c.size());
  int m_eq = static_cast<int>(lp.a_eq.rows());
  int m_ub = static_cast<int>(lp.a_ub.rows());
  if (n <= 0) throw ModelError("LP needs at least one variable");
  if ((m_eq > 0 && lp.a_eq.cols() != n) || lp.b_eq.size() != m_eq)
    throw ModelError("equality block shape mismatch");
  if ((m_ub > 0 && lp.a_ub.cols() != n) || lp.b_ub.size() != m_ub)
    throw ModelError("inequality block shape mismatch");

  int m = m_eq + m_ub;
  int n_struct = n + m_ub;  // structural variables plus slacks
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, n_struct + m);
  Eigen::VectorXd b(m);
  for (int i = 0; i < m_eq; ++i) {
    a.row(i).head(n) = lp.a_eq.row(i);
    b[i] = lp.b_eq[i];
  }
  for (int i = 0; i < m_ub; ++i) {
    a.row(m_eq + i).head(n) = lp.a_ub.row(i);
    a(m_eq + i, n + i) = 1.0;
    b[m_eq + i] = lp.b_ub[i];
  }
  // Standard form wants b >= 0; artificials occupy the trailing columns.
  for (int i = 0; i < m; ++i) {
    if (b[i] < 0.0) {
      a.row(i) = -a.row(i);
      b[i] = -b[i];
    }
    a(i, n_struct + i) = 1.0;
  }

  std::vector<int> basis(m);
  for (int i = 0; i < m; ++i) basis[i] = n_struct + i;
  Eigen::VectorXd phase1_cost = Eigen::VectorXd::Zero(n_struct + m);
  phase1_cost.tail(m).setOnes();
  if (!run_simplex(a, b, phase1_cost, basis, n_struct + m))
    throw SolverError("phase-1 simplex reported an unbounded auxiliary problem", 0.0, 0);

  {
    Eigen::MatrixXd basis_mat(m, m);
    for (int i = 0; i < m; ++i) basis_mat.col(i) = a.col(basis[i]);
    Eigen::VectorXd x_b = Eigen::PartialPivLU<Eigen::MatrixXd>(basis_mat).solve(b);
    double infeasibility = 0.0;
    for (int i = 0; i < m; ++i)
      if (basis[i] >= n_struct) infeasibility += std::max(x_b[i], 0.0);
    if (infeasibility > kFeasTol) throw LpInfeasibleError("LP is infeasible");
  }

  // Pivot leftover zero-level artificials out; rows that cannot pivot are
  // redundant and get dropped.
  std::vector<int> keep_rows;
  for (int i = 0; i < m; ++i) {
    if (basis[i] < n_struct) {
      keep_rows.push_back(i);
      continue;
    }
    Eigen::MatrixXd basis_mat(m, m);
    for (int r = 0; r < m; ++r) basis_mat.col(r) = a.col(basis[r]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis_mat);
    bool pivoted = false;
    for (int j = 0; j < n_struct && !pivoted; ++j) {
      if (std::find(basis.begin(), basis.end(), j) != basis.end()) continue;
      Eigen::VectorXd direction = lu.solve(a.col(j));
      if (std::abs(direction[i]) > kPivotTol) {
        basis[i] = j;
        pivoted = true;
      }
    }
    if (pivoted) keep_rows.push_back(i);
  }
  if (static_cast<int>(keep_rows.size()) < m) {
    Eigen::MatrixXd a2(static_cast<int>(keep_rows.size()), a.cols());
    Eigen::VectorXd b2(static_cast<int>(keep_rows.size()));
    std::vector<int> basis2;
    for (int r = 0; r < static_cast<int>(keep_rows.size()); ++r) {
      a2.row(r) = a.row(keep_rows[r]);
      b2[r] = b[keep_rows[r]];
      basis2.push_back(basis[keep_rows[r]]);
    }
    a = std::move(a2);
    b = std::move(b2);
    basis = std::move(basis2);
    m = static_cast<int>(basis.size());
  }

  Eigen::VectorXd cost = Eigen::VectorXd::Zero(n_struct + m);
  cost.head(n) = lp.maximize ? Eigen::VectorXd(-lp.c) : lp.c;
  if (!run_simplex(a, b, cost, basis, n_struct))
    throw LpUnboundedError("LP is unbounded");

  Eigen::MatrixXd basis_mat(m, m);
  for (int i = 0; i < m; ++i) basis_mat.col(i) = a.col(basis[i]);
  Eigen::VectorXd x_b = Eigen::PartialPivLU<Eigen::MatrixXd>(basis_mat).solve(b);

  LpSolution sol;
  sol.x = Eigen::VectorXd::Zero(n_struct);
  for (int i = 0; i < m; ++i)
    if (basis[i] < n_struct) sol.x[basis[i]] = std::max(x_b[i], 0.0);
  sol.basis = basis;
  sol.ub_binding.resize(m_ub);
  for (int i = 0; i < m_ub; ++i) sol.ub_binding[i] = sol.x[n + i] <= 1e-9;
  sol.objective = lp.c.dot(sol.x.head(n));
  sol.x.conservativeResize(n);
  return sol;
}

}  // namespace mdpstat
