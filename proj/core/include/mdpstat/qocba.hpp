#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "mdpstat/estimation.hpp"
#include "mdpstat/inference.hpp"
#include "mdpstat/mdp.hpp"

namespace mdpstat {

/// A visit-frequency vector in the floored admissible polytope: w >= eta
/// entrywise, sums to one, and satisfies the stationarity balance equations
/// of the exploration chain.
struct Allocation {
  Eigen::VectorXd w;
  double eta = 1e-6;
};

/// Throws unless the allocation invariants hold for the given transition
/// rows: floor, normalization within 1e-9, balance within balance_tol.
void validate_allocation(const Allocation& alloc, const Eigen::MatrixXd& transition,
                         int m_s, int m_a, double balance_tol = 1e-8);

/// The exploration policy realizing the allocation: pi(j|i) proportional to
/// w(i,j) within each state.
Policy policy_from_allocation(const Allocation& alloc, int m_s, int m_a);

struct DiscrepancyEntry {
  int state = 0;
  int action = 0;  // the non-optimal action being compared against a*(state)
  double h = 0.0;
};

/// Relative discrepancies h(i,j) = gap^2 / Var[gap estimate] for every
/// non-optimal action, plus the argmin (the hardest comparison).
struct DiscrepancyTable {
  std::vector<DiscrepancyEntry> entries;
  int argmin_state = -1;
  int argmin_action = -1;
  double min_h = 0.0;
};

DiscrepancyTable relative_discrepancies(const QTable& q, const Eigen::MatrixXd& sigma);

/// Per-comparison cost vectors c(i,j) such that the variance of the
/// estimated gap Q(i,a*(i)) - Q(i,j) equals sum_k c(i,j)(k) / w(k) for every
/// positive allocation w.  This is what makes the allocation program convex
/// in 1/w.
struct CostCoefficients {
  int m_s = 0;
  int m_a = 0;
  std::vector<int> a_star;  // greedy action per state
  struct Pair {
    int state = 0;
    int action = 0;
    Eigen::VectorXd c;
  };
  std::vector<Pair> pairs;
};

/// Expands the sandwich covariance into per-pair inverse-frequency costs and
/// self-checks the expansion against the direct formula on random positive
/// allocations.  Throws AssumptionError on a non-unique argmax unless
/// `force`; ties then break to the lowest action index.
CostCoefficients compute_cost_coefficients(const Eigen::MatrixXd& transition,
                                           const Eigen::VectorXd& sigma2_r, double gamma,
                                           const QTable& q, const ValueVector& v_star,
                                           double tie_tol = 1e-9, bool force = false);

struct AllocationSolverOptions {
  double eta = 1e-6;
  double rel_tol = 1e-4;
  int max_newton_iter = 60;   // per centering step
  int max_outer_iter = 60;
  double barrier_growth = 20.0;
};

struct AllocationDiagnostics {
  /// Best objective seen after each outer iteration; non-increasing.
  std::vector<double> objective_trace;
  int newton_iterations = 0;
  double objective = 0.0;
};

/// min over the floored polytope of max_c sum_k c(k)/w(k), solved in epigraph
/// form by a log-barrier Newton method started from the uniform-policy
/// stationary distribution.  Cost vectors must be nonnegative.
Allocation solve_allocation(const std::vector<Eigen::VectorXd>& cost_vectors,
                            const Eigen::MatrixXd& transition, int m_s, int m_a,
                            const AllocationSolverOptions& opts = {},
                            AllocationDiagnostics* diag = nullptr);

/// Worst-case-gap allocation: minimizes max over comparisons of the
/// gap-normalized variance sum_k c(i,j)(k)/gap(i,j)^2/w(k).
Allocation solve_qocba_allocation(const CostCoefficients& coeffs, const QTable& q,
                                  const Eigen::MatrixXd& transition,
                                  const AllocationSolverOptions& opts = {},
                                  AllocationDiagnostics* diag = nullptr);

/// Aggregate-value-variance allocation: minimizes the asymptotic variance of
/// the rho-weighted optimal value estimate.
Allocation solve_chi_allocation(const ModelParams& params, const Eigen::VectorXd& rho,
                                const AllocationSolverOptions& opts = {},
                                AllocationDiagnostics* diag = nullptr);

struct QocbaOptions {
  int stages = 2;
  std::vector<std::int64_t> batches;  // one entry per stage
  Policy pi0;                         // exploration policy for the first stage
  double alpha = 0.05;
  bool chi_objective = false;  // allocate for the aggregate value instead of selection
  bool pool_stages = true;     // final estimates use all records, not just the last stage
  double tie_tol = 1e-9;
  AllocationSolverOptions solver;
  SolveOptions solve;
};

struct QocbaResult {
  TrajectoryDataset data;
  EmpiricalModel model;
  QTable q_hat;
  Policy pi_hat;
  CovarianceReport report;
  std::vector<Allocation> allocations;  // one per re-solved stage
};

/// Staged exploration: run the current policy for its batch, re-estimate,
/// re-solve the allocation, and switch policies; the chain is never reset
/// between stages.  The allocation is re-solved after each of the first
/// stages-1 batches.  Deterministic given (seed, stream).
QocbaResult run_qocba(const TabularMdp& env, const QocbaOptions& opts, std::uint64_t seed,
                      std::uint64_t stream);

}  // namespace mdpstat
