#pragma once

#include <vector>

#include <Eigen/Core>

#include "mdpstat/estimation.hpp"
#include "mdpstat/inference.hpp"
#include "mdpstat/mdp.hpp"

namespace mdpstat {

/// Ordered subset of states used as interpolation knots.  The state index is
/// the 1-D position, so both boundary states must be present for the
/// interpolation to be defined everywhere.
struct RepresentativeSet {
  std::vector<int> s0;

  int size() const { return static_cast<int>(s0.size()); }
  /// Throws ModelError unless strictly increasing, in range, and containing
  /// both 0 and m_s-1.
  void validate(int m_s) const;
  /// Reduced flat index of (s0[i], a).
  int reduced_index(int i, int a, int m_a) const { return i * m_a + a; }
};

/// Knots 0, stride, 2*stride, ..., with the last state appended when the
/// stride does not land on it.
RepresentativeSet stride_representative_set(int m_s, int stride);

/// Constant Jacobian of the lift from knot values to all states: each row is
/// a convex combination of the two bracketing knots (a unit vector at a
/// knot), identical across actions.  Rows sum to one with at most two
/// nonzeros, which makes the lift a max-norm non-expansion.
struct GeneralizationMap {
  Eigen::MatrixXd jacobian;  // (m_s*m_a) x (|s0|*m_a)
};

GeneralizationMap interp_jacobian(int m_s, int m_a, const RepresentativeSet& s0);

struct ApproxSolution {
  QTable q;                // fixed point of lift . restrict . backup, full table
  Eigen::VectorXd q_s0;    // reduced table: restrict(backup(q))
  int iterations = 0;
  double residual = 0.0;   // max-norm step at termination, reduced space
};

/// Approximate optimal Q: iterates the backup on the reduced vector and lifts
/// through the map.  Only the rows of mu and transition at representative
/// pairs are read, so entries elsewhere may be unknown (NaN).
ApproxSolution approx_solve_q(const Eigen::VectorXd& mu, const Eigen::MatrixXd& transition,
                              double gamma, int m_s, int m_a, const RepresentativeSet& s0,
                              const GeneralizationMap& map, const SolveOptions& opts = {});

/// Model inputs for the reduced-information covariance: entries off the
/// representative pairs may be NaN; only representative rows are consulted.
/// Throws UnvisitedError if a representative pair was never visited.
ModelParams approx_params_from_empirical(const EmpiricalModel& est, double gamma,
                                         const RepresentativeSet& s0);

/// Asymptotic covariance of the approximate Q estimate over all pairs:
/// the reduced-pair sampling noise pushed through the lifted resolvent.
/// Requires a unique greedy argmax of the approximate Q and positive visit
/// frequencies at every representative pair.
Eigen::MatrixXd approx_q_covariance(const ModelParams& params, const RepresentativeSet& s0,
                                    const GeneralizationMap& map,
                                    const CovarianceOptions& opts = {});

}  // namespace mdpstat
