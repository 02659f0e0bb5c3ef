#pragma once

#include <vector>

#include <Eigen/Core>

#include "mdpstat/errors.hpp"

namespace mdpstat {

/// Dense linear program over x >= 0:
///   optimize c^T x  subject to  a_eq x = b_eq,  a_ub x <= b_ub.
/// Empty constraint blocks are allowed (0-row matrices).
struct LpProblem {
  bool maximize = false;
  Eigen::VectorXd c;
  Eigen::MatrixXd a_eq;
  Eigen::VectorXd b_eq;
  Eigen::MatrixXd a_ub;
  Eigen::VectorXd b_ub;
};

struct LpSolution {
  Eigen::VectorXd x;
  double objective = 0.0;
  /// Basic variable indices in [0, n + #ub): structural variables first,
  /// then one slack per inequality row.
  std::vector<int> basis;
  /// Per inequality row: slack at zero, i.e. the row holds with equality.
  std::vector<bool> ub_binding;
};

/// Two-phase primal simplex with Bland's anti-cycling rule (lowest-index
/// entering variable, lowest-index tie break on the ratio test), which makes
/// the returned basic solution deterministic.  Throws LpInfeasibleError or
/// LpUnboundedError.
LpSolution solve_lp(const LpProblem& lp);

}  // namespace mdpstat
