#pragma once

#include <string>

#include "mdpstat/constrained.hpp"
#include "mdpstat/estimation.hpp"
#include "mdpstat/inference.hpp"
#include "mdpstat/mdp.hpp"

namespace mdpstat {

/// MDP definition file: JSON with fields m_s, m_a, gamma, rho, transition
/// (one row per flat pair index), rewards (list of {family, ...} specs with
/// family deterministic|gaussian|bernoulli).  Rows must sum to one within
/// 1e-9 and are renormalized exactly on load.  A constrained problem adds
/// "costs" (same shape as rewards) and "budget".
TabularMdp load_mdp(const std::string& path);
void save_mdp(const TabularMdp& model, const std::string& path);

ConstrainedMdp load_constrained_mdp(const std::string& path);
void save_constrained_mdp(const ConstrainedMdp& cm, const std::string& path);

/// True when the file carries the constrained extension fields.
bool is_constrained_mdp_file(const std::string& path);

/// Dataset dump: comma-delimited with header "t,s,a,r,s_next".  The cost
/// channel is not persisted.
void save_dataset(const TrajectoryDataset& data, const std::string& path);
TrajectoryDataset load_dataset(const std::string& path, int m_s, int m_a);

/// Covariance report as structured text: scalars and vectors on named lines,
/// matrices as "name rows cols" followed by row-major rows.
void save_report(const CovarianceReport& report, const std::string& path);
CovarianceReport load_report(const std::string& path);

/// Fixed formatting used by all result files: 6 significant digits.
std::string format_sig6(double x);

}  // namespace mdpstat
