#pragma once

#include "mdpstat/mdp.hpp"

namespace mdpstat {

/// Chain of m_s states with two actions: 0 swims left (deterministic move
/// toward state 0), 1 swims right against the current.  At interior states
/// the right action slips left with p_left_slip, stays with p_stay, and
/// advances with p_right_success; at state 0 the slip mass folds into
/// staying, at the last state the advance mass folds into staying.  Rewards
/// are zero except r_l at (0, left) and r_r at (m_s-1, right); setting
/// reward_noise_var > 0 makes every reward Gaussian around its mean.
struct RiverSwimSpec {
  int m_s = 6;
  double p_right_success = 0.3;
  double p_stay = 0.6;
  double p_left_slip = 0.1;
  double r_l = 1.0;
  double r_r = 10.0;
  double reward_noise_var = 0.0;
  double gamma = 0.95;
};

/// Materializes the spec with uniform initial distribution.
TabularMdp build_riverswim(const RiverSwimSpec& spec);

}  // namespace mdpstat
