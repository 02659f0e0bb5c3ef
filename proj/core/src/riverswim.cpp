#include "mdpstat/riverswim.hpp"

#include <cmath>

#include "mdpstat/errors.hpp"

namespace mdpstat {

TabularMdp build_riverswim(const RiverSwimSpec& spec) {
  if (spec.m_s < 2) {
    throw ModelError("RiverSwim needs at least two states");
  }
  if (spec.p_right_success < 0.0 || spec.p_stay < 0.0 || spec.p_left_slip < 0.0 ||
      std::abs(spec.p_right_success + spec.p_stay + spec.p_left_slip - 1.0) > 1e-12) {
    throw ModelError("right-action probabilities must be nonnegative and sum to 1");
  }
  if (spec.reward_noise_var < 0.0) {
    throw ModelError("reward noise variance must be nonnegative");
  }

  const int m_s = spec.m_s;
  const int m_a = 2;
  TabularMdp model;
  model.m_s = m_s;
  model.m_a = m_a;
  model.gamma = spec.gamma;
  model.rho = Eigen::VectorXd::Constant(m_s, 1.0 / m_s);
  model.transition = Eigen::MatrixXd::Zero(m_s * m_a, m_s);
  model.reward.resize(m_s * m_a);

  auto reward_at = [&](double mean) {
    return spec.reward_noise_var > 0.0
               ? ScalarDistribution::gaussian(mean, spec.reward_noise_var)
               : ScalarDistribution::deterministic(mean);
  };

  for (int s = 0; s < m_s; ++s) {
    const int left = pair_index(s, 0, m_a);
    const int right = pair_index(s, 1, m_a);

    model.transition(left, std::max(s - 1, 0)) = 1.0;

    if (s == 0) {
      model.transition(right, 0) = spec.p_left_slip + spec.p_stay;
      model.transition(right, 1) = spec.p_right_success;
    } else if (s == m_s - 1) {
      model.transition(right, s - 1) = spec.p_left_slip;
      model.transition(right, s) = spec.p_stay + spec.p_right_success;
    } else {
      model.transition(right, s - 1) = spec.p_left_slip;
      model.transition(right, s) = spec.p_stay;
      model.transition(right, s + 1) = spec.p_right_success;
    }

    model.reward[left] = reward_at(s == 0 ? spec.r_l : 0.0);
    model.reward[right] = reward_at(s == m_s - 1 ? spec.r_r : 0.0);
  }

  model.validate();
  return model;
}

}  // namespace mdpstat
