#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dmrl/errors.hpp"
#include "dmrl/policy.hpp"
#include "dmrl/reward.hpp"
#include "dmrl/trajectory.hpp"

namespace dmrl {

// Exact reward-tilted target for one prompt.
struct ExactTarget {
  double log_z = 0.0;
  double beta = 0.0;
  std::vector<double> target_probs;  // aligned with enumerate_trajectories
};

// Per-trajectory beta * r~ values, enumeration order.
inline std::vector<double> tilt_exponents(const TrajectorySpace& space, const Prompt& q,
                                          const RewardSpec& spec, double beta) {
  std::vector<double> out;
  out.reserve(trajectory_count(space));
  for (const Trajectory& o : enumerate_trajectories(space)) {
    out.push_back(beta * reward_transform(q, reward(spec, space, o)));
  }
  return out;
}

// log Z(q) = log sum_o pi_ref(o) exp(beta r~(q,o)), max-shifted.
inline double exact_log_partition(const TabularPolicy& pi_ref, const Prompt& q,
                                  const RewardSpec& spec, double beta) {
  const std::vector<double> lp = pi_ref.trajectory_log_probs();
  const std::vector<double> tilt = tilt_exponents(pi_ref.space(), q, spec, beta);
  std::vector<double> terms(lp.size());
  for (std::size_t i = 0; i < lp.size(); ++i) terms[i] = lp[i] + tilt[i];
  return logsumexp(terms);
}

inline ExactTarget exact_tilted_target(const TabularPolicy& pi_ref, const Prompt& q,
                                       const RewardSpec& spec, double beta) {
  const std::vector<double> lp = pi_ref.trajectory_log_probs();
  const std::vector<double> tilt = tilt_exponents(pi_ref.space(), q, spec, beta);
  std::vector<double> terms(lp.size());
  for (std::size_t i = 0; i < lp.size(); ++i) terms[i] = lp[i] + tilt[i];
  ExactTarget t;
  t.beta = beta;
  t.log_z = logsumexp(terms);
  t.target_probs.resize(terms.size());
  for (std::size_t i = 0; i < terms.size(); ++i) t.target_probs[i] = std::exp(terms[i] - t.log_z);
  return t;
}

// KL(p || q) over a shared support; requires q > 0 wherever p > 0.
inline double exact_kl(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw ContractError("exact_kl: table sizes differ");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) {
      throw ContractError("exact_kl: support violation at index " + std::to_string(i));
    }
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return kl;
}

// Exact moments of the importance weight w = (pi_ref / p_T) exp(beta r~)
// under p_T, by enumeration.
struct WeightStats {
  double z = 0.0;             // E_pT[w], identically the partition function
  double var = 0.0;           // Var_pT(w)
  double cv2 = 0.0;           // var / z^2
  double ess_fraction = 0.0;  // 1 / (1 + cv2)
};

inline WeightStats exact_weight_stats(const TabularPolicy& pi_ref, const TabularPolicy& p_t,
                                      const Prompt& q, const RewardSpec& spec, double beta) {
  const TrajectorySpace& space = pi_ref.space();
  const std::vector<double> lref = pi_ref.trajectory_log_probs();
  const std::vector<double> lprop = p_t.trajectory_log_probs();
  const std::vector<double> tilt = tilt_exponents(space, q, spec, beta);
  const std::vector<Trajectory> all = enumerate_trajectories(space);
  double z = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < lref.size(); ++i) {
    const double log_w = lref[i] - lprop[i] + tilt[i];
    if (!std::isfinite(lprop[i]) && std::isfinite(lref[i] + tilt[i])) {
      throw ContractError("absolute continuity violated by trajectory " +
                          encode_trajectory(space, all[i]));
    }
    const double pt = std::exp(lprop[i]);
    const double w = std::exp(log_w);
    z += pt * w;
    m2 += pt * w * w;
  }
  WeightStats s;
  s.z = z;
  s.var = std::max(0.0, m2 - z * z);  // guard the rounding of a perfect proposal
  s.cv2 = s.var / (z * z);
  s.ess_fraction = 1.0 / (1.0 + s.cv2);
  return s;
}

// E_{o~sampling}[ (logZ_value + log pi_theta - log pi_ref - beta r~)^2 ],
// enumerated exactly.
inline double exact_tb_loss(const TabularPolicy& pi_theta, const TabularPolicy& pi_ref,
                            const Prompt& q, const RewardSpec& spec, double beta,
                            double log_z_value, const std::vector<double>& sampling) {
  const std::vector<double> lth = pi_theta.trajectory_log_probs();
  const std::vector<double> lref = pi_ref.trajectory_log_probs();
  const std::vector<double> tilt = tilt_exponents(pi_theta.space(), q, spec, beta);
  if (sampling.size() != lth.size()) throw ContractError("exact_tb_loss: bad sampling table");
  double loss = 0.0;
  for (std::size_t i = 0; i < lth.size(); ++i) {
    const double r = log_z_value + lth[i] - lref[i] - tilt[i];
    loss += sampling[i] * r * r;
  }
  return loss;
}

// Shannon entropy of a probability table (natural log).
inline double entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return h;
}

}  // namespace dmrl
