#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dmrl/errors.hpp"
#include "dmrl/oracle.hpp"
#include "dmrl/policy.hpp"
#include "dmrl/reward.hpp"

namespace dmrl {

struct DiversityReport {
  std::string prompt_id;
  std::size_t k = 0;
  double pass_at_k = 0.0;
  double distinct_correct_expected = 0.0;
  double mass_on_correct = 0.0;
  double mode_entropy = 0.0;
};

// Exact policy mass on the reward-1 set.
inline double mass_on_correct(const TabularPolicy& policy, const RewardSpec& spec) {
  const std::vector<double> lp = policy.trajectory_log_probs();
  const std::vector<Trajectory> all = enumerate_trajectories(policy.space());
  double mass = 0.0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (reward(spec, policy.space(), all[i])) mass += std::exp(lp[i]);
  }
  return mass;
}

// 1 - (1 - p_correct)^k, with p_correct the exact mass on the reward-1 set.
inline double pass_at_k_exact(const TabularPolicy& policy, const RewardSpec& spec, std::size_t k) {
  const double p = mass_on_correct(policy, spec);
  return 1.0 - std::pow(1.0 - p, static_cast<double>(k));
}

// Exact expected number of distinct reward-1 trajectories among k samples:
// sum over correct o of 1 - (1 - pi(o))^k.
inline double distinct_correct_expected(const TabularPolicy& policy, const RewardSpec& spec,
                                        std::size_t k) {
  const std::vector<double> lp = policy.trajectory_log_probs();
  const std::vector<Trajectory> all = enumerate_trajectories(policy.space());
  double total = 0.0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (!reward(spec, policy.space(), all[i])) continue;
    total += 1.0 - std::pow(1.0 - std::exp(lp[i]), static_cast<double>(k));
  }
  return total;
}

// Shannon entropy of the policy restricted and renormalized to the reward-1
// set. Requires positive correct mass.
inline double mode_entropy(const TabularPolicy& policy, const RewardSpec& spec) {
  const std::vector<double> lp = policy.trajectory_log_probs();
  const std::vector<Trajectory> all = enumerate_trajectories(policy.space());
  std::vector<double> correct;
  double mass = 0.0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (reward(spec, policy.space(), all[i])) {
      correct.push_back(std::exp(lp[i]));
      mass += correct.back();
    }
  }
  if (mass <= 0.0) throw ContractError("mode_entropy: zero mass on the correct set");
  double h = 0.0;
  for (double p : correct) {
    const double c = p / mass;
    if (c > 0.0) h -= c * std::log(c);
  }
  return h;
}

inline DiversityReport diversity_report(const TabularPolicy& policy, const RewardSpec& spec,
                                        const std::string& prompt_id, std::size_t k) {
  DiversityReport r;
  r.prompt_id = prompt_id;
  r.k = k;
  r.mass_on_correct = mass_on_correct(policy, spec);
  r.pass_at_k = pass_at_k_exact(policy, spec, k);
  r.distinct_correct_expected = distinct_correct_expected(policy, spec, k);
  r.mode_entropy = r.mass_on_correct > 0.0 ? mode_entropy(policy, spec) : 0.0;
  return r;
}

}  // namespace dmrl
