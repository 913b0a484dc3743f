#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "dmrl/errors.hpp"
#include "dmrl/rng.hpp"
#include "dmrl/trajectory.hpp"

namespace dmrl {

// Deterministic binary verifier. Three kinds:
//   explicit-set        reward 1 iff the trajectory is in a listed set
//   seeded-hash-density reward 1 with hash-density rho over the space
//   multi-modal-regions reward 1 iff the trajectory starts with one of the
//                       listed token prefixes (each region is a subtree)
struct RewardSpec {
  enum class Kind { ExplicitSet, SeededHashDensity, MultiModalRegions };

  Kind kind = Kind::ExplicitSet;
  std::set<std::string> trajectories;        // explicit-set, encoded form
  double density = 0.0;                      // seeded-hash-density, in (0,1)
  std::uint64_t seed = 0;                    // seeded-hash-density
  std::vector<std::vector<int>> regions;     // multi-modal-regions, token prefixes

  void validate() const {
    if (kind == Kind::SeededHashDensity && !(density > 0.0 && density < 1.0)) {
      throw ConfigError("seeded-hash-density requires density in (0,1)");
    }
  }
};

struct Prompt {
  std::string id;
  std::vector<double> features;
  std::string reward_spec_ref;
  double affine_a = 1.0;  // must stay > 0
  double affine_b = 0.0;

  void validate() const {
    if (!(affine_a > 0.0)) throw ConfigError("prompt '" + id + "': affine_a must be > 0");
  }
};

// Pure 0/1 verifier; identical inputs always produce the identical bit.
inline int reward(const RewardSpec& spec, const TrajectorySpace& space, const Trajectory& o) {
  switch (spec.kind) {
    case RewardSpec::Kind::ExplicitSet:
      return spec.trajectories.count(encode_trajectory(space, o)) ? 1 : 0;
    case RewardSpec::Kind::SeededHashDensity: {
      const std::uint64_t h = mix64(spec.seed ^ fnv1a64(encode_trajectory(space, o)));
      const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
      return u < spec.density ? 1 : 0;
    }
    case RewardSpec::Kind::MultiModalRegions: {
      for (const auto& region : spec.regions) {
        if (region.size() <= o.tokens.size() &&
            std::equal(region.begin(), region.end(), o.tokens.begin())) {
          return 1;
        }
      }
      return 0;
    }
  }
  throw ConfigError("unknown reward spec kind");
}

// Fixed prompt-conditional affine transform of the verifier bit.
inline double reward_transform(const Prompt& q, double r) {
  return q.affine_a * r + q.affine_b;
}

// Group-normalized rewards: (r_i - mean) / max(std, eps_floor) with the
// population standard deviation. An exactly zero-variance group yields all
// zeros (no update signal) rather than a divide-by-zero.
inline std::vector<double> group_normalize(const std::vector<double>& rewards,
                                           double eps_floor = 1e-6) {
  const std::size_t g = rewards.size();
  if (g < 2) throw ContractError("group_normalize requires a group of size >= 2");
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(g);
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(g);
  const double s = std::sqrt(var);
  std::vector<double> out(g, 0.0);
  if (s == 0.0) return out;
  const double denom = std::max(s, eps_floor);
  for (std::size_t i = 0; i < g; ++i) out[i] = (rewards[i] - mean) / denom;
  return out;
}

}  // namespace dmrl
