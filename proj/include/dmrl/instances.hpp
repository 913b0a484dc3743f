#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dmrl/oracle.hpp"
#include "dmrl/policy.hpp"
#include "dmrl/reward.hpp"
#include "dmrl/trainers.hpp"

namespace dmrl {

// Canonical desk-scale instances reused by the verification suite, the
// acceptance run, and the bundled configs.

// Binary one-step instance: two trajectories {S, 0}, uniform reference,
// reward ln 2 on trajectory "0" (affine_a = ln 2 on the binary verifier),
// beta = 1. Exact values: log Z = ln(3/2), target = (1/3 on S, 2/3 on 0).
struct CounterexampleInstance {
  PromptEnv env;
  double beta = 1.0;
  std::size_t rewarded_index = 1;  // enumeration index of trajectory "0"

  static CounterexampleInstance make() {
    CounterexampleInstance inst;
    inst.env.space = TrajectorySpace{1, 1};
    inst.env.prompt.id = "counterexample";
    inst.env.prompt.features = {1.0};
    inst.env.prompt.reward_spec_ref = "win";
    inst.env.prompt.affine_a = std::log(2.0);
    inst.env.prompt.affine_b = 0.0;
    inst.env.spec.kind = RewardSpec::Kind::ExplicitSet;
    inst.env.spec.trajectories = {"0"};
    inst.env.pi_ref = TabularPolicy::uniform(inst.env.space);
    return inst;
  }

  // Policy with probability p on the rewarded trajectory "0".
  TabularPolicy policy_with_p(double p) const {
    TabularPolicy pi = TabularPolicy::uniform(env.space);
    pi.logits()[0] = std::log(1.0 - p);  // STOP -> trajectory "S"
    pi.logits()[1] = std::log(p);        // token 0 -> trajectory "0"
    return pi;
  }
};

// Seeded random environment: random full-support reference on a small space
// with a hash-density reward. Proposal defaults to the reference.
inline PromptEnv random_env(std::uint64_t seed, int alphabet_size = 2, int max_len = 2,
                            double density = 0.3, double ref_scale = 0.8) {
  PromptEnv env;
  env.space = TrajectorySpace{alphabet_size, max_len};
  env.prompt.id = "rand" + std::to_string(seed);
  env.prompt.features = {static_cast<double>(seed % 7), 1.0};
  env.prompt.reward_spec_ref = "hash";
  env.spec.kind = RewardSpec::Kind::SeededHashDensity;
  env.spec.density = density;
  env.spec.seed = seed * 1000 + 17;
  env.pi_ref = TabularPolicy::random(env.space, RngStream::keyed(seed, "random-env"), ref_scale);
  return env;
}

// First `count` seeds whose exact CV^2 (proposal = reference) lies in
// [lo, hi] at the given beta. Deterministic.
inline std::vector<PromptEnv> random_envs_with_cv2(std::size_t count, double beta, double lo,
                                                   double hi) {
  std::vector<PromptEnv> out;
  for (std::uint64_t seed = 1; out.size() < count && seed < 1000; ++seed) {
    PromptEnv env = random_env(seed);
    const double cv2 = exact_weight_stats(env.pi_ref, env.pi_ref, env.prompt, env.spec, beta).cv2;
    if (cv2 >= lo && cv2 <= hi) out.push_back(std::move(env));
  }
  return out;
}

// Multi-modal instance on V=3, T=3: two rewarded subtrees.
inline PromptEnv multimodal_env(double affine_a = 1.0) {
  PromptEnv env;
  env.space = TrajectorySpace{3, 3};
  env.prompt.id = "multimodal";
  env.prompt.features = {1.0, 0.5};
  env.prompt.reward_spec_ref = "regions";
  env.prompt.affine_a = affine_a;
  env.spec.kind = RewardSpec::Kind::MultiModalRegions;
  env.spec.regions = {{0, 0}, {2}};
  env.pi_ref = TabularPolicy::uniform(env.space);
  return env;
}

// Two-mode reward instance with an asymmetric reference, for the
// mode-collapse comparison. Correct set: the two full-length repeats.
inline PromptEnv two_mode_env(std::uint64_t seed) {
  PromptEnv env;
  env.space = TrajectorySpace{2, 3};
  env.prompt.id = "twomode" + std::to_string(seed);
  env.prompt.features = {1.0};
  env.prompt.reward_spec_ref = "modes";
  env.spec.kind = RewardSpec::Kind::ExplicitSet;
  env.spec.trajectories = {"0-0-0", "1-1-1"};
  env.pi_ref = TabularPolicy::random(env.space, RngStream::keyed(seed, "two-mode-ref"), 0.5);
  return env;
}

}  // namespace dmrl
