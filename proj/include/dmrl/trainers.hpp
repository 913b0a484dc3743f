#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "dmrl/amortizer.hpp"
#include "dmrl/errors.hpp"
#include "dmrl/metrics.hpp"
#include "dmrl/oracle.hpp"
#include "dmrl/policy.hpp"
#include "dmrl/reward.hpp"
#include "dmrl/rng.hpp"

namespace dmrl {

// anchored: TB residual against a frozen offline partition estimate.
// coupled:  TB residual with a per-prompt partition scalar co-trained by SGD.
// grpo:     group-normalized reward maximization (REINFORCE, no clipping).
// sft:      cross-entropy on reward-1 trajectories.
enum class Objective { Anchored, Coupled, Grpo, Sft };

inline std::string objective_name(Objective o) {
  switch (o) {
    case Objective::Anchored: return "anchored";
    case Objective::Coupled: return "coupled";
    case Objective::Grpo: return "grpo";
    case Objective::Sft: return "sft";
  }
  return "?";
}

inline Objective objective_from_name(const std::string& s) {
  if (s == "anchored") return Objective::Anchored;
  if (s == "coupled") return Objective::Coupled;
  if (s == "grpo") return Objective::Grpo;
  if (s == "sft") return Objective::Sft;
  throw ConfigError("unknown objective '" + s + "'");
}

struct TrainConfig {
  Objective objective = Objective::Anchored;
  double beta = 1.0;
  std::size_t group_size = 8;
  double lr_policy = 0.05;
  double lr_log_z = 0.1;  // coupled partition scalar
  std::size_t steps = 1000;
  std::uint64_t seed = 0;
  std::size_t metrics_k = 8;
  // Full on-policy gradient has both the score term and the direct term of
  // the squared residual; disabling the score term gives the practical
  // semi-gradient variant (study flag only).
  bool score_term = true;

  void validate() const {
    if (objective == Objective::Grpo && group_size < 2) {
      throw ConfigError("grpo requires group_size >= 2");
    }
    if ((objective == Objective::Anchored || objective == Objective::Coupled) && beta < 0.0) {
      throw ConfigError("TB objectives require beta >= 0");
    }
    if (group_size < 1) throw ConfigError("group_size must be >= 1");
  }
};

// Everything one prompt contributes to training: its space, reward binding,
// and the reference policy.
struct PromptEnv {
  TrajectorySpace space;
  Prompt prompt;
  RewardSpec spec;
  TabularPolicy pi_ref;
};

// Per-prompt co-trained partition scalar (coupled objective only).
struct CoupledState {
  std::vector<double> log_z_phi;  // one entry per prompt, initialized at 0
};

struct StepRecord {
  std::size_t step = 0;
  double loss = 0.0;       // sampled objective value at this step
  double kl_fwd = 0.0;     // exact KL(pi_theta || tilted target)
  double kl_rev = 0.0;     // exact KL(tilted target || pi_theta)
  double grad_norm = 0.0;  // L2 norm of the applied policy gradient
  double distinct_correct_at_k = 0.0;
  double log_z_phi = std::numeric_limits<double>::quiet_NaN();  // coupled only
};

struct StepResult {
  double loss = 0.0;
  double grad_norm = 0.0;
};

namespace detail {

inline double tb_residual(const TabularPolicy& pi_theta, const PromptEnv& env, double beta,
                          double anchor, const Trajectory& o) {
  return anchor + pi_theta.log_prob(o) - env.pi_ref.log_prob(o) -
         beta * reward_transform(env.prompt, reward(env.spec, env.space, o));
}

inline double apply_update(TabularPolicy& pi_theta, const std::vector<double>& grad, double lr,
                           double sign) {
  double norm2 = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    pi_theta.logits()[i] += sign * lr * grad[i];
    norm2 += grad[i] * grad[i];
  }
  return std::sqrt(norm2);
}

// One descent step on the sampled squared TB residual with a fixed anchor
// scalar. Returns the sampled loss and the mean residual (for the coupled
// scalar update).
inline StepResult tb_step(TabularPolicy& pi_theta, const PromptEnv& env, double beta,
                          double anchor, const TrainConfig& cfg, RngStream& stream,
                          double* mean_residual_out = nullptr) {
  const std::size_t g = cfg.group_size;
  std::vector<double> grad(pi_theta.logits().size(), 0.0);
  double loss = 0.0, mean_r = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    const Trajectory o = pi_theta.sample(stream);
    const double r = tb_residual(pi_theta, env, beta, anchor, o);
    loss += r * r;
    mean_r += r;
    const double coeff = (cfg.score_term ? r * r + 2.0 * r : 2.0 * r) / static_cast<double>(g);
    const std::vector<double> score = pi_theta.score_gradient(o);
    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += coeff * score[j];
  }
  loss /= static_cast<double>(g);
  mean_r /= static_cast<double>(g);
  if (mean_residual_out) *mean_residual_out = mean_r;
  StepResult res;
  res.loss = loss;
  res.grad_norm = apply_update(pi_theta, grad, cfg.lr_policy, -1.0);
  return res;
}

}  // namespace detail

// Stage-3 step: on-policy rollouts, full gradient of the sampled squared
// residual, no gradient through the amortizer.
inline StepResult amortized_anchored_step(TabularPolicy& pi_theta, const PromptEnv& env,
                                          const Amortizer& g, const TrainConfig& cfg,
                                          RngStream& stream) {
  if (!g.frozen()) throw ContractError("amortized_anchored_step: amortizer must be frozen");
  return detail::tb_step(pi_theta, env, cfg.beta, g.predict(env.prompt.features), cfg, stream);
}

// Same residual with a known anchor scalar (e.g. the exact oracle log Z).
inline StepResult anchored_step(TabularPolicy& pi_theta, const PromptEnv& env, double anchor,
                                const TrainConfig& cfg, RngStream& stream) {
  return detail::tb_step(pi_theta, env, cfg.beta, anchor, cfg, stream);
}

// Joint SGD step on the shared squared residual for the policy and the
// per-prompt partition scalar.
inline StepResult coupled_step(TabularPolicy& pi_theta, double& log_z_phi, const PromptEnv& env,
                               const TrainConfig& cfg, RngStream& stream) {
  double mean_r = 0.0;
  StepResult res = detail::tb_step(pi_theta, env, cfg.beta, log_z_phi, cfg, stream, &mean_r);
  log_z_phi -= cfg.lr_log_z * 2.0 * mean_r;  // d/d(logZ) of the mean squared residual
  return res;
}

// REINFORCE with the group-normalized advantage; recorded loss is the
// negated mean raw group reward.
inline StepResult grpo_step(TabularPolicy& pi_theta, const PromptEnv& env, const TrainConfig& cfg,
                            RngStream& stream) {
  const std::size_t g = cfg.group_size;
  if (g < 2) throw ContractError("grpo_step: group size must be >= 2");
  std::vector<Trajectory> rollouts;
  std::vector<double> rewards;
  rollouts.reserve(g);
  for (std::size_t i = 0; i < g; ++i) {
    rollouts.push_back(pi_theta.sample(stream));
    rewards.push_back(static_cast<double>(reward(env.spec, env.space, rollouts.back())));
  }
  const std::vector<double> adv = group_normalize(rewards);
  std::vector<double> grad(pi_theta.logits().size(), 0.0);
  double mean_reward = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    mean_reward += rewards[i];
    if (adv[i] == 0.0) continue;
    const std::vector<double> score = pi_theta.score_gradient(rollouts[i]);
    const double c = adv[i] / static_cast<double>(g);
    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += c * score[j];
  }
  StepResult res;
  res.loss = -mean_reward / static_cast<double>(g);
  res.grad_norm = detail::apply_update(pi_theta, grad, cfg.lr_policy, +1.0);  // ascent
  return res;
}

// One full-batch cross-entropy step toward the empirical distribution of the
// reward-1 teacher trajectories.
inline StepResult sft_step(TabularPolicy& pi_theta, const std::vector<Trajectory>& dataset,
                           const TrainConfig& cfg) {
  if (dataset.empty()) throw ContractError("sft_step: empty dataset");
  std::vector<double> grad(pi_theta.logits().size(), 0.0);
  double ce = 0.0;
  const double inv = 1.0 / static_cast<double>(dataset.size());
  for (const Trajectory& o : dataset) {
    ce -= pi_theta.log_prob(o) * inv;
    const std::vector<double> score = pi_theta.score_gradient(o);
    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += inv * score[j];
  }
  StepResult res;
  res.loss = ce;
  res.grad_norm = detail::apply_update(pi_theta, grad, cfg.lr_policy, +1.0);  // ascent on log-lik
  return res;
}

struct TrainRun {
  TrainConfig cfg;
  StepRecord initial;  // metrics before the first update
  std::vector<StepRecord> records;
  std::vector<TabularPolicy> final_policies;  // one per prompt
  std::vector<TabularPolicy> best_policies;   // best mean KL(pi_theta || target)
  std::size_t best_step = 0;                  // 0 = initial
  double best_kl_fwd = 0.0;
  std::vector<double> log_z_phi;  // coupled only
};

// Anchor source for the anchored objective.
struct AnchorProvider {
  // exact oracle anchor when `exact` is true, otherwise the frozen amortizer
  bool exact = false;
  const Amortizer* amortizer = nullptr;
};

// Loops the appropriate step op over a prompt set; one policy table per
// prompt. Deterministic given the config seed; oracle metrics every step.
inline TrainRun run_training(const TrainConfig& cfg, const std::vector<PromptEnv>& envs,
                             const AnchorProvider& anchor = {},
                             const std::vector<std::vector<Trajectory>>& sft_datasets = {}) {
  cfg.validate();
  if (envs.empty()) throw ContractError("run_training: no prompt envs");
  if (cfg.objective == Objective::Anchored && !anchor.exact &&
      (anchor.amortizer == nullptr || !anchor.amortizer->frozen())) {
    throw ContractError("run_training: anchored objective requires a frozen amortizer or exact anchor");
  }
  if (cfg.objective == Objective::Sft && sft_datasets.size() != envs.size()) {
    throw ContractError("run_training: sft needs one dataset per prompt");
  }

  TrainRun run;
  run.cfg = cfg;
  std::vector<ExactTarget> targets;
  std::vector<double> anchors(envs.size(), 0.0);
  for (std::size_t p = 0; p < envs.size(); ++p) {
    run.final_policies.push_back(envs[p].pi_ref);  // theta starts at the reference
    targets.push_back(exact_tilted_target(envs[p].pi_ref, envs[p].prompt, envs[p].spec, cfg.beta));
    if (cfg.objective == Objective::Anchored) {
      anchors[p] = anchor.exact ? targets[p].log_z : anchor.amortizer->predict(envs[p].prompt.features);
    }
  }
  run.log_z_phi.assign(envs.size(), 0.0);

  std::vector<RngStream> streams;
  for (std::size_t p = 0; p < envs.size(); ++p) {
    streams.push_back(RngStream::keyed(cfg.seed, envs[p].prompt.id, "rollouts"));
  }

  auto record_metrics = [&](std::size_t step, double loss, double grad_norm) {
    StepRecord rec;
    rec.step = step;
    rec.loss = loss;
    rec.grad_norm = grad_norm;
    double zphi = 0.0;
    for (std::size_t p = 0; p < envs.size(); ++p) {
      const std::vector<double> lp = run.final_policies[p].trajectory_log_probs();
      std::vector<double> probs(lp.size());
      for (std::size_t i = 0; i < lp.size(); ++i) probs[i] = std::exp(lp[i]);
      rec.kl_fwd += exact_kl(probs, targets[p].target_probs);
      rec.kl_rev += exact_kl(targets[p].target_probs, probs);
      rec.distinct_correct_at_k +=
          distinct_correct_expected(run.final_policies[p], envs[p].spec, cfg.metrics_k);
      zphi += run.log_z_phi[p];
    }
    const double inv = 1.0 / static_cast<double>(envs.size());
    rec.kl_fwd *= inv;
    rec.kl_rev *= inv;
    rec.distinct_correct_at_k *= inv;
    if (cfg.objective == Objective::Coupled) rec.log_z_phi = zphi * inv;
    return rec;
  };

  // Initial metrics: exact on-policy objective value, no gradient applied.
  {
    double loss0 = 0.0;
    for (std::size_t p = 0; p < envs.size(); ++p) {
      const std::vector<double> lp = run.final_policies[p].trajectory_log_probs();
      std::vector<double> probs(lp.size());
      for (std::size_t i = 0; i < lp.size(); ++i) probs[i] = std::exp(lp[i]);
      const double a = cfg.objective == Objective::Coupled ? run.log_z_phi[p] : anchors[p];
      if (cfg.objective == Objective::Anchored || cfg.objective == Objective::Coupled) {
        loss0 += exact_tb_loss(run.final_policies[p], envs[p].pi_ref, envs[p].prompt, envs[p].spec,
                               cfg.beta, a, probs);
      }
    }
    run.initial = record_metrics(0, loss0 / static_cast<double>(envs.size()), 0.0);
  }
  run.best_kl_fwd = run.initial.kl_fwd;
  run.best_policies = run.final_policies;
  run.best_step = 0;

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    double loss = 0.0, gnorm = 0.0;
    for (std::size_t p = 0; p < envs.size(); ++p) {
      StepResult sr;
      switch (cfg.objective) {
        case Objective::Anchored:
          sr = anchored_step(run.final_policies[p], envs[p], anchors[p], cfg, streams[p]);
          break;
        case Objective::Coupled:
          sr = coupled_step(run.final_policies[p], run.log_z_phi[p], envs[p], cfg, streams[p]);
          break;
        case Objective::Grpo:
          sr = grpo_step(run.final_policies[p], envs[p], cfg, streams[p]);
          break;
        case Objective::Sft:
          sr = sft_step(run.final_policies[p], sft_datasets[p], cfg);
          break;
      }
      loss += sr.loss;
      gnorm += sr.grad_norm;
    }
    const double inv = 1.0 / static_cast<double>(envs.size());
    StepRecord rec = record_metrics(step, loss * inv, gnorm * inv);
    if (rec.kl_fwd < run.best_kl_fwd) {
      run.best_kl_fwd = rec.kl_fwd;
      run.best_policies = run.final_policies;
      run.best_step = step;
    }
    run.records.push_back(rec);
  }
  return run;
}

// ---------------------------------------------------------------------------
// Proposition-verification harnesses
// ---------------------------------------------------------------------------

struct EnvelopeReport {
  double l_anchored = 0.0;  // enumeration-exact on-policy loss with g anchors
  double l_tb = 0.0;        // same with exact log Z anchors
  double sigma_g = 0.0;
  double bound = 0.0;  // sigma^2 + 2 sigma sqrt(L_TB)
  double diff = 0.0;   // |L_anchored - L_TB|
  bool holds = false;
};

// Enumeration-exact loss-perturbation envelope over a prompt set, with one
// policy and one anchor perturbation eta per prompt.
inline EnvelopeReport envelope_check(const std::vector<PromptEnv>& envs,
                                     const std::vector<TabularPolicy>& pi_thetas, double beta,
                                     const std::vector<double>& etas) {
  if (envs.size() != pi_thetas.size() || envs.size() != etas.size() || envs.empty()) {
    throw ContractError("envelope_check: mismatched inputs");
  }
  EnvelopeReport rep;
  double sig2 = 0.0;
  for (std::size_t p = 0; p < envs.size(); ++p) {
    const double log_z = exact_log_partition(envs[p].pi_ref, envs[p].prompt, envs[p].spec, beta);
    const std::vector<double> lp = pi_thetas[p].trajectory_log_probs();
    std::vector<double> probs(lp.size());
    for (std::size_t i = 0; i < lp.size(); ++i) probs[i] = std::exp(lp[i]);
    rep.l_tb += exact_tb_loss(pi_thetas[p], envs[p].pi_ref, envs[p].prompt, envs[p].spec, beta,
                              log_z, probs);
    rep.l_anchored += exact_tb_loss(pi_thetas[p], envs[p].pi_ref, envs[p].prompt, envs[p].spec,
                                    beta, log_z + etas[p], probs);
    sig2 += etas[p] * etas[p];
  }
  const double inv = 1.0 / static_cast<double>(envs.size());
  rep.l_tb *= inv;
  rep.l_anchored *= inv;
  rep.sigma_g = std::sqrt(sig2 * inv);
  rep.bound = rep.sigma_g * rep.sigma_g + 2.0 * rep.sigma_g * std::sqrt(rep.l_tb);
  rep.diff = std::abs(rep.l_anchored - rep.l_tb);
  rep.holds = rep.diff <= rep.bound + 1e-12;
  return rep;
}

// Enumeration-expected gradient of the squared residual at pi_theta set
// exactly to the tilted target, with anchor log Z + eta. On-policy uses the
// full two-term gradient under the target itself; the off-policy variant
// fixes a uniform sampling table (direct term only, since the sampling
// distribution carries no theta dependence).
inline double stationarity_gradient_norm(const PromptEnv& env, double beta, double eta,
                                         bool on_policy) {
  const ExactTarget target = exact_tilted_target(env.pi_ref, env.prompt, env.spec, beta);
  const TabularPolicy pi_theta =
      tilt_policy(env.pi_ref, env.spec, beta * env.prompt.affine_a);
  const std::vector<Trajectory> all = enumerate_trajectories(env.space);
  const double anchor = target.log_z + eta;
  std::vector<double> grad(pi_theta.logits().size(), 0.0);
  for (std::size_t i = 0; i < all.size(); ++i) {
    const double r = detail::tb_residual(pi_theta, env, beta, anchor, all[i]);
    const double mu = on_policy ? target.target_probs[i]
                                : 1.0 / static_cast<double>(all.size());
    const double coeff = mu * (on_policy ? r * r + 2.0 * r : 2.0 * r);
    const std::vector<double> score = pi_theta.score_gradient(all[i]);
    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += coeff * score[j];
  }
  double norm2 = 0.0;
  for (double gv : grad) norm2 += gv * gv;
  return std::sqrt(norm2);
}

}  // namespace dmrl
