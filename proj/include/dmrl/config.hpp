#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmrl/errors.hpp"
#include "dmrl/is_estimator.hpp"
#include "dmrl/reward.hpp"
#include "dmrl/trainers.hpp"
#include "dmrl/trajectory.hpp"

namespace dmrl {

using json = nlohmann::json;

struct Stage1Config {
  std::size_t n_samples = 8;
  Aggregator aggregator = Aggregator::LSE;
};

struct Stage2Config {
  AmortizerKind kind = AmortizerKind::LinearRidge;
  double ridge_lambda = 1e-6;
  std::uint64_t split_seed = 0;
  std::size_t epochs = 400;
  double learning_rate = 0.02;
  std::size_t hidden_width = 64;
};

struct Stage3Config {
  TrainConfig train;
  bool exact_anchor = false;  // override: use the oracle log Z instead of g
};

struct PoliciesConfig {
  std::string ref_kind = "uniform";  // or "random"
  std::uint64_t ref_seed = 1;
  double ref_scale = 1.0;
  double proposal_tilt = 0.0;  // proposal = ref tilted toward reward by this much
};

struct SweepConfig {
  std::vector<double> beta;
  std::vector<std::size_t> n_samples;
  std::vector<double> proposal_strength;
  std::vector<std::string> objective;
  std::size_t label_replications = 200;
};

struct NStudyConfig {
  std::size_t pool_size = 32;
  std::vector<std::size_t> subsample_sizes = {2, 4, 8, 16};
  std::size_t replications = 400;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  TrajectorySpace space;
  std::map<std::string, RewardSpec> reward_specs;
  std::vector<Prompt> prompts;
  PoliciesConfig policies;
  Stage1Config stage1;
  Stage2Config stage2;
  Stage3Config stage3;
  SweepConfig sweep;
  NStudyConfig nstudy;
  json raw;  // exact parsed config, echoed into every summary
};

namespace detail {

inline void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                                const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw ConfigError(where + ": unknown key '" + it.key() + "'");
    }
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for '" + key + "': " + e.what());
  }
}

template <typename T>
T require(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing required key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": bad value for '" + key + "': " + e.what());
  }
}

inline RewardSpec parse_reward_spec(const json& j, const std::string& name) {
  const std::string where = "reward_specs." + name;
  RewardSpec spec;
  const std::string kind = require<std::string>(j, "kind", where);
  if (kind == "explicit-set") {
    reject_unknown_keys(j, {"kind", "trajectories"}, where);
    spec.kind = RewardSpec::Kind::ExplicitSet;
    for (const auto& t : require<std::vector<std::string>>(j, "trajectories", where)) {
      spec.trajectories.insert(t);
    }
  } else if (kind == "seeded-hash-density") {
    reject_unknown_keys(j, {"kind", "density", "seed"}, where);
    spec.kind = RewardSpec::Kind::SeededHashDensity;
    spec.density = require<double>(j, "density", where);
    spec.seed = require<std::uint64_t>(j, "seed", where);
  } else if (kind == "multi-modal-regions") {
    reject_unknown_keys(j, {"kind", "regions"}, where);
    spec.kind = RewardSpec::Kind::MultiModalRegions;
    spec.regions = require<std::vector<std::vector<int>>>(j, "regions", where);
  } else {
    throw ConfigError(where + ": unknown reward spec kind '" + kind + "'");
  }
  spec.validate();
  return spec;
}

}  // namespace detail

inline RunConfig parse_config(const json& j) {
  using detail::get_or;
  using detail::reject_unknown_keys;
  using detail::require;
  reject_unknown_keys(j,
                      {"seed", "out_dir", "enumeration_cap", "space", "reward_specs", "prompts",
                       "policies", "stage1", "stage2", "stage3", "sweep", "nstudy"},
                      "config");
  RunConfig cfg;
  cfg.raw = j;
  cfg.seed = require<std::uint64_t>(j, "seed", "config");
  cfg.out_dir = get_or<std::string>(j, "out_dir", "out");

  const json& sp = j.contains("space") ? j.at("space") : throw ConfigError("config: missing 'space'");
  reject_unknown_keys(sp, {"alphabet_size", "max_len"}, "space");
  cfg.space.alphabet_size = require<int>(sp, "alphabet_size", "space");
  cfg.space.max_len = require<int>(sp, "max_len", "space");
  cfg.space.enumeration_cap = get_or<std::uint64_t>(j, "enumeration_cap", 2'000'000);
  cfg.space.validate();

  if (!j.contains("reward_specs")) throw ConfigError("config: missing 'reward_specs'");
  for (auto it = j.at("reward_specs").begin(); it != j.at("reward_specs").end(); ++it) {
    cfg.reward_specs[it.key()] = detail::parse_reward_spec(it.value(), it.key());
  }

  if (!j.contains("prompts")) throw ConfigError("config: missing 'prompts'");
  std::size_t feature_dim = 0;
  for (const json& pj : j.at("prompts")) {
    reject_unknown_keys(pj, {"id", "features", "reward_spec", "affine_a", "affine_b"}, "prompts[]");
    Prompt p;
    p.id = require<std::string>(pj, "id", "prompts[]");
    p.features = require<std::vector<double>>(pj, "features", "prompts[]");
    p.reward_spec_ref = require<std::string>(pj, "reward_spec", "prompts[]");
    p.affine_a = get_or<double>(pj, "affine_a", 1.0);
    p.affine_b = get_or<double>(pj, "affine_b", 0.0);
    p.validate();
    if (!cfg.reward_specs.count(p.reward_spec_ref)) {
      throw ConfigError("prompt '" + p.id + "' references unknown reward spec '" +
                        p.reward_spec_ref + "'");
    }
    if (cfg.prompts.empty()) feature_dim = p.features.size();
    if (p.features.size() != feature_dim) {
      throw ConfigError("prompt '" + p.id + "': feature length differs from the space-wide dim");
    }
    cfg.prompts.push_back(std::move(p));
  }
  if (cfg.prompts.empty()) throw ConfigError("config: at least one prompt is required");

  if (j.contains("policies")) {
    const json& pj = j.at("policies");
    reject_unknown_keys(pj, {"ref_kind", "ref_seed", "ref_scale", "proposal_tilt"}, "policies");
    cfg.policies.ref_kind = get_or<std::string>(pj, "ref_kind", "uniform");
    cfg.policies.ref_seed = get_or<std::uint64_t>(pj, "ref_seed", 1);
    cfg.policies.ref_scale = get_or<double>(pj, "ref_scale", 1.0);
    cfg.policies.proposal_tilt = get_or<double>(pj, "proposal_tilt", 0.0);
    if (cfg.policies.ref_kind != "uniform" && cfg.policies.ref_kind != "random") {
      throw ConfigError("policies.ref_kind must be 'uniform' or 'random'");
    }
  }

  if (j.contains("stage1")) {
    const json& sj = j.at("stage1");
    reject_unknown_keys(sj, {"n_samples", "aggregator"}, "stage1");
    cfg.stage1.n_samples = get_or<std::size_t>(sj, "n_samples", 8);
    const std::string agg = get_or<std::string>(sj, "aggregator", "LSE");
    if (agg == "LSE") cfg.stage1.aggregator = Aggregator::LSE;
    else if (agg == "GM") cfg.stage1.aggregator = Aggregator::GM;
    else if (agg == "LINEAR-LOG") cfg.stage1.aggregator = Aggregator::LinearLog;
    else throw ConfigError("stage1.aggregator must be LSE, GM, or LINEAR-LOG");
  }

  if (j.contains("stage2")) {
    const json& sj = j.at("stage2");
    reject_unknown_keys(sj, {"kind", "ridge_lambda", "split_seed", "epochs", "learning_rate",
                             "hidden_width"},
                        "stage2");
    const std::string kind = get_or<std::string>(sj, "kind", "linear-ridge");
    if (kind == "linear-ridge") cfg.stage2.kind = AmortizerKind::LinearRidge;
    else if (kind == "one-hidden-layer") cfg.stage2.kind = AmortizerKind::OneHiddenLayer;
    else throw ConfigError("stage2.kind must be 'linear-ridge' or 'one-hidden-layer'");
    cfg.stage2.ridge_lambda = get_or<double>(sj, "ridge_lambda", 1e-6);
    cfg.stage2.split_seed = get_or<std::uint64_t>(sj, "split_seed", 0);
    cfg.stage2.epochs = get_or<std::size_t>(sj, "epochs", 400);
    cfg.stage2.learning_rate = get_or<double>(sj, "learning_rate", 0.02);
    cfg.stage2.hidden_width = get_or<std::size_t>(sj, "hidden_width", 64);
  }

  if (j.contains("stage3")) {
    const json& sj = j.at("stage3");
    reject_unknown_keys(sj, {"objective", "beta", "group_size", "steps", "lr_policy", "lr_log_z",
                             "anchor", "metrics_k", "score_term"},
                        "stage3");
    cfg.stage3.train.objective = objective_from_name(get_or<std::string>(sj, "objective", "anchored"));
    cfg.stage3.train.beta = get_or<double>(sj, "beta", 1.0);
    cfg.stage3.train.group_size = get_or<std::size_t>(sj, "group_size", 8);
    cfg.stage3.train.steps = get_or<std::size_t>(sj, "steps", 1000);
    cfg.stage3.train.lr_policy = get_or<double>(sj, "lr_policy", 0.05);
    cfg.stage3.train.lr_log_z = get_or<double>(sj, "lr_log_z", 0.1);
    cfg.stage3.train.metrics_k = get_or<std::size_t>(sj, "metrics_k", 8);
    cfg.stage3.train.score_term = get_or<bool>(sj, "score_term", true);
    const std::string anchor = get_or<std::string>(sj, "anchor", "amortizer");
    if (anchor == "exact") cfg.stage3.exact_anchor = true;
    else if (anchor != "amortizer") throw ConfigError("stage3.anchor must be 'amortizer' or 'exact'");
    cfg.stage3.train.validate();
  }
  cfg.stage3.train.seed = cfg.seed;

  if (j.contains("sweep")) {
    const json& sj = j.at("sweep");
    reject_unknown_keys(sj, {"beta", "n_samples", "proposal_strength", "objective",
                             "label_replications"},
                        "sweep");
    cfg.sweep.beta = get_or<std::vector<double>>(sj, "beta", {});
    cfg.sweep.n_samples = get_or<std::vector<std::size_t>>(sj, "n_samples", {});
    cfg.sweep.proposal_strength = get_or<std::vector<double>>(sj, "proposal_strength", {});
    cfg.sweep.objective = get_or<std::vector<std::string>>(sj, "objective", {});
    cfg.sweep.label_replications = get_or<std::size_t>(sj, "label_replications", 200);
  }

  if (j.contains("nstudy")) {
    const json& sj = j.at("nstudy");
    reject_unknown_keys(sj, {"pool_size", "subsample_sizes", "replications"}, "nstudy");
    cfg.nstudy.pool_size = get_or<std::size_t>(sj, "pool_size", 32);
    cfg.nstudy.subsample_sizes = get_or<std::vector<std::size_t>>(sj, "subsample_sizes",
                                                                  {2, 4, 8, 16});
    cfg.nstudy.replications = get_or<std::size_t>(sj, "replications", 400);
  }

  return cfg;
}

inline RunConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return parse_config(j);
}

// Reference policy shared by every prompt of a run.
inline TabularPolicy build_reference_policy(const RunConfig& cfg) {
  if (cfg.policies.ref_kind == "uniform") return TabularPolicy::uniform(cfg.space);
  return TabularPolicy::random(cfg.space, RngStream::keyed(cfg.policies.ref_seed, "ref-policy"),
                               cfg.policies.ref_scale);
}

inline std::vector<PromptEnv> build_envs(const RunConfig& cfg) {
  const TabularPolicy pi_ref = build_reference_policy(cfg);
  std::vector<PromptEnv> envs;
  for (const Prompt& p : cfg.prompts) {
    envs.push_back(PromptEnv{cfg.space, p, cfg.reward_specs.at(p.reward_spec_ref), pi_ref});
  }
  return envs;
}

// Stage-1 proposal for one prompt: the reference tilted toward that prompt's
// reward by the configured strength (0 = the reference itself).
inline TabularPolicy build_proposal(const RunConfig& cfg, const PromptEnv& env, double tilt) {
  if (tilt == 0.0) return env.pi_ref;
  return tilt_policy(env.pi_ref, env.spec, tilt);
}

}  // namespace dmrl
