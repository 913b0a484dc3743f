// dmrl: desk-scale distribution-matching RL laboratory.
//
// Subcommands: pipeline, verify-props, sweep, nstudy, metrics, oracle-dump.
// Exit codes: 0 success, 1 assertion failure, 2 configuration error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "dmrl/config.hpp"
#include "dmrl/errors.hpp"
#include "dmrl/io.hpp"
#include "dmrl/pipeline.hpp"
#include "dmrl/policy_io.hpp"
#include "dmrl/verify.hpp"

namespace fs = std::filesystem;

namespace {

dmrl::RunConfig load_config(const std::string& path, std::uint64_t* seed_override,
                            std::string* out_override) {
  dmrl::RunConfig cfg = dmrl::parse_config_text(dmrl::read_file(path));
  if (seed_override) {
    cfg.seed = *seed_override;
    cfg.stage3.train.seed = *seed_override;
  }
  // Output dir precedence: --out flag, then DMRL_OUT_DIR, then the config.
  if (out_override && !out_override->empty()) {
    cfg.out_dir = *out_override;
  } else if (const char* env = std::getenv("DMRL_OUT_DIR")) {
    cfg.out_dir = env;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale distribution-matching RL laboratory"};
  app.require_subcommand(1);

  std::string config_path, out_dir, axis;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t workers = std::thread::hardware_concurrency();
  if (workers == 0) workers = 1;

  auto add_common = [&](CLI::App* sub, bool need_config) {
    auto* c = sub->add_option("--config", config_path, "config file path");
    if (need_config) c->required();
    sub->add_option("--seed", seed, "global seed override")->each([&](const std::string&) {
      seed_set = true;
    });
    sub->add_option("--out", out_dir, "output directory override");
    sub->add_option("--workers", workers, "worker pool size");
  };

  CLI::App* pipeline = app.add_subcommand("pipeline", "run Stages 1-3 end to end");
  add_common(pipeline, true);

  CLI::App* verify = app.add_subcommand("verify-props", "proposition verification suite");
  add_common(verify, false);
  bool break_gm = false, nonconst_eta = false;
  verify->add_flag("--inject-broken-gm", break_gm,
                   "fault injection: off-by-one divisor in the GM aggregator");
  verify->add_flag("--inject-prompt-eta", nonconst_eta,
                   "fault injection: prompt-dependent anchor bias");

  CLI::App* sweep = app.add_subcommand("sweep", "one pipeline per axis value");
  add_common(sweep, true);
  sweep->add_option("--axis", axis, "beta | N | proposal_strength | objective")->required();

  CLI::App* nstudy = app.add_subcommand("nstudy", "offline sample-count variance/bias study");
  add_common(nstudy, true);

  CLI::App* metrics = app.add_subcommand("metrics", "recompute metrics from a policy checkpoint");
  add_common(metrics, true);
  std::string policy_path;
  metrics->add_option("checkpoint", policy_path, "policy checkpoint file")->required();

  CLI::App* oracle = app.add_subcommand("oracle-dump", "exact per-prompt oracle table");
  add_common(oracle, true);

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int rc = app.exit(e);
      return rc == 0 ? 0 : 2;
    }

    std::uint64_t* seed_ptr = seed_set ? &seed : nullptr;

    if (pipeline->parsed()) {
      const dmrl::RunConfig cfg = load_config(config_path, seed_ptr, &out_dir);
      const dmrl::PipelineResult res = dmrl::run_pipeline(cfg, cfg.out_dir);
      std::cout << "pipeline complete: " << res.out_dir.string() << "\n";
      return 0;
    }

    if (verify->parsed()) {
      dmrl::VerifyOptions opt;
      opt.break_gm = break_gm;
      opt.prompt_dependent_eta = nonconst_eta;
      if (!out_dir.empty()) opt.scratch_dir = out_dir;
      else if (const char* env = std::getenv("DMRL_OUT_DIR")) opt.scratch_dir = env;
      bool all_pass = true;
      for (const dmrl::CheckResult& r : dmrl::run_all_checks(opt)) {
        const char* tag = r.skipped ? "SKIP" : (r.pass ? "PASS" : "FAIL");
        std::cout << tag << " " << r.name << ": " << r.detail << "\n";
        if (!r.pass && !r.skipped) all_pass = false;
      }
      return all_pass ? 0 : 1;
    }

    if (sweep->parsed()) {
      const dmrl::RunConfig cfg = load_config(config_path, seed_ptr, &out_dir);
      dmrl::run_sweep(cfg, axis, cfg.out_dir, workers);
      std::cout << "sweep complete: " << cfg.out_dir << "\n";
      return 0;
    }

    if (nstudy->parsed()) {
      const dmrl::RunConfig cfg = load_config(config_path, seed_ptr, &out_dir);
      dmrl::run_nstudy(cfg, cfg.out_dir);
      std::cout << "nstudy complete: " << cfg.out_dir << "\n";
      return 0;
    }

    if (metrics->parsed()) {
      const dmrl::RunConfig cfg = load_config(config_path, seed_ptr, &out_dir);
      std::ifstream in(policy_path);
      if (!in) throw dmrl::ConfigError("cannot open policy checkpoint: " + policy_path);
      const dmrl::TabularPolicy policy = dmrl::deserialize_policy(in);
      if (policy.space().alphabet_size != cfg.space.alphabet_size ||
          policy.space().max_len != cfg.space.max_len) {
        throw dmrl::ConfigError("policy checkpoint space does not match the config space");
      }
      const std::vector<dmrl::PromptEnv> envs = dmrl::build_envs(cfg);
      const std::vector<dmrl::TabularPolicy> policies(envs.size(), policy);
      const std::string csv = dmrl::metrics_csv(envs, policies, cfg.stage3.train.metrics_k);
      std::cout << csv;
      dmrl::atomic_write(fs::path(cfg.out_dir) / "metrics.csv", csv);
      return 0;
    }

    if (oracle->parsed()) {
      const dmrl::RunConfig cfg = load_config(config_path, seed_ptr, &out_dir);
      const std::vector<dmrl::PromptEnv> envs = dmrl::build_envs(cfg);
      std::vector<dmrl::TabularPolicy> proposals;
      for (const dmrl::PromptEnv& env : envs) {
        proposals.push_back(dmrl::build_proposal(cfg, env, cfg.policies.proposal_tilt));
      }
      const std::string csv =
          dmrl::detail::oracle_csv(envs, proposals, cfg.stage3.train.beta);
      std::cout << csv;
      dmrl::atomic_write(fs::path(cfg.out_dir) / "oracle.csv", csv);
      return 0;
    }
  } catch (const dmrl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
