#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <future>
#include <sstream>
#include <string>
#include <vector>

#include "dmrl/config.hpp"
#include "dmrl/instances.hpp"
#include "dmrl/io.hpp"
#include "dmrl/is_estimator.hpp"
#include "dmrl/metrics.hpp"
#include "dmrl/oracle.hpp"
#include "dmrl/policy_io.hpp"
#include "dmrl/trainers.hpp"

namespace dmrl {

namespace fs = std::filesystem;

struct PipelineResult {
  fs::path out_dir;
  std::vector<ISLabel> labels;
  Amortizer amortizer;
  TrainRun train_run;
  json summary;
};

namespace detail {

inline std::string labels_csv(const std::vector<ISLabel>& labels) {
  std::ostringstream os;
  os << "prompt_id,aggregator,n,log_z_hat,measured_cv2,ess_fraction,degenerate,rng_key\n";
  for (const ISLabel& l : labels) {
    os << l.prompt_id << ',' << aggregator_name(l.aggregator) << ',' << l.n << ','
       << format_double(l.log_z_hat) << ',' << format_double(l.measured_cv2) << ','
       << format_double(1.0 / (1.0 + l.measured_cv2)) << ',' << (l.degenerate ? 1 : 0) << ','
       << l.rng_key << "\n";
  }
  return os.str();
}

inline std::string oracle_csv(const std::vector<PromptEnv>& envs,
                              const std::vector<TabularPolicy>& proposals, double beta) {
  std::ostringstream os;
  os << "prompt_id,exact_log_z,exact_cv2,ess_fraction,target_entropy,mode_count\n";
  for (std::size_t p = 0; p < envs.size(); ++p) {
    const ExactTarget t = exact_tilted_target(envs[p].pi_ref, envs[p].prompt, envs[p].spec, beta);
    const WeightStats w =
        exact_weight_stats(envs[p].pi_ref, proposals[p], envs[p].prompt, envs[p].spec, beta);
    std::size_t modes = 0;
    for (const Trajectory& o : enumerate_trajectories(envs[p].space)) {
      if (reward(envs[p].spec, envs[p].space, o)) ++modes;
    }
    os << envs[p].prompt.id << ',' << format_double(t.log_z) << ',' << format_double(w.cv2) << ','
       << format_double(w.ess_fraction) << ',' << format_double(entropy(t.target_probs)) << ','
       << modes << "\n";
  }
  return os.str();
}

inline std::string trainrun_csv(const TrainRun& run) {
  std::ostringstream os;
  os << "step,objective,loss,kl_fwd,kl_rev,grad_norm,distinct_correct_at_k,log_z_phi\n";
  auto line = [&](const StepRecord& r) {
    os << r.step << ',' << objective_name(run.cfg.objective) << ',' << format_double(r.loss) << ','
       << format_double(r.kl_fwd) << ',' << format_double(r.kl_rev) << ','
       << format_double(r.grad_norm) << ',' << format_double(r.distinct_correct_at_k) << ','
       << (std::isnan(r.log_z_phi) ? std::string() : format_double(r.log_z_phi)) << "\n";
  };
  line(run.initial);
  for (const StepRecord& r : run.records) line(r);
  return os.str();
}

inline std::string nstudy_csv(const std::vector<NStudyRow>& rows) {
  std::ostringstream os;
  os << "prompt_id,M,replication_count,var_logZ,rel_bias_mean,rel_bias_median,exact_logZ,"
        "exact_cv2\n";
  for (const NStudyRow& r : rows) {
    os << r.prompt_id << ',' << r.m << ',' << r.replications << ',' << format_double(r.var_log_z)
       << ',' << format_double(r.rel_bias_mean) << ',' << format_double(r.rel_bias_median) << ','
       << format_double(r.exact_log_z) << ',' << format_double(r.exact_cv2) << "\n";
  }
  return os.str();
}

inline void write_manifest(const fs::path& out_dir, const std::vector<std::string>& files,
                           std::uint64_t seed, bool complete) {
  json manifest;
  manifest["seed"] = seed;
  manifest["complete"] = complete;
  manifest["files"] = json::array();
  for (const std::string& f : files) {
    manifest["files"].push_back({{"path", f}, {"fnv64", hash_file_hex(out_dir / f)}});
  }
  atomic_write(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace detail

// Per-checkpoint metrics CSV for a set of prompt envs and policies.
inline std::string metrics_csv(const std::vector<PromptEnv>& envs,
                               const std::vector<TabularPolicy>& policies, std::size_t k) {
  std::ostringstream os;
  os << "prompt_id,k,pass_at_k,distinct_correct_expected,mass_on_correct,mode_entropy\n";
  for (std::size_t p = 0; p < envs.size(); ++p) {
    const DiversityReport r = diversity_report(policies[p], envs[p].spec, envs[p].prompt.id, k);
    os << r.prompt_id << ',' << r.k << ',' << format_double(r.pass_at_k) << ','
       << format_double(r.distinct_correct_expected) << ',' << format_double(r.mass_on_correct)
       << ',' << format_double(r.mode_entropy) << "\n";
  }
  return os.str();
}

// Stages 1 -> 2 -> 3 end to end; writes every artifact plus a manifest with
// seeds and file hashes. Any stage error aborts with a stage-tagged message
// after flagging the manifest incomplete.
inline PipelineResult run_pipeline(const RunConfig& cfg, const fs::path& out_dir) {
  PipelineResult result;
  result.out_dir = out_dir;
  fs::create_directories(out_dir);
  std::vector<std::string> files;

  auto stage = [&](const char* name, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      // Flag whatever was already written as incomplete, then re-raise with a
      // stage tag. Config errors keep their type so the CLI exit code holds.
      try {
        detail::write_manifest(out_dir, files, cfg.seed, /*complete=*/false);
      } catch (...) {
      }
      const std::string msg = std::string("stage ") + name + " failed: " + e.what();
      if (dynamic_cast<const ConfigError*>(&e)) throw ConfigError(msg);
      throw std::runtime_error(msg);
    }
  };

  std::vector<PromptEnv> envs;
  std::vector<TabularPolicy> proposals;
  const double beta = cfg.stage3.train.beta;
  std::vector<std::vector<Trajectory>> sft_datasets;

  stage("setup", [&] {
    envs = build_envs(cfg);
    for (const PromptEnv& env : envs) {
      proposals.push_back(build_proposal(cfg, env, cfg.policies.proposal_tilt));
    }
    atomic_write(out_dir / "oracle.csv", detail::oracle_csv(envs, proposals, beta));
    files.push_back("oracle.csv");
  });

  stage("stage1", [&] {
    sft_datasets.resize(envs.size());
    for (std::size_t p = 0; p < envs.size(); ++p) {
      std::vector<Trajectory> samples;
      const ISLabel label = make_label(
          envs[p].pi_ref, proposals[p], envs[p].prompt, envs[p].spec, beta, cfg.stage1.n_samples,
          cfg.stage1.aggregator, RngStream::keyed(cfg.seed, envs[p].prompt.id, "stage1"),
          &samples);
      result.labels.push_back(label);
      for (const Trajectory& o : samples) {
        if (reward(envs[p].spec, envs[p].space, o)) sft_datasets[p].push_back(o);
      }
    }
    atomic_write(out_dir / "labels.csv", detail::labels_csv(result.labels));
    files.push_back("labels.csv");
  });

  stage("stage2", [&] {
    std::vector<LabeledPrompt> data;
    for (std::size_t p = 0; p < envs.size(); ++p) {
      data.push_back(LabeledPrompt{envs[p].prompt.features, result.labels[p].log_z_hat});
    }
    FitOptions opt;
    opt.hidden_width = cfg.stage2.hidden_width;
    opt.epochs = cfg.stage2.epochs;
    opt.learning_rate = cfg.stage2.learning_rate;
    result.amortizer =
        Amortizer::fit(data, cfg.stage2.kind, cfg.stage2.ridge_lambda, cfg.stage2.split_seed, opt);
    atomic_write(out_dir / "amortizer.ckpt", result.amortizer.serialize());
    files.push_back("amortizer.ckpt");
  });

  stage("stage3", [&] {
    AnchorProvider anchor;
    anchor.exact = cfg.stage3.exact_anchor;
    anchor.amortizer = &result.amortizer;
    result.train_run = run_training(cfg.stage3.train, envs, anchor, sft_datasets);
    atomic_write(out_dir / "trainrun.csv", detail::trainrun_csv(result.train_run));
    files.push_back("trainrun.csv");
    for (std::size_t p = 0; p < envs.size(); ++p) {
      const std::string final_name = "policy_final_" + envs[p].prompt.id + ".ckpt";
      const std::string best_name = "policy_best_" + envs[p].prompt.id + ".ckpt";
      atomic_write(out_dir / final_name,
                   serialize_policy(result.train_run.final_policies[p], cfg.seed));
      atomic_write(out_dir / best_name,
                   serialize_policy(result.train_run.best_policies[p], cfg.seed));
      files.push_back(final_name);
      files.push_back(best_name);
    }
    atomic_write(out_dir / "metrics.csv",
                 metrics_csv(envs, result.train_run.best_policies, cfg.stage3.train.metrics_k));
    files.push_back("metrics.csv");
  });

  stage("summary", [&] {
    json summary;
    summary["config"] = cfg.raw;
    summary["seed"] = cfg.seed;
    summary["stage2"] = {{"train_mse", result.amortizer.train_mse()},
                         {"val_mse", result.amortizer.val_mse()},
                         {"label_manifest", result.amortizer.label_manifest()}};
    const TrainRun& run = result.train_run;
    const StepRecord& last = run.records.empty() ? run.initial : run.records.back();
    summary["stage3"] = {{"objective", objective_name(run.cfg.objective)},
                         {"steps", run.cfg.steps},
                         {"best_step", run.best_step},
                         {"best_kl_fwd", run.best_kl_fwd},
                         {"final_loss", last.loss},
                         {"final_kl_fwd", last.kl_fwd},
                         {"final_kl_rev", last.kl_rev},
                         {"final_distinct_correct_at_k", last.distinct_correct_at_k}};
    summary["per_prompt"] = json::array();
    for (std::size_t p = 0; p < envs.size(); ++p) {
      const ExactTarget t = exact_tilted_target(envs[p].pi_ref, envs[p].prompt, envs[p].spec, beta);
      json pj;
      pj["prompt_id"] = envs[p].prompt.id;
      pj["exact_log_z"] = t.log_z;
      pj["anchor"] = cfg.stage3.exact_anchor ? t.log_z
                                             : result.amortizer.predict(envs[p].prompt.features);
      const std::vector<double> lp = run.final_policies[p].trajectory_log_probs();
      if (lp.size() <= 64) {
        json probs = json::array();
        const std::vector<Trajectory> all = enumerate_trajectories(envs[p].space);
        for (std::size_t i = 0; i < lp.size(); ++i) {
          probs.push_back({{"trajectory", encode_trajectory(envs[p].space, all[i])},
                           {"final_prob", std::exp(lp[i])},
                           {"target_prob", t.target_probs[i]}});
        }
        pj["trajectories"] = probs;
      }
      summary["per_prompt"].push_back(pj);
    }
    result.summary = summary;
    atomic_write(out_dir / "summary.json", summary.dump(2) + "\n");
    files.push_back("summary.json");
  });

  detail::write_manifest(out_dir, files, cfg.seed, /*complete=*/true);
  return result;
}

// Offline sample-count study over the config's prompts; writes the study CSV.
inline std::vector<NStudyRow> run_nstudy(const RunConfig& cfg, const fs::path& out_dir) {
  const std::vector<PromptEnv> envs = build_envs(cfg);
  std::vector<Prompt> prompts;
  for (const PromptEnv& env : envs) prompts.push_back(env.prompt);
  // Study protocol assumes one shared reward binding; per-prompt specs are
  // honored by running prompt groups against their own spec.
  std::vector<NStudyRow> rows;
  for (const PromptEnv& env : envs) {
    const TabularPolicy proposal = build_proposal(cfg, env, cfg.policies.proposal_tilt);
    auto part = variance_bias_study(env.pi_ref, proposal, {env.prompt}, env.spec,
                                    cfg.stage3.train.beta, cfg.nstudy.pool_size,
                                    cfg.nstudy.subsample_sizes, cfg.nstudy.replications,
                                    RngStream::keyed(cfg.seed, "nstudy-root"));
    rows.insert(rows.end(), part.begin(), part.end());
  }
  fs::create_directories(out_dir);
  atomic_write(out_dir / "nstudy.csv", detail::nstudy_csv(rows));
  return rows;
}

struct SweepCell {
  std::string axis;
  std::string value;
  std::string status;  // "ok" or "error: ..."
  std::vector<std::string> rows;  // long-form CSV body lines
};

// One pipeline run per axis value with shared seeds; emits a long-form CSV.
// Per-cell failures are recorded and the sweep continues.
inline void run_sweep(const RunConfig& cfg, const std::string& axis, const fs::path& out_dir,
                      std::size_t workers) {
  std::vector<std::pair<std::string, RunConfig>> cells;
  auto clone_with = [&](auto&& mutate) {
    RunConfig c = cfg;
    mutate(c);
    return c;
  };
  if (axis == "beta") {
    if (cfg.sweep.beta.empty()) throw ConfigError("sweep.beta axis values missing from config");
    for (double b : cfg.sweep.beta) {
      cells.emplace_back(format_double(b),
                         clone_with([&](RunConfig& c) { c.stage3.train.beta = b; }));
    }
  } else if (axis == "N") {
    if (cfg.sweep.n_samples.empty()) throw ConfigError("sweep.n_samples axis values missing");
    for (std::size_t n : cfg.sweep.n_samples) {
      cells.emplace_back(std::to_string(n),
                         clone_with([&](RunConfig& c) { c.stage1.n_samples = n; }));
    }
  } else if (axis == "proposal_strength") {
    if (cfg.sweep.proposal_strength.empty()) {
      throw ConfigError("sweep.proposal_strength axis values missing");
    }
    for (double t : cfg.sweep.proposal_strength) {
      cells.emplace_back(format_double(t),
                         clone_with([&](RunConfig& c) { c.policies.proposal_tilt = t; }));
    }
  } else if (axis == "objective") {
    if (cfg.sweep.objective.empty()) throw ConfigError("sweep.objective axis values missing");
    for (const std::string& o : cfg.sweep.objective) {
      cells.emplace_back(o, clone_with([&](RunConfig& c) {
                           c.stage3.train.objective = objective_from_name(o);
                         }));
    }
  } else {
    throw ConfigError("unknown sweep axis '" + axis + "' (beta, N, proposal_strength, objective)");
  }

  fs::create_directories(out_dir);
  std::vector<SweepCell> results(cells.size());

  auto run_cell = [&](std::size_t idx) {
    SweepCell cell;
    cell.axis = axis;
    cell.value = cells[idx].first;
    const RunConfig& c = cells[idx].second;
    const fs::path cell_dir = out_dir / ("cell_" + axis + "_" + cell.value);
    try {
      PipelineResult res = run_pipeline(c, cell_dir);
      // Per-prompt long-form rows: exact values, Stage-1 label replication
      // variance (fresh samples per replication), final training metrics.
      const std::vector<PromptEnv> envs = build_envs(c);
      const StepRecord& last =
          res.train_run.records.empty() ? res.train_run.initial : res.train_run.records.back();
      for (std::size_t p = 0; p < envs.size(); ++p) {
        const TabularPolicy proposal = build_proposal(c, envs[p], c.policies.proposal_tilt);
        const ExactTarget t =
            exact_tilted_target(envs[p].pi_ref, envs[p].prompt, envs[p].spec, c.stage3.train.beta);
        const WeightStats w = exact_weight_stats(envs[p].pi_ref, proposal, envs[p].prompt,
                                                 envs[p].spec, c.stage3.train.beta);
        double mean = 0.0, m2 = 0.0;
        const std::size_t reps = c.sweep.label_replications;
        RngStream rep_root = RngStream::keyed(c.seed, envs[p].prompt.id, "sweep-labels");
        for (std::size_t r = 0; r < reps; ++r) {
          const ISLabel l = make_label(envs[p].pi_ref, proposal, envs[p].prompt, envs[p].spec,
                                       c.stage3.train.beta, c.stage1.n_samples,
                                       c.stage1.aggregator, rep_root.split(r));
          mean += l.log_z_hat;
          m2 += l.log_z_hat * l.log_z_hat;
        }
        mean /= static_cast<double>(reps);
        const double var = m2 / static_cast<double>(reps) - mean * mean;
        std::ostringstream row;
        row << axis << ',' << cell.value << ',' << envs[p].prompt.id << ','
            << format_double(t.log_z) << ',' << format_double(w.cv2) << ','
            << format_double(mean) << ',' << format_double(var) << ','
            << format_double(last.kl_fwd) << ',' << format_double(last.kl_rev) << ','
            << format_double(last.distinct_correct_at_k) << ",ok";
        cell.rows.push_back(row.str());
      }
      cell.status = "ok";
    } catch (const std::exception& e) {
      cell.status = std::string("error: ") + e.what();
      cell.rows.push_back(axis + "," + cell.value + ",,,,,,,,,\"" + cell.status + "\"");
    }
    results[idx] = std::move(cell);
  };

  if (workers <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::vector<std::future<void>> futures;
    std::size_t next = 0;
    while (next < cells.size() || !futures.empty()) {
      while (next < cells.size() && futures.size() < workers) {
        futures.push_back(std::async(std::launch::async, run_cell, next++));
      }
      futures.front().get();
      futures.erase(futures.begin());
    }
  }

  std::ostringstream os;
  os << "axis,value,prompt_id,exact_log_z,exact_cv2,label_mean,label_var,final_kl_fwd,"
        "final_kl_rev,final_distinct_correct_at_k,status\n";
  for (const SweepCell& cell : results) {
    for (const std::string& row : cell.rows) os << row << "\n";
  }
  atomic_write(out_dir / ("sweep_" + axis + ".csv"), os.str());
}

}  // namespace dmrl
