// Acceptance gate: runs every acceptance criterion and prints one pass/fail
// line per criterion. Exit code 0 iff all pass.

#include <cstdio>
#include <iostream>

#include "dmrl/verify.hpp"

int main() {
  dmrl::VerifyOptions opt;
  opt.scratch_dir = std::filesystem::temp_directory_path() / "dmrl-acceptance";
  const std::vector<dmrl::CheckResult> results = dmrl::run_all_checks(opt);
  bool all_pass = true;
  int idx = 0;
  for (const dmrl::CheckResult& r : results) {
    ++idx;
    const char* tag = r.skipped ? "SKIP" : (r.pass ? "PASS" : "FAIL");
    std::printf("[%2d/%2d] %s %s: %s\n", idx, static_cast<int>(results.size()), tag,
                r.name.c_str(), r.detail.c_str());
    std::fflush(stdout);
    if (!r.pass && !r.skipped) all_pass = false;
  }

  // Negative controls: the harness must catch injected faults.
  dmrl::VerifyOptions broken = opt;
  broken.break_gm = true;
  const dmrl::CheckResult gm = dmrl::check_gm_bias(broken);
  std::printf("[fault] broken-gm-detected %s: %s\n", gm.pass ? "FAIL" : "PASS",
              gm.detail.c_str());
  if (gm.pass) all_pass = false;  // the fault must be flagged

  dmrl::VerifyOptions eta = opt;
  eta.prompt_dependent_eta = true;
  const dmrl::CheckResult st = dmrl::check_stationarity(eta);
  std::printf("[fault] prompt-eta-skip %s: %s\n", st.skipped ? "PASS" : "FAIL",
              st.detail.c_str());
  if (!st.skipped) all_pass = false;

  std::printf("%s\n", all_pass ? "ACCEPTANCE: ALL PASS" : "ACCEPTANCE: FAILURES");
  return all_pass ? 0 : 1;
}
