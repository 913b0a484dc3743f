#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "dmrl/config.hpp"
#include "dmrl/reward.hpp"
#include "dmrl/rng.hpp"
#include "dmrl/trajectory.hpp"

using namespace dmrl;

TEST_CASE("trajectory counts match the closed form") {
  CHECK(trajectory_count(TrajectorySpace{1, 1}) == 2);
  CHECK(trajectory_count(TrajectorySpace{2, 2}) == 7);
  CHECK(trajectory_count(TrajectorySpace{2, 3}) == 15);
  CHECK(trajectory_count(TrajectorySpace{3, 3}) == 40);
  CHECK(enumerate_trajectories(TrajectorySpace{3, 3}).size() == 40);
}

TEST_CASE("enumeration cap is a refusal, not a truncation") {
  TrajectorySpace big{10, 8};
  big.enumeration_cap = 1000;
  CHECK_THROWS_AS(trajectory_count(big), EnumerationCapExceeded);
  CHECK_THROWS_AS(enumerate_trajectories(big), EnumerationCapExceeded);
}

TEST_CASE("enumeration is lexicographic with STOP first and free of duplicates") {
  const TrajectorySpace space{2, 2};
  const std::vector<Trajectory> all = enumerate_trajectories(space);
  CHECK(all[0] == Trajectory{{}});       // "S"
  CHECK(all[1] == Trajectory{{0}});      // "0-S"
  CHECK(all[2] == Trajectory{{0, 0}});
  CHECK(all[3] == Trajectory{{0, 1}});
  CHECK(all[4] == Trajectory{{1}});
  std::set<std::string> seen;
  for (const Trajectory& o : all) {
    CHECK(trajectory_valid(space, o));
    CHECK(seen.insert(encode_trajectory(space, o)).second);
  }
}

TEST_CASE("trajectory encoding round-trips") {
  const TrajectorySpace space{3, 3};
  CHECK(encode_trajectory(space, Trajectory{{}}) == "S");
  CHECK(encode_trajectory(space, Trajectory{{0, 2, 1}}) == "0-2-1");
  CHECK(encode_trajectory(space, Trajectory{{0, 2}}) == "0-2-S");
  for (const Trajectory& o : enumerate_trajectories(space)) {
    CHECK(decode_trajectory(space, encode_trajectory(space, o)) == o);
  }
  CHECK_THROWS_AS(decode_trajectory(space, "0-2"), ConfigError);    // missing STOP
  CHECK_THROWS_AS(decode_trajectory(space, "0-2-1-S"), ConfigError);  // full length + STOP
  CHECK_THROWS_AS(decode_trajectory(space, "0-9-S"), ConfigError);
  CHECK_THROWS_AS(decode_trajectory(space, "x"), ConfigError);
}

TEST_CASE("rng streams are keyed, splittable, and platform-deterministic") {
  RngStream a = RngStream::keyed(1, "alpha");
  RngStream a2 = RngStream::keyed(1, "alpha");
  RngStream b = RngStream::keyed(1, "beta");
  CHECK(a.next_u64() == a2.next_u64());
  CHECK(a.key() != b.key());
  CHECK(a.split(0).key() != a.split(1).key());
  RngStream d = RngStream::keyed(7, "doubles");
  for (int i = 0; i < 1000; ++i) {
    const double u = d.next_double();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("reward is a pure deterministic bit") {
  const TrajectorySpace space{2, 2};
  RewardSpec spec;
  spec.kind = RewardSpec::Kind::SeededHashDensity;
  spec.density = 0.4;
  spec.seed = 99;
  for (const Trajectory& o : enumerate_trajectories(space)) {
    const int r = reward(spec, space, o);
    CHECK((r == 0 || r == 1));
    CHECK(reward(spec, space, o) == r);
  }
}

TEST_CASE("hash-density reward hits its density on a large space") {
  const TrajectorySpace space{4, 6};  // 5461 trajectories
  RewardSpec spec;
  spec.kind = RewardSpec::Kind::SeededHashDensity;
  spec.density = 0.3;
  spec.seed = 5;
  std::size_t hits = 0, total = 0;
  for (const Trajectory& o : enumerate_trajectories(space)) {
    hits += reward(spec, space, o);
    ++total;
  }
  const double rate = static_cast<double>(hits) / static_cast<double>(total);
  CHECK(std::abs(rate - 0.3) < 0.03);
}

TEST_CASE("multi-modal regions are prefix subtrees") {
  const TrajectorySpace space{3, 3};
  RewardSpec spec;
  spec.kind = RewardSpec::Kind::MultiModalRegions;
  spec.regions = {{0, 0}, {2}};
  CHECK(reward(spec, space, Trajectory{{0, 0}}) == 1);
  CHECK(reward(spec, space, Trajectory{{0, 0, 1}}) == 1);
  CHECK(reward(spec, space, Trajectory{{2}}) == 1);
  CHECK(reward(spec, space, Trajectory{{2, 1, 0}}) == 1);
  CHECK(reward(spec, space, Trajectory{{0}}) == 0);
  CHECK(reward(spec, space, Trajectory{{0, 1, 0}}) == 0);
  CHECK(reward(spec, space, Trajectory{{}}) == 0);
}

TEST_CASE("reward transform is exactly affine") {
  Prompt q;
  q.affine_a = 2.5;
  q.affine_b = -0.75;
  CHECK(reward_transform(q, 1.0) - reward_transform(q, 0.0) == 2.5);
  CHECK(reward_transform(q, 0.0) == -0.75);
}

TEST_CASE("group normalization handles the zero-variance corner") {
  const std::vector<double> z = group_normalize({1.0, 1.0, 1.0, 1.0});
  for (double v : z) CHECK(v == 0.0);
  const std::vector<double> a = group_normalize({1.0, 0.0, 1.0, 0.0});
  double sum = 0.0;
  for (double v : a) sum += v;
  CHECK(std::abs(sum) < 1e-12);
  CHECK(a[0] == doctest::Approx(1.0));
  CHECK(a[1] == doctest::Approx(-1.0));
  CHECK_THROWS_AS(group_normalize({1.0}), ContractError);
}

TEST_CASE("group normalization is invariant to positive affine reward maps") {
  const std::vector<double> r = {0.0, 1.0, 1.0, 0.0, 1.0};
  std::vector<double> shifted;
  for (double x : r) shifted.push_back(3.0 * x - 2.0);
  const std::vector<double> a = group_normalize(r);
  const std::vector<double> b = group_normalize(shifted);
  for (std::size_t i = 0; i < r.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]));
}

TEST_CASE("config parsing rejects unknown keys and missing requirements") {
  const char* good = R"({
    "seed": 3,
    "space": {"alphabet_size": 2, "max_len": 2},
    "reward_specs": {"h": {"kind": "seeded-hash-density", "density": 0.3, "seed": 1}},
    "prompts": [{"id": "q", "features": [1.0], "reward_spec": "h"}]
  })";
  const RunConfig cfg = parse_config_text(good);
  CHECK(cfg.seed == 3);
  CHECK(cfg.prompts.size() == 1);
  CHECK(cfg.stage1.n_samples == 8);  // documented default

  CHECK_THROWS_AS(parse_config_text("{not json"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"seed": 1})"), ConfigError);  // missing space

  std::string unknown = good;
  unknown.insert(unknown.rfind('}'), R"(, "typo_key": 1)");
  CHECK_THROWS_AS(parse_config_text(unknown), ConfigError);

  std::string bad_ref = good;
  bad_ref.replace(bad_ref.find("\"reward_spec\": \"h\""), 18, "\"reward_spec\": \"x\"");
  CHECK_THROWS_AS(parse_config_text(bad_ref), ConfigError);
}

TEST_CASE("config echo keeps the raw parsed document") {
  const char* text = R"({
    "seed": 9,
    "space": {"alphabet_size": 1, "max_len": 1},
    "reward_specs": {"w": {"kind": "explicit-set", "trajectories": ["0"]}},
    "prompts": [{"id": "q", "features": [1.0], "reward_spec": "w"}]
  })";
  const RunConfig cfg = parse_config_text(text);
  CHECK(cfg.raw == json::parse(text));
}
