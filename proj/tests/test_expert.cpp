#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sacr2/expert.hpp"

#include "test_util.hpp"

using namespace sacr2;
using sacr2::test::same_bits;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::filesystem::path tmp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("expert action is near zero at the target and always in bounds") {
  EnvConfig env;
  ExpertConfig expert;
  Rng rng(1);
  ReacherState s = reset(env, rng);
  s.target_position = s.ee_position;  // zero error
  ExpertConfig no_jitter = expert;
  no_jitter.jitter = 0;
  const Vector a = expert_action(s, env, no_jitter, rng);
  CHECK(a.norm() < 0.05);

  for (int trial = 0; trial < 500; ++trial) {
    ReacherState st = reset(env, rng);
    const Vector act = expert_action(st, env, expert, rng);
    CHECK(act.minCoeff() >= -1.0);
    CHECK(act.maxCoeff() <= 1.0);
  }
}

TEST_CASE("expert reaches nearly every sampled target") {
  EnvConfig env;
  ExpertConfig expert;
  Rng rng(2024);
  int successes = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i)
    if (roll_expert_episode(env, expert, rng, i)) ++successes;
  CHECK(successes >= 990);
}

TEST_CASE("generate_demos yields the requested count with plausible N") {
  EnvConfig env;
  ExpertConfig expert;
  Rng rng(7);
  const DemoSet demos = generate_demos(200, env, expert, rng);
  REQUIRE(demos.episode_count() == 200);
  CHECK(demos.mean_length >= 15);
  CHECK(demos.mean_length <= 25);
  CHECK(demos.env_config_hash == env.hash());
  for (const Episode& ep : demos.episodes) {
    REQUIRE(ep.success);
    CHECK(ep.length() <= env.max_steps);
    const Transition& last = ep.transitions.back();
    CHECK(last.r == env.sparse_reward);
    CHECK(last.done);
    for (int i = 0; i + 1 < ep.length(); ++i) {
      CHECK(ep.transitions[size_t(i)].r == 0.0);
      CHECK_FALSE(ep.transitions[size_t(i)].done);
    }
  }
}

TEST_CASE("same seed produces identical demo file bytes") {
  EnvConfig env;
  ExpertConfig expert;
  const auto path_a = tmp_file("sacr2_demos_a.txt");
  const auto path_b = tmp_file("sacr2_demos_b.txt");
  {
    Rng rng(99);
    save_demos(generate_demos(12, env, expert, rng), path_a.string());
  }
  {
    Rng rng(99);
    save_demos(generate_demos(12, env, expert, rng), path_b.string());
  }
  CHECK(slurp(path_a.string()) == slurp(path_b.string()));
  std::filesystem::remove(path_a);
  std::filesystem::remove(path_b);
}

TEST_CASE("demo files round-trip exactly") {
  EnvConfig env;
  ExpertConfig expert;
  Rng rng(5);
  const DemoSet demos = generate_demos(10, env, expert, rng);
  const auto path = tmp_file("sacr2_demos_rt.txt");
  save_demos(demos, path.string());
  const DemoSet loaded = load_demos(path.string());
  REQUIRE(loaded.episode_count() == demos.episode_count());
  CHECK(loaded.mean_length == demos.mean_length);
  CHECK(loaded.env_config_hash == demos.env_config_hash);
  for (int e = 0; e < demos.episode_count(); ++e) {
    const Episode& a = demos.episodes[size_t(e)];
    const Episode& b = loaded.episodes[size_t(e)];
    REQUIRE(a.length() == b.length());
    for (int i = 0; i < a.length(); ++i) {
      const Transition& ta = a.transitions[size_t(i)];
      const Transition& tb = b.transitions[size_t(i)];
      CHECK(same_bits(ta.s, tb.s));
      CHECK(same_bits(ta.a, tb.a));
      CHECK(same_bits(ta.s_next, tb.s_next));
      CHECK(ta.r == tb.r);
      CHECK(ta.done == tb.done);
      CHECK(ta.step_idx == tb.step_idx);
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("loading against the wrong env hash names both hashes") {
  EnvConfig env;
  ExpertConfig expert;
  Rng rng(6);
  const auto path = tmp_file("sacr2_demos_hash.txt");
  save_demos(generate_demos(3, env, expert, rng), path.string());
  EnvConfig other = env;
  other.reach_threshold = 0.06;
  try {
    load_demos(path.string(), other.hash());
    FAIL("expected IoError");
  } catch (const IoError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(env.hash()) != std::string::npos);
    CHECK(msg.find(other.hash()) != std::string::npos);
  }
  CHECK_NOTHROW(load_demos(path.string(), env.hash()));
  std::filesystem::remove(path);
}

TEST_CASE("truncated and corrupted demo files fail loudly") {
  EnvConfig env;
  ExpertConfig expert;
  Rng rng(8);
  const auto path = tmp_file("sacr2_demos_trunc.txt");
  save_demos(generate_demos(3, env, expert, rng), path.string());
  const std::string full = slurp(path.string());

  {  // cut mid-record
    std::ofstream out(path);
    out << full.substr(0, full.size() * 2 / 3);
  }
  CHECK_THROWS_AS(load_demos(path.string()), IoError);

  {  // stored N inconsistent with records
    std::istringstream in(full);
    std::string header;
    std::getline(in, header);
    std::ostringstream patched;
    patched << "SACR2DEMO v1 " << env.hash() << " 3 99\n" << in.rdbuf();
    std::ofstream out(path);
    out << patched.str();
  }
  CHECK_THROWS_AS(load_demos(path.string()), IoError);

  {  // wrong magic
    std::ofstream out(path);
    out << "NOTDEMO v1 x 1 2\n";
  }
  CHECK_THROWS_AS(load_demos(path.string()), IoError);
  std::filesystem::remove(path);
}

TEST_CASE("demo_mean_length recomputation matches the stored statistic") {
  EnvConfig env;
  ExpertConfig expert;
  Rng rng(13);
  const DemoSet demos = generate_demos(30, env, expert, rng);
  CHECK(demo_mean_length(demos.episodes) == demos.mean_length);
}
