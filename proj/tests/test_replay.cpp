#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "sacr2/replay.hpp"

#include "test_util.hpp"

using namespace sacr2;
using sacr2::test::same_bits;

namespace {

Episode make_episode(long id, const std::vector<Scalar>& rewards, bool success,
                     int obs_dim = 4, int act_dim = 2) {
  Episode ep;
  ep.success = success;
  Rng rng(std::uint64_t(id) * 977 + 13);
  for (size_t i = 0; i < rewards.size(); ++i) {
    Transition t;
    t.s = rng.normal_vector(obs_dim);
    t.a = rng.normal_vector(act_dim);
    t.s_next = rng.normal_vector(obs_dim);
    t.r = rewards[i];
    t.done = i + 1 == rewards.size();
    t.episode_id = id;
    t.step_idx = int(i);
    ep.transitions.push_back(std::move(t));
  }
  return ep;
}

Episode successful_episode(long id, int length, Scalar final_reward = 100.0) {
  std::vector<Scalar> rewards(size_t(length), 0.0);
  rewards.back() = final_reward;
  return make_episode(id, rewards, true);
}

ReplayConfig small_single(long capacity = 4096) {
  ReplayConfig c;
  c.mode = BufferMode::kSingle;
  c.capacity = capacity;
  return c;
}

}  // namespace

TEST_CASE("relabel_success hits exactly the documented window") {
  // length 30, N=21, b=5: step_idx 9..28 become 5, 29 keeps 100, 0..8 keep 0
  const Episode ep = successful_episode(0, 30);
  const Episode out = relabel_success(ep, 5.0, 21);
  for (int i = 0; i <= 8; ++i) CHECK(out.transitions[size_t(i)].r == 0.0);
  for (int i = 9; i <= 28; ++i) CHECK(out.transitions[size_t(i)].r == 5.0);
  CHECK(out.transitions[29].r == 100.0);
}

TEST_CASE("relabel_success on short episodes relabels every non-final transition") {
  const Episode ten = successful_episode(1, 10);
  const Episode out = relabel_success(ten, 5.0, 21);
  for (int i = 0; i < 9; ++i) CHECK(out.transitions[size_t(i)].r == 5.0);
  CHECK(out.transitions[9].r == 100.0);

  const Episode two = successful_episode(2, 2);
  const Episode out2 = relabel_success(two, 7.0, 21);
  CHECK(out2.transitions[0].r == 7.0);
  CHECK(out2.transitions[1].r == 100.0);
}

TEST_CASE("relabel_success randomized exactness property") {
  Rng rng(31337);
  for (int trial = 0; trial < 300; ++trial) {
    const int len = 1 + rng.uniform_int(100);
    const int window = std::vector<int>{2, 5, 21}[size_t(rng.uniform_int(3))];
    const Scalar b = rng.uniform(0.5, 10.0);
    const Episode ep = successful_episode(trial, len);
    const Episode out = relabel_success(ep, b, window);

    const int expected_changes = std::min(window - 1, len - 1);
    int changed = 0;
    for (int i = 0; i < len; ++i) {
      const Transition& before = ep.transitions[size_t(i)];
      const Transition& after = out.transitions[size_t(i)];
      if (before.r != after.r) {
        ++changed;
        CHECK(after.r == b);
        CHECK(i < len - 1);
      }
      // relabeling touches rewards only
      CHECK(same_bits(before.s, after.s));
      CHECK(same_bits(before.a, after.a));
      CHECK(same_bits(before.s_next, after.s_next));
      CHECK(before.done == after.done);
      CHECK(before.step_idx == after.step_idx);
      CHECK(before.episode_id == after.episode_id);
    }
    CHECK(changed == expected_changes);
    CHECK(out.transitions.back().r == ep.transitions.back().r);
    for (int i = len - 1 - expected_changes; i < len - 1; ++i)
      CHECK(out.transitions[size_t(i)].r == b);
  }
}

TEST_CASE("relabel_success rejects unsuccessful episodes and tiny windows") {
  Episode fail = successful_episode(0, 5);
  fail.success = false;
  CHECK_THROWS_AS(relabel_success(fail, 5.0, 21), ContractViolation);
  const Episode ok = successful_episode(1, 5);
  CHECK_THROWS_AS(relabel_success(ok, 5.0, 1), ContractViolation);
}

TEST_CASE("insert_demoset applies the bonus to non-final transitions only") {
  ReplayStore store(small_single());
  const Episode demo = successful_episode(0, 15);
  store.insert_demoset({demo}, 5.0);
  const auto handles = store.live_handles();
  REQUIRE(handles.size() == 15);
  for (const SampleHandle& h : handles) {
    const Transition& t = store.transition(h);
    CHECK(t.is_demo);
    if (t.step_idx == 14)
      CHECK(t.r == 100.0);
    else
      CHECK(t.r == 5.0);
  }
}

TEST_CASE("insert_demoset with b=0 keeps raw environment rewards") {
  ReplayStore store(small_single());
  store.insert_demoset({successful_episode(0, 12)}, 0.0);
  for (const SampleHandle& h : store.live_handles()) {
    const Transition& t = store.transition(h);
    CHECK(t.r == (t.step_idx == 11 ? 100.0 : 0.0));
  }
}

TEST_CASE("insert_demoset at scale counts transitions and flags") {
  ReplayConfig cfg = small_single(8192);
  ReplayStore store(cfg);
  std::vector<Episode> demos;
  Rng rng(4);
  long expected = 0;
  for (int e = 0; e < 200; ++e) {
    const int len = 16 + rng.uniform_int(11);  // mean ~21
    expected += len;
    demos.push_back(successful_episode(e, len));
  }
  store.insert_demoset(demos, 5.0);
  CHECK(store.size() == expected);
  CHECK(store.demo_transition_count() == expected);
  CHECK(expected > 3000);
  CHECK(expected < 5500);
}

TEST_CASE("push_episode grows the store until capacity then evicts FIFO") {
  ReplayStore store(small_single(10));
  store.push_episode(successful_episode(0, 4));
  CHECK(store.size() == 4);
  store.push_episode(successful_episode(1, 4));
  CHECK(store.size() == 8);
  store.push_episode(successful_episode(2, 4));
  CHECK(store.size() == 10);  // capacity reached, first two slots overwritten
}

TEST_CASE("evicted transitions are never sampled again") {
  ReplayStore store(small_single(10));
  for (long e = 0; e < 7; ++e) store.push_episode(successful_episode(e, 5));
  // capacity 10 holds exactly episodes 5 and 6 now
  Rng rng(55);
  for (int draw = 0; draw < 20000; ++draw) {
    const SampledBatch batch = store.sample_batch(4, rng);
    for (const Transition& t : batch.transitions) CHECK(t.episode_id >= 5);
  }
}

TEST_CASE("dual mode composition is exact") {
  ReplayConfig cfg;
  cfg.mode = BufferMode::kDual;
  cfg.capacity = 4096;
  cfg.demo_capacity = 4096;
  ReplayStore store(cfg);
  store.insert_demoset({successful_episode(0, 20), successful_episode(1, 20)}, 5.0);
  for (long e = 2; e < 12; ++e) store.push_episode(successful_episode(e, 20));

  Rng rng(77);
  SUBCASE("fraction 0.5 gives 32 + 32") {
    // rebuild with fraction 0.5
    ReplayConfig half = cfg;
    half.demo_fraction = 0.5;
    ReplayStore s2(half);
    s2.insert_demoset({successful_episode(0, 20)}, 5.0);
    s2.push_episode(successful_episode(1, 20));
    for (int i = 0; i < 200; ++i) {
      const SampledBatch b = s2.sample_batch(64, rng);
      long demos = 0;
      for (const Transition& t : b.transitions) demos += t.is_demo ? 1 : 0;
      CHECK(demos == 32);
    }
  }
  SUBCASE("fraction 0.1 gives round-half-even 6 + 58") {
    for (int i = 0; i < 10000; ++i) {
      const SampledBatch b = store.sample_batch(64, rng);
      long demos = 0;
      for (const Transition& t : b.transitions) demos += t.is_demo ? 1 : 0;
      CHECK(demos == 6);
    }
  }
}

TEST_CASE("single-mode sampling filters its weights by the PER exponents") {
  ReplayConfig cfg = small_single(64);
  cfg.per_alpha = 0.4;
  cfg.per_beta = 0.7;
  ReplayStore store(cfg);
  store.push_episode(successful_episode(0, 8));
  // skew priorities on the 8 distinct slots
  const auto slots = store.live_handles();
  REQUIRE(slots.size() == 8);
  Vector td(8);
  for (int i = 0; i < 8; ++i) td[i] = 0.25 * (i + 1);
  store.update_priorities(slots, td, Vector::Zero(8));

  Scalar total_mass = 0;
  for (const SampleHandle& h : slots)
    total_mass += std::pow(store.raw_priority(h), cfg.per_alpha);

  Rng rng(9);
  const SampledBatch batch = store.sample_batch(16, rng);
  CHECK(batch.is_weights.maxCoeff() == 1.0);
  CHECK(batch.is_weights.minCoeff() > 0.0);
  // weight = (1/(N P))^beta normalized by the batch max
  auto raw_weight = [&](const SampleHandle& h) {
    const Scalar mass = std::pow(store.raw_priority(h), cfg.per_alpha);
    return std::pow(1.0 / (8.0 * mass / total_mass), cfg.per_beta);
  };
  Scalar max_w = 0;
  for (const SampleHandle& h : batch.handles) max_w = std::max(max_w, raw_weight(h));
  for (size_t k = 0; k < batch.handles.size(); ++k)
    CHECK(batch.is_weights[long(k)] ==
          doctest::Approx(raw_weight(batch.handles[k]) / max_w).epsilon(1e-12));
}

TEST_CASE("update_priorities implements both PER modes") {
  SUBCASE("standard: p = delta^2 + eps") {
    ReplayConfig cfg = small_single();
    cfg.per_eps = 0.001;
    ReplayStore store(cfg);
    store.push_episode(successful_episode(0, 4));
    const auto handles = store.live_handles();
    REQUIRE(handles.size() == 4);
    Vector td(4);
    td << 2.0, 0.0, 1.0, 3.0;
    store.update_priorities(handles, td, Vector::Zero(4));
    CHECK(store.raw_priority(handles[0]) == 4.001);
    CHECK(store.raw_priority(handles[1]) == 0.001);
    CHECK(store.raw_priority(handles[2]) == 1.001);
    CHECK(store.raw_priority(handles[3]) == 9.001);
  }
  SUBCASE("modified: demo bonus is exactly eps_demo") {
    ReplayConfig cfg = small_single();
    cfg.per_mode = PerMode::kModified;
    cfg.per_eps = 0.001;
    cfg.per_eps_demo = 1.0;
    cfg.per_lambda_actor = 1.0;
    ReplayStore store(cfg);
    store.insert_demoset({successful_episode(0, 3)}, 5.0);
    store.push_episode(successful_episode(1, 3));
    const auto handles = store.live_handles();
    REQUIRE(handles.size() == 6);
    Vector td = Vector::Constant(6, 2.0);
    Vector actor = Vector::Constant(6, 0.5);
    store.update_priorities(handles, td, actor);
    const Scalar demo_p = store.raw_priority(handles[0]);   // demo episode first
    const Scalar agent_p = store.raw_priority(handles[3]);
    CHECK(store.transition(handles[0]).is_demo);
    CHECK_FALSE(store.transition(handles[3]).is_demo);
    CHECK(agent_p == doctest::Approx(4.0 + 0.25 + 0.001).epsilon(1e-15));
    CHECK(demo_p - agent_p == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("all-zero errors floor at eps (+ eps_demo for demos)") {
    ReplayConfig cfg = small_single();
    cfg.per_mode = PerMode::kModified;
    ReplayStore store(cfg);
    store.insert_demoset({successful_episode(0, 2)}, 5.0);
    store.push_episode(successful_episode(1, 2));
    const auto handles = store.live_handles();
    store.update_priorities(handles, Vector::Zero(4), Vector::Zero(4));
    for (const SampleHandle& h : handles) {
      const Scalar expected = store.transition(h).is_demo ? 1.001 : 0.001;
      CHECK(store.raw_priority(h) == doctest::Approx(expected).epsilon(1e-15));
    }
  }
}

TEST_CASE("stale handles are skipped and counted") {
  ReplayStore store(small_single(6));
  store.push_episode(successful_episode(0, 6));
  Rng rng(11);
  const SampledBatch batch = store.sample_batch(4, rng);
  store.push_episode(successful_episode(1, 6));  // evicts everything
  store.update_priorities(batch.handles, Vector::Ones(4), Vector::Zero(4));
  CHECK(store.stale_update_count() == 4);
}

TEST_CASE("assemble_nstep matches the documented example") {
  ReplayStore store(small_single());
  store.push_episode(make_episode(0, {0.0, 0.0, 5.0, 100.0}, true));
  const auto handles = store.live_handles();
  const NStepView v = store.assemble_nstep(handles[0], 3, 0.9);
  CHECK(v.return_n == doctest::Approx(0.81 * 5.0).epsilon(1e-15));
  CHECK(v.steps_used == 3);
  CHECK_FALSE(v.done_n);
  CHECK(same_bits(v.bootstrap_obs, store.transition(handles[2]).s_next));
}

TEST_CASE("assemble_nstep degenerate and boundary cases") {
  ReplayStore store(small_single());
  store.push_episode(make_episode(0, {1.5, 2.5, 3.5}, true));
  const auto handles = store.live_handles();

  const NStepView one = store.assemble_nstep(handles[0], 1, 0.99);
  CHECK(one.return_n == 1.5);
  CHECK(one.steps_used == 1);
  CHECK_FALSE(one.done_n);
  CHECK(same_bits(one.bootstrap_obs, store.transition(handles[0]).s_next));

  const NStepView last = store.assemble_nstep(handles[2], 5, 0.99);
  CHECK(last.return_n == 3.5);
  CHECK(last.steps_used == 1);
  CHECK(last.done_n);
}

TEST_CASE("assemble_nstep equals brute force on a random corpus") {
  ReplayStore store(small_single(100000));
  Rng rng(606);
  std::vector<Episode> corpus;
  for (long e = 0; e < 50; ++e) {
    const int len = 1 + rng.uniform_int(30);
    std::vector<Scalar> rewards(static_cast<size_t>(len), 0.0);
    for (Scalar& r : rewards) r = rng.uniform(-3.0, 3.0);
    corpus.push_back(make_episode(e, rewards, true));
    store.push_episode(corpus.back());
  }
  const auto handles = store.live_handles();
  REQUIRE(!handles.empty());
  for (const int n : {1, 3, 5}) {
    for (const Scalar gamma : {0.9, 0.99}) {
      for (const SampleHandle& h : handles) {
        const Transition& t = store.transition(h);
        const Episode& ep = corpus[size_t(t.episode_id)];
        const int len = ep.length();
        const int m = std::min(n, len - t.step_idx);
        Scalar expect = 0, disc = 1;
        for (int k = 0; k < m; ++k) {
          expect += disc * ep.transitions[size_t(t.step_idx + k)].r;
          disc *= gamma;
        }
        const NStepView v = store.assemble_nstep(h, n, gamma);
        CHECK(std::abs(v.return_n - expect) <=
              1e-12 * std::max<Scalar>(1.0, std::abs(expect)));
        CHECK(v.steps_used == m);
        CHECK(v.done_n == (t.step_idx + m == len));
        CHECK(same_bits(v.bootstrap_obs,
                        ep.transitions[size_t(t.step_idx + m - 1)].s_next));
      }
    }
  }
}

TEST_CASE("sum tree root equals leaf sum through heavy churn") {
  SumTree tree(1000);
  Rng rng(8080);
  std::vector<Scalar> shadow(1000, 0.0);
  for (int op = 0; op < 100000; ++op) {
    const int idx = rng.uniform_int(1000);
    const Scalar v = rng.uniform() < 0.1 ? 0.0 : rng.uniform(0.0, 10.0);
    tree.set(idx, v);
    shadow[size_t(idx)] = v;
  }
  Scalar direct = 0;
  for (Scalar v : shadow) direct += v;
  CHECK(std::abs(tree.total() - direct) <= 1e-6 * direct);
  // prefix lookup lands on the right leaf
  for (int probe = 0; probe < 1000; ++probe) {
    const Scalar u = rng.uniform() * tree.total();
    const int leaf = tree.find_prefix(u);
    CHECK(leaf >= 0);
    CHECK(leaf < 1000);
  }
}

TEST_CASE("tree sampling frequencies are proportional to priorities") {
  // stratified prefixes remove Monte-Carlo noise so the bounds test the
  // tree's allocation itself
  const int leaves = 100;
  SumTree tree(leaves);
  Rng rng(515);

  SUBCASE("uniform priorities within 1%") {
    for (int i = 0; i < leaves; ++i) tree.set(i, 1.0);
    std::vector<long> counts(leaves, 0);
    const long draws = 1000000;
    for (long d = 0; d < draws; ++d) {
      const Scalar u = (Scalar(d) + rng.uniform()) / Scalar(draws) * tree.total();
      ++counts[size_t(tree.find_prefix(u))];
    }
    for (int i = 0; i < leaves; ++i) {
      const Scalar expected = Scalar(draws) / leaves;
      CHECK(std::abs(counts[size_t(i)] - expected) <= 0.01 * expected);
    }
  }
  SUBCASE("random priorities within 2%") {
    Scalar total = 0;
    std::vector<Scalar> p(leaves);
    for (int i = 0; i < leaves; ++i) {
      p[size_t(i)] = rng.uniform(0.2, 5.0);
      tree.set(i, p[size_t(i)]);
      total += p[size_t(i)];
    }
    std::vector<long> counts(leaves, 0);
    const long draws = 1000000;
    for (long d = 0; d < draws; ++d) {
      const Scalar u = (Scalar(d) + rng.uniform()) / Scalar(draws) * tree.total();
      ++counts[size_t(tree.find_prefix(u))];
    }
    for (int i = 0; i < leaves; ++i) {
      const Scalar expected = Scalar(draws) * p[size_t(i)] / total;
      CHECK(std::abs(counts[size_t(i)] - expected) <= 0.02 * expected);
    }
  }
}

TEST_CASE("maintain_demo_ratio restores the single-buffer demo share") {
  ReplayConfig cfg = small_single(100000);
  cfg.target_demo_ratio = 0.10;
  ReplayStore store(cfg);
  std::vector<Episode> demos;
  for (long e = 0; e < 10; ++e) demos.push_back(successful_episode(e, 20));
  store.insert_demoset(demos, 5.0);  // 200 demo transitions

  long next_id = 1000;
  auto source = [&]() -> std::optional<Episode> {
    return successful_episode(next_id++, 20);
  };

  SUBCASE("at target: no insertion") {
    for (long e = 100; e < 190; ++e) store.push_episode(successful_episode(e, 20));
    // 200 demo / 2000 total = exactly 0.10
    const long before = store.size();
    store.maintain_demo_ratio(source, 5.0);
    CHECK(store.size() == before);
  }
  SUBCASE("below target: restored into [0.10, 0.11]") {
    for (long e = 100; e < 220; ++e) store.push_episode(successful_episode(e, 20));
    CHECK(store.demo_ratio() < 0.10);
    store.maintain_demo_ratio(source, 5.0);
    CHECK(store.demo_ratio() >= 0.10);
    CHECK(store.demo_ratio() <= 0.11);
    // inserted maintenance demos carry the bonus
    long bonus_rewards = 0;
    for (const SampleHandle& h : store.live_handles()) {
      const Transition& t = store.transition(h);
      if (t.is_demo && t.episode_id >= 1000 && t.step_idx < 19) {
        CHECK(t.r == 5.0);
        ++bonus_rewards;
      }
    }
    CHECK(bonus_rewards > 0);
  }
  SUBCASE("failure cascade aborts") {
    for (long e = 100; e < 220; ++e) store.push_episode(successful_episode(e, 20));
    auto failing = []() -> std::optional<Episode> { return std::nullopt; };
    CHECK_THROWS_AS(store.maintain_demo_ratio(failing, 5.0), TrainingDiverged);
  }
}

TEST_CASE("maintain_demo_ratio is a no-op in dual mode") {
  ReplayConfig cfg;
  cfg.mode = BufferMode::kDual;
  cfg.capacity = 1000;
  cfg.demo_capacity = 1000;
  ReplayStore store(cfg);
  store.insert_demoset({successful_episode(0, 5)}, 5.0);
  for (long e = 1; e < 30; ++e) store.push_episode(successful_episode(e, 20));
  const long before = store.size();
  bool called = false;
  store.maintain_demo_ratio(
      [&]() -> std::optional<Episode> {
        called = true;
        return std::nullopt;
      },
      5.0);
  CHECK_FALSE(called);
  CHECK(store.size() == before);
}

TEST_CASE("sampling from an empty store is an error") {
  ReplayStore store(small_single());
  Rng rng(1);
  CHECK_THROWS_AS(store.sample_batch(4, rng), ContractViolation);
}

TEST_CASE("buffer snapshot dump lists every live transition") {
  ReplayStore store(small_single(64));
  store.push_episode(successful_episode(0, 6));
  store.insert_demoset({successful_episode(1, 4)}, 2.0);
  const auto path = std::filesystem::temp_directory_path() / "sacr2_snapshot.txt";
  store.dump_snapshot(path.string());
  std::ifstream in(path);
  long lines = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++lines;
  CHECK(lines == store.size());
  std::filesystem::remove(path);
}
