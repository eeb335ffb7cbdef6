#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sacr2/types.hpp"

namespace sacr2 {

/// One stored interaction. Rewards may be relabeled before insertion; states,
/// actions, flags and ordering are never touched by relabeling.
struct Transition {
  Vector s;
  Vector a;
  Scalar r = 0.0;
  Vector s_next;
  bool done = false;
  bool is_demo = false;
  long episode_id = 0;
  int step_idx = 0;
};

struct Episode {
  std::vector<Transition> transitions;
  bool success = false;

  int length() const { return int(transitions.size()); }
};

/// Reward-relabeling of a successful episode: the last min(N-1, len-1)
/// non-final transitions get reward b; the final transition and everything
/// earlier are untouched. Returns a modified copy.
Episode relabel_success(const Episode& episode, Scalar b, int demo_mean_length);

/// Binary indexed tree over fixed leaf slots supporting O(log n) prefix-mass
/// lookup. Leaves hold sampling masses (priorities raised to the PER
/// exponent).
class SumTree {
 public:
  explicit SumTree(int capacity);

  void set(int index, Scalar value);
  Scalar value(int index) const { return nodes_[size_t(base_ + index)]; }
  Scalar total() const { return nodes_[1]; }
  int capacity() const { return capacity_; }

  /// Index of the leaf whose cumulative mass interval contains `prefix`,
  /// prefix in [0, total()).
  int find_prefix(Scalar prefix) const;

 private:
  int capacity_;
  int base_;  // first leaf node id
  std::vector<Scalar> nodes_;
};

/// Companion max-tree used to initialize fresh transitions at the current
/// maximum raw priority.
class MaxTree {
 public:
  explicit MaxTree(int capacity);

  void set(int index, Scalar value);
  Scalar max() const { return nodes_[1]; }

 private:
  int capacity_;
  int base_;
  std::vector<Scalar> nodes_;
};

enum class BufferMode { kSingle, kDual };
enum class PerMode { kStandard, kModified };

struct ReplayConfig {
  BufferMode mode = BufferMode::kSingle;
  PerMode per_mode = PerMode::kStandard;
  long capacity = 1'000'000;       // agent buffer (or the single buffer)
  long demo_capacity = 100'000;    // dual mode only
  Scalar demo_fraction = 0.10;     // dual mode share of each batch
  Scalar target_demo_ratio = 0.10; // single mode maintenance target
  Scalar per_alpha = 0.3;
  Scalar per_beta = 1.0;
  Scalar per_eps = 1e-3;
  Scalar per_eps_demo = 1.0;
  Scalar per_lambda_actor = 1.0;
  bool use_is_weights = true;

  void validate() const;
};

/// Stable reference to a sampled transition; `seq` detects slots that were
/// overwritten between sampling and the priority update.
struct SampleHandle {
  int buffer = 0;  // 0 = agent/single, 1 = demo
  int slot = 0;
  long seq = 0;
};

struct SampledBatch {
  std::vector<Transition> transitions;
  Vector is_weights;
  std::vector<SampleHandle> handles;
};

struct NStepView {
  Scalar return_n = 0.0;   // sum_{k<m} gamma^k r_{t+k}
  Vector bootstrap_obs;    // state after m steps
  bool done_n = false;     // episode ended within the lookahead
  int steps_used = 0;      // m = min(n, steps to episode end)
};

/// Single- or dual-buffer prioritized transition store with n-step assembly.
class ReplayStore {
 public:
  explicit ReplayStore(ReplayConfig config);

  /// Inserts demonstration episodes with is_demo=true and the reward bonus
  /// applied: non-final transitions get r=b, final transitions keep their
  /// sparse environment reward.
  void insert_demoset(const std::vector<Episode>& demo_episodes, Scalar b);

  /// Appends a collected episode (agent buffer in dual mode) at max priority.
  void push_episode(const Episode& episode);

  /// Single mode: proportional PER over the whole tree. Dual mode: exactly
  /// round-half-even(demo_fraction * batch_size) transitions from the demo
  /// buffer, the remainder from the agent buffer.
  SampledBatch sample_batch(int batch_size, Rng& rng) const;

  /// Standard mode: p = delta^2 + eps. Modified mode adds
  /// lambda_actor * actor_term^2 and eps_demo for demonstrations. Stale
  /// handles are skipped and counted.
  void update_priorities(const std::vector<SampleHandle>& handles,
                         const VectorRef& td_errors,
                         const VectorRef& actor_terms);

  /// n-step lookahead from a stored transition, never crossing the episode
  /// boundary.
  NStepView assemble_nstep(const SampleHandle& handle, int n, Scalar gamma) const;

  /// Single mode only: tops the buffer up with freshly generated demo
  /// episodes (relabeled with bonus b) until the demo share reaches the
  /// configured target. No-op in dual mode. The source returns nullopt on
  /// expert failure; repeated failures abort.
  void maintain_demo_ratio(const std::function<std::optional<Episode>()>& demo_source,
                           Scalar b);

  long size() const;
  long demo_transition_count() const;
  Scalar demo_ratio() const;
  long stale_update_count() const { return stale_updates_; }
  const ReplayConfig& config() const { return config_; }

  Scalar raw_priority(const SampleHandle& handle) const;
  const Transition& transition(const SampleHandle& handle) const;
  bool handle_live(const SampleHandle& handle) const;
  std::vector<SampleHandle> live_handles() const;

  /// Debug dump: one line per live transition in the demo-file record layout
  /// plus a priority column. Not a stability-guaranteed format.
  void dump_snapshot(const std::string& path) const;

 private:
  struct Ring {
    long capacity = 0;
    std::vector<Transition> slots;
    std::vector<long> seq;          // -1 while empty
    std::vector<int> episode_len;   // episode length of the occupant
    std::vector<Scalar> raw_priority;
    SumTree tree;
    MaxTree max_tree;
    long size = 0;
    long write = 0;
    long next_seq = 0;
    long demo_count = 0;

    explicit Ring(long cap);
    int push(const Transition& t, int episode_length, Scalar raw_p, Scalar alpha);
    void set_priority(int slot, Scalar raw_p, Scalar alpha);
  };

  const Ring& ring(int buffer) const;
  Ring& ring(int buffer);
  void push_episode_into(Ring& ring, const Episode& episode);
  int sample_from(const Ring& ring, Rng& rng) const;
  Scalar is_weight(const Ring& ring, int slot) const;

  ReplayConfig config_;
  Ring agent_;
  Ring demo_;      // used in dual mode only
  long stale_updates_ = 0;
};

}  // namespace sacr2
