#include "sacr2/replay.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace sacr2 {

Episode relabel_success(const Episode& episode, Scalar b, int demo_mean_length) {
  if (!episode.success)
    throw ContractViolation("relabel_success: episode is not successful");
  if (demo_mean_length < 2)
    throw ContractViolation("relabel_success: N must be >= 2");
  Episode out = episode;
  const int len = out.length();
  const int count = std::min(demo_mean_length - 1, len - 1);
  for (int i = len - 1 - count; i < len - 1; ++i) out.transitions[size_t(i)].r = b;
  return out;
}

namespace {
int leaf_base(int capacity) {
  int base = 1;
  while (base < capacity) base *= 2;
  return base;
}
}  // namespace

SumTree::SumTree(int capacity)
    : capacity_(capacity),
      base_(leaf_base(std::max(capacity, 1))),
      nodes_(size_t(2 * base_), Scalar(0)) {}

void SumTree::set(int index, Scalar value) {
  int node = base_ + index;
  nodes_[size_t(node)] = value;
  for (node /= 2; node >= 1; node /= 2)
    nodes_[size_t(node)] = nodes_[size_t(2 * node)] + nodes_[size_t(2 * node + 1)];
}

int SumTree::find_prefix(Scalar prefix) const {
  int node = 1;
  while (node < base_) {
    const Scalar left = nodes_[size_t(2 * node)];
    if (prefix < left) {
      node = 2 * node;
    } else {
      prefix -= left;
      node = 2 * node + 1;
    }
  }
  return node - base_;
}

MaxTree::MaxTree(int capacity)
    : capacity_(capacity),
      base_(leaf_base(std::max(capacity, 1))),
      nodes_(size_t(2 * base_), Scalar(0)) {}

void MaxTree::set(int index, Scalar value) {
  int node = base_ + index;
  nodes_[size_t(node)] = value;
  for (node /= 2; node >= 1; node /= 2)
    nodes_[size_t(node)] =
        std::max(nodes_[size_t(2 * node)], nodes_[size_t(2 * node + 1)]);
}

void ReplayConfig::validate() const {
  if (capacity < 1) throw ContractViolation("ReplayConfig: capacity must be >= 1");
  if (mode == BufferMode::kDual && demo_capacity < 1)
    throw ContractViolation("ReplayConfig: demo_capacity must be >= 1");
  if (!(demo_fraction >= 0 && demo_fraction <= 1))
    throw ContractViolation("ReplayConfig: demo_fraction must be in [0, 1]");
  if (!(target_demo_ratio >= 0 && target_demo_ratio < 1))
    throw ContractViolation("ReplayConfig: target_demo_ratio must be in [0, 1)");
  if (!(per_alpha >= 0) || !(per_beta >= 0) || !(per_eps > 0) ||
      !(per_eps_demo >= 0) || !(per_lambda_actor >= 0))
    throw ContractViolation("ReplayConfig: PER constants out of range");
}

ReplayStore::Ring::Ring(long cap)
    : capacity(cap),
      seq(size_t(cap), -1),
      episode_len(size_t(cap), 0),
      raw_priority(size_t(cap), 0),
      tree(int(cap)),
      max_tree(int(cap)) {
  slots.resize(size_t(cap));
}

int ReplayStore::Ring::push(const Transition& t, int episode_length, Scalar raw_p,
                            Scalar alpha) {
  const int slot = int(write);
  if (seq[size_t(slot)] >= 0 && slots[size_t(slot)].is_demo) --demo_count;
  slots[size_t(slot)] = t;
  seq[size_t(slot)] = next_seq++;
  episode_len[size_t(slot)] = episode_length;
  set_priority(slot, raw_p, alpha);
  if (t.is_demo) ++demo_count;
  write = (write + 1) % capacity;
  size = std::min(size + 1, capacity);
  return slot;
}

void ReplayStore::Ring::set_priority(int slot, Scalar raw_p, Scalar alpha) {
  raw_priority[size_t(slot)] = raw_p;
  tree.set(slot, std::pow(raw_p, alpha));
  max_tree.set(slot, raw_p);
}

ReplayStore::ReplayStore(ReplayConfig config)
    : config_(std::move(config)),
      agent_(config_.capacity),
      demo_(config_.mode == BufferMode::kDual ? config_.demo_capacity : 1) {
  config_.validate();
}

const ReplayStore::Ring& ReplayStore::ring(int buffer) const {
  return buffer == 0 ? agent_ : demo_;
}
ReplayStore::Ring& ReplayStore::ring(int buffer) { return buffer == 0 ? agent_ : demo_; }

void ReplayStore::push_episode_into(Ring& ring, const Episode& episode) {
  const int len = episode.length();
  if (len == 0) throw ContractViolation("push_episode: empty episode");
  if (len > ring.capacity)
    throw ContractViolation("push_episode: episode longer than buffer capacity");
  for (int i = 0; i < len; ++i) {
    const Transition& t = episode.transitions[size_t(i)];
    if (t.step_idx != i)
      throw ContractViolation("push_episode: step_idx not contiguous from 0");
    if (t.done != (i == len - 1))
      throw ContractViolation("push_episode: done must be set exactly on the final transition");
  }
  const Scalar current_max = ring.max_tree.max();
  const Scalar init_p = current_max > 0 ? current_max : Scalar(1);
  for (const Transition& t : episode.transitions)
    ring.push(t, len, init_p, config_.per_alpha);
}

void ReplayStore::insert_demoset(const std::vector<Episode>& demo_episodes, Scalar b) {
  if (b < 0) throw ContractViolation("insert_demoset: bonus must be >= 0");
  Ring& target = config_.mode == BufferMode::kDual ? demo_ : agent_;
  for (const Episode& episode : demo_episodes) {
    Episode relabeled = episode;
    for (int i = 0; i + 1 < relabeled.length(); ++i)
      relabeled.transitions[size_t(i)].r = b;
    for (Transition& t : relabeled.transitions) t.is_demo = true;
    push_episode_into(target, relabeled);
  }
}

void ReplayStore::push_episode(const Episode& episode) {
  push_episode_into(agent_, episode);
}

int ReplayStore::sample_from(const Ring& ring, Rng& rng) const {
  const Scalar mass = ring.tree.total();
  int slot = ring.tree.find_prefix(rng.uniform() * mass);
  // fp boundary fixup: never return an empty leaf
  while (slot >= 0 && ring.seq[size_t(slot)] < 0) --slot;
  if (slot < 0) throw ContractViolation("sample_batch: sampled from empty buffer");
  return slot;
}

Scalar ReplayStore::is_weight(const Ring& ring, int slot) const {
  const Scalar prob = ring.tree.value(slot) / ring.tree.total();
  return std::pow(Scalar(1) / (Scalar(ring.size) * prob), config_.per_beta);
}

SampledBatch ReplayStore::sample_batch(int batch_size, Rng& rng) const {
  if (batch_size < 1) throw ContractViolation("sample_batch: batch_size must be >= 1");
  SampledBatch batch;
  batch.transitions.reserve(size_t(batch_size));
  batch.handles.reserve(size_t(batch_size));
  batch.is_weights = Vector::Ones(batch_size);

  int demo_draws = 0;
  if (config_.mode == BufferMode::kDual) {
    demo_draws = int(std::nearbyint(config_.demo_fraction * batch_size));
    if (demo_draws > 0 && demo_.size == 0)
      throw ContractViolation("sample_batch: demo buffer empty in dual mode");
    if (demo_draws < batch_size && agent_.size == 0)
      throw ContractViolation("sample_batch: agent buffer empty in dual mode");
  } else if (agent_.size == 0) {
    throw ContractViolation("sample_batch: buffer empty");
  }

  for (int i = 0; i < batch_size; ++i) {
    const bool from_demo = i < demo_draws;
    const Ring& src = from_demo ? demo_ : agent_;
    const int slot = sample_from(src, rng);
    batch.transitions.push_back(src.slots[size_t(slot)]);
    batch.handles.push_back({from_demo ? 1 : 0, slot, src.seq[size_t(slot)]});
    if (config_.use_is_weights) batch.is_weights[i] = is_weight(src, slot);
  }
  if (config_.use_is_weights) {
    const Scalar max_w = batch.is_weights.maxCoeff();
    if (max_w > 0) batch.is_weights /= max_w;
  }
  return batch;
}

void ReplayStore::update_priorities(const std::vector<SampleHandle>& handles,
                                    const VectorRef& td_errors,
                                    const VectorRef& actor_terms) {
  if (td_errors.size() != long(handles.size()))
    throw ContractViolation("update_priorities: td_errors size mismatch");
  const bool modified = config_.per_mode == PerMode::kModified;
  if (modified && actor_terms.size() != long(handles.size()))
    throw ContractViolation("update_priorities: actor_terms required in modified mode");
  for (size_t i = 0; i < handles.size(); ++i) {
    const SampleHandle& h = handles[i];
    Ring& r = ring(h.buffer);
    if (h.slot < 0 || h.slot >= r.capacity || r.seq[size_t(h.slot)] != h.seq) {
      ++stale_updates_;  // evicted since sampling
      continue;
    }
    const Scalar delta = td_errors[long(i)];
    Scalar p = delta * delta + config_.per_eps;
    if (modified) {
      const Scalar a = actor_terms[long(i)];
      p += config_.per_lambda_actor * a * a;
      if (r.slots[size_t(h.slot)].is_demo) p += config_.per_eps_demo;
    }
    r.set_priority(h.slot, p, config_.per_alpha);
  }
}

NStepView ReplayStore::assemble_nstep(const SampleHandle& handle, int n,
                                      Scalar gamma) const {
  if (n < 1) throw ContractViolation("assemble_nstep: n must be >= 1");
  const Ring& r = ring(handle.buffer);
  if (handle.slot < 0 || handle.slot >= r.capacity ||
      r.seq[size_t(handle.slot)] != handle.seq)
    throw ContractViolation("assemble_nstep: stale handle");

  const Transition& first = r.slots[size_t(handle.slot)];
  const int len = r.episode_len[size_t(handle.slot)];
  const int m = std::min(n, len - first.step_idx);

  NStepView view;
  Scalar disc = 1;
  long slot = handle.slot;
  for (int k = 0; k < m; ++k) {
    const Transition& t = r.slots[size_t(slot)];
    view.return_n += disc * t.r;
    disc *= gamma;
    if (k == m - 1) {
      view.bootstrap_obs = t.s_next;
      view.done_n = t.done;
    }
    slot = (slot + 1) % r.capacity;
  }
  view.steps_used = m;
  return view;
}

void ReplayStore::maintain_demo_ratio(
    const std::function<std::optional<Episode>()>& demo_source, Scalar b) {
  if (config_.mode == BufferMode::kDual) return;  // ratio enforced at sampling time
  if (config_.target_demo_ratio <= 0) return;
  int consecutive_failures = 0;
  while (agent_.size > 0 &&
         Scalar(agent_.demo_count) < config_.target_demo_ratio * Scalar(agent_.size)) {
    std::optional<Episode> episode = demo_source();
    if (!episode) {
      if (++consecutive_failures >= 20)
        throw TrainingDiverged("maintain_demo_ratio: expert failure cascade");
      continue;
    }
    consecutive_failures = 0;
    insert_demoset({*episode}, b);
  }
}

long ReplayStore::size() const {
  return agent_.size + (config_.mode == BufferMode::kDual ? demo_.size : 0);
}

long ReplayStore::demo_transition_count() const {
  return agent_.demo_count + (config_.mode == BufferMode::kDual ? demo_.demo_count : 0);
}

Scalar ReplayStore::demo_ratio() const {
  const long n = size();
  return n == 0 ? Scalar(0) : Scalar(demo_transition_count()) / Scalar(n);
}

Scalar ReplayStore::raw_priority(const SampleHandle& handle) const {
  const Ring& r = ring(handle.buffer);
  if (!handle_live(handle)) throw ContractViolation("raw_priority: stale handle");
  return r.raw_priority[size_t(handle.slot)];
}

const Transition& ReplayStore::transition(const SampleHandle& handle) const {
  const Ring& r = ring(handle.buffer);
  if (!handle_live(handle)) throw ContractViolation("transition: stale handle");
  return r.slots[size_t(handle.slot)];
}

bool ReplayStore::handle_live(const SampleHandle& handle) const {
  const Ring& r = ring(handle.buffer);
  return handle.slot >= 0 && handle.slot < r.capacity &&
         r.seq[size_t(handle.slot)] == handle.seq;
}

std::vector<SampleHandle> ReplayStore::live_handles() const {
  std::vector<SampleHandle> out;
  const int buffers = config_.mode == BufferMode::kDual ? 2 : 1;
  for (int b = 0; b < buffers; ++b) {
    const Ring& r = ring(b);
    const long start = (r.write - r.size + 2 * r.capacity) % r.capacity;
    for (long k = 0; k < r.size; ++k) {
      const long slot = (start + k) % r.capacity;
      out.push_back({b, int(slot), r.seq[size_t(slot)]});
    }
  }
  return out;
}

void ReplayStore::dump_snapshot(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("dump_snapshot: cannot open " + path);
  for (const SampleHandle& h : live_handles()) {
    const Transition& t = transition(h);
    out << t.episode_id << ' ' << t.step_idx;
    for (long i = 0; i < t.s.size(); ++i) out << ' ' << format_double(t.s[i]);
    for (long i = 0; i < t.a.size(); ++i) out << ' ' << format_double(t.a[i]);
    out << ' ' << format_double(t.r);
    for (long i = 0; i < t.s_next.size(); ++i) out << ' ' << format_double(t.s_next[i]);
    out << ' ' << int(t.done) << ' ' << format_double(raw_priority(h)) << '\n';
  }
}

}  // namespace sacr2
