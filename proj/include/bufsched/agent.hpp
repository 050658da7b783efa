#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bufsched/buffer_pool.hpp"
#include "bufsched/catalog.hpp"
#include "bufsched/encoding.hpp"
#include "bufsched/mlp.hpp"
#include "bufsched/schedule.hpp"
#include "bufsched/util.hpp"

namespace bufsched {

/// One scheduling experience. Candidate actions are referenced by query id;
/// the owning agent keeps the id -> action-feature table.
struct Transition {
  std::vector<double> state;
  int action_query_id = 0;
  double reward = 0.0;
  std::vector<double> next_state;
  std::vector<int> next_candidates;  // query ids still schedulable
  bool terminal = false;
};

inline void validate_transition(const Transition& tr) {
  if (tr.terminal != tr.next_candidates.empty()) {
    throw std::invalid_argument(
        "transition must be terminal exactly when no candidates remain");
  }
  if (tr.reward < 0.0 || tr.reward > 1.0) {
    throw std::invalid_argument("transition reward must be in [0,1]");
  }
}

/// Fixed-capacity ring of transitions, oldest evicted first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) {
      throw std::invalid_argument("replay capacity must be positive");
    }
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return ring_.size(); }

  void push(Transition tr) {
    if (ring_.size() < capacity_) {
      ring_.push_back(std::move(tr));
    } else {
      ring_[head_] = std::move(tr);
      head_ = (head_ + 1) % capacity_;
    }
  }

  /// i = 0 is the oldest stored transition.
  const Transition& at(std::size_t i) const {
    return ring_[(head_ + i) % ring_.size()];
  }

  const Transition& newest() const { return at(size() - 1); }

  template <class Rng>
  std::vector<const Transition*> sample(std::size_t n, Rng& rng) const {
    std::uniform_int_distribution<std::size_t> pick(0, ring_.size() - 1);
    std::vector<const Transition*> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) out.push_back(&ring_[pick(rng)]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // oldest element once the ring is full
  std::vector<Transition> ring_;
};

struct AgentConfig {
  double gamma = 0.9;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  // decisions over which epsilon anneals linearly; 0 lets the harness size it
  // to half the planned training decisions
  std::uint64_t epsilon_decay_steps = 0;
  std::size_t replay_capacity = 2000;
  std::size_t batch_size = 16;
  std::size_t min_replay_before_training = 64;
  std::uint64_t target_sync_period = 500;
  double learning_rate = 1e-3;
  bool use_replay = true;          // off: train on the latest transition only
  bool use_target_network = true;  // off: bootstrap from the online network
  std::uint64_t seed = 1;
};

inline void validate_agent_config(const AgentConfig& cfg) {
  if (cfg.gamma < 0.0 || cfg.gamma > 1.0) {
    throw std::invalid_argument("gamma must be in [0,1]");
  }
  for (double e : {cfg.epsilon_start, cfg.epsilon_end}) {
    if (e < 0.0 || e > 1.0) {
      throw std::invalid_argument("epsilon bounds must be in [0,1]");
    }
  }
  if (cfg.epsilon_decay_steps == 0) {
    throw std::invalid_argument("epsilon_decay_steps must be >= 1");
  }
  if (cfg.batch_size == 0) {
    throw std::invalid_argument("batch_size must be >= 1");
  }
  if (cfg.target_sync_period == 0) {
    throw std::invalid_argument("target_sync_period must be >= 1");
  }
}

/// One-step lookahead value: the reward alone when no candidates remain,
/// otherwise reward + gamma * best candidate value.
template <class CandidateRange, class QValueFn>
double bellman_target(double reward, const CandidateRange& next_candidates,
                      double gamma, QValueFn&& q_value) {
  double best = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (const auto& c : next_candidates) {
    best = std::max(best, q_value(c));
    any = true;
  }
  return any ? reward + gamma * best : reward;
}

namespace detail {

inline std::vector<double> combine_first_layer(std::span<const double> a,
                                               std::span<const double> b,
                                               std::span<const double> bias) {
  std::vector<double> z(a.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = a[i] + b[i] + bias[i];
  return z;
}

/// Argmax of Q(state, action_k) over candidates, ties to the lowest index.
/// `action_features(k)` returns the k-th candidate's feature row.
template <class FeatureAt>
std::size_t argmax_q(const Mlp& net, std::span<const double> state,
                     std::size_t n_candidates, FeatureAt&& action_features) {
  const std::vector<double> state_part = net.first_layer_partial(state, 0);
  std::size_t best = 0;
  double best_q = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n_candidates; ++k) {
    const std::vector<double> action_part =
        net.first_layer_partial(action_features(k), state.size());
    const std::vector<double> z =
        combine_first_layer(state_part, action_part, net.first_layer_bias());
    const double q = net.forward_from_first_layer(z);
    if (q > best_q) {
      best = k;
      best_q = q;
    }
  }
  return best;
}

}  // namespace detail

/// Epsilon-greedy pick over the candidate queue: a uniform index with
/// probability epsilon, otherwise the Q-argmax (ties to the lowest index).
template <class Rng, class FeatureAt>
std::size_t select_action(const Mlp& net, std::span<const double> state,
                          std::size_t n_candidates, FeatureAt&& action_features,
                          double epsilon, Rng& rng) {
  if (n_candidates == 0) {
    throw std::invalid_argument("select_action on empty queue");
  }
  if (epsilon < 0.0 || epsilon > 1.0) {
    throw std::invalid_argument("epsilon must be in [0,1]");
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) < epsilon) {
    std::uniform_int_distribution<std::size_t> pick(0, n_candidates - 1);
    return pick(rng);
  }
  return detail::argmax_q(net, state, n_candidates, action_features);
}

template <class Rng>
std::size_t select_action(const Mlp& net, std::span<const double> state,
                          const std::vector<std::vector<double>>& candidates,
                          double epsilon, Rng& rng) {
  return select_action(
      net, state, candidates.size(),
      [&](std::size_t k) { return std::span<const double>(candidates[k]); },
      epsilon, rng);
}

enum class ScheduleMode { train, evaluate };

/// Deep-Q scheduler. Owns the online and target networks, the replay ring,
/// and the per-query action features for the workload it schedules.
class DqnAgent {
 public:
  DqnAgent(Catalog catalog, std::size_t width, AgentConfig cfg)
      : catalog_(std::move(catalog)),
        width_(width),
        cfg_(cfg),
        online_(q_network_dims(catalog_, width), derive_seed(cfg.seed, 0xA11)),
        target_(online_),
        adam_(online_, cfg.learning_rate),
        replay_(cfg.replay_capacity),
        rng_(derive_seed(cfg.seed, 0xB22)) {
    validate_agent_config(cfg_);
    if (width_ == 0) throw std::invalid_argument("encoding width must be >= 1");
  }

  static std::vector<std::size_t> q_network_dims(const Catalog& catalog,
                                                 std::size_t width) {
    return {2 * catalog.size() * width, 128, 128, 1};
  }

  const Catalog& catalog() const { return catalog_; }
  std::size_t width() const { return width_; }
  const AgentConfig& config() const { return cfg_; }
  const Mlp& network() const { return online_; }
  const Mlp& target_network() const { return target_; }
  const ReplayBuffer& replay() const { return replay_; }
  std::uint64_t decisions() const { return decisions_; }
  std::uint64_t train_steps() const { return train_steps_; }

  /// Linear epsilon anneal by training-decision count.
  double current_epsilon() const {
    const double frac =
        std::min(1.0, static_cast<double>(decisions_) /
                          static_cast<double>(cfg_.epsilon_decay_steps));
    return cfg_.epsilon_start + frac * (cfg_.epsilon_end - cfg_.epsilon_start);
  }

  /// Feature row for one query, cached by query id.
  const std::vector<double>& action_features(const QuerySpec& spec) {
    auto it = action_features_.find(spec.query_id);
    if (it != action_features_.end()) return it->second;
    const Matrix action = encode_query_action(access_matrix(spec, catalog_), width_);
    return action_features_.emplace(spec.query_id, action.cells).first->second;
  }

  std::vector<double> state_features(const BufferPool& pool) const {
    return encode_buffer_state(pool.snapshot(catalog_), width_).cells;
  }

  /// Drains the queue. Train mode explores per the epsilon schedule and
  /// learns after every decision; evaluate mode is greedy on Q and leaves all
  /// agent state untouched. `on_decision`, when set, fires after each
  /// executed query with the cumulative training-decision count.
  template <class DecisionHook = std::nullptr_t>
  ScheduleResult schedule(BufferPool& pool, std::span<const QueuedQuery> queue,
                          ScheduleMode mode, DecisionHook&& on_decision = nullptr) {
    if (queue.empty()) {
      throw std::invalid_argument("schedule queue must be nonempty");
    }
    for (const QueuedQuery& q : queue) action_features(q.spec);

    std::vector<std::size_t> remaining(queue.size());
    std::iota(remaining.begin(), remaining.end(), 0);

    ScheduleResult result;
    result.order.reserve(queue.size());

    std::vector<double> state = state_features(pool);
    while (!remaining.empty()) {
      const auto features_at = [&](std::size_t k) {
        return std::span<const double>(
            action_features_.at(queue[remaining[k]].spec.query_id));
      };
      // evaluate mode is pure argmax and must not advance the training rng
      const std::size_t pos =
          mode == ScheduleMode::train
              ? select_action(online_, state, remaining.size(), features_at,
                              current_epsilon(), rng_)
              : detail::argmax_q(online_, state, remaining.size(), features_at);
      const std::size_t chosen = remaining[pos];

      const ExecutionStats stats = pool.execute(queue[chosen].reads);
      const double reward = hit_ratio(stats);
      result.order.push_back(chosen);
      result.stats.push_back(stats);
      result.rewards.push_back(reward);

      remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pos));
      std::vector<double> next_state = state_features(pool);

      if (mode == ScheduleMode::train) {
        Transition tr;
        tr.state = std::move(state);
        tr.action_query_id = queue[chosen].spec.query_id;
        tr.reward = reward;
        tr.next_state = next_state;
        tr.next_candidates.reserve(remaining.size());
        for (std::size_t idx : remaining) {
          tr.next_candidates.push_back(queue[idx].spec.query_id);
        }
        tr.terminal = remaining.empty();
        ++decisions_;
        observe_and_learn(std::move(tr));
        if constexpr (!std::is_same_v<std::decay_t<DecisionHook>,
                                      std::nullptr_t>) {
          on_decision(decisions_);
        }
      }
      state = std::move(next_state);
    }
    return result;
  }

  /// Stores the transition and, once enough experience is buffered, performs
  /// one Q-update toward the bootstrapped targets. Returns the training loss
  /// when a step ran.
  std::optional<double> observe_and_learn(Transition tr) {
    validate_transition(tr);
    replay_.push(std::move(tr));

    const std::size_t threshold =
        std::max<std::size_t>(cfg_.min_replay_before_training, 1);
    if (cfg_.use_replay && replay_.size() < threshold) return std::nullopt;

    std::vector<const Transition*> batch;
    if (cfg_.use_replay) {
      batch = replay_.sample(cfg_.batch_size, rng_);
    } else {
      batch.push_back(&replay_.newest());
    }

    const Mlp& boot = cfg_.use_target_network ? target_ : online_;
    std::vector<TrainSample> samples;
    samples.reserve(batch.size());
    for (const Transition* t : batch) {
      TrainSample s;
      s.target = target_for(*t, boot);
      s.input.reserve(2 * t->state.size());
      s.input.insert(s.input.end(), t->state.begin(), t->state.end());
      const std::vector<double>& act = action_features_.at(t->action_query_id);
      s.input.insert(s.input.end(), act.begin(), act.end());
      samples.push_back(std::move(s));
    }

    const double loss = online_.train_batch(adam_, samples);
    ++train_steps_;
    if (cfg_.use_target_network && train_steps_ % cfg_.target_sync_period == 0) {
      sync_target();
    }
    return loss;
  }

  void sync_target() {
    target_ = online_;
    target_action_proj_.clear();
  }

  /// Bellman target for one stored transition, bootstrapping from `boot`.
  double target_for(const Transition& tr, const Mlp& boot) {
    if (tr.terminal) return tr.reward;
    const std::vector<double> state_part =
        boot.first_layer_partial(tr.next_state, 0);
    const bool cacheable = cfg_.use_target_network && &boot == &target_;
    return bellman_target(
        tr.reward, tr.next_candidates, cfg_.gamma, [&](int query_id) {
          std::span<const double> action_part;
          std::vector<double> scratch;
          if (cacheable) {
            action_part = target_action_projection(query_id);
          } else {
            scratch = boot.first_layer_partial(action_features_.at(query_id),
                                               tr.next_state.size());
            action_part = scratch;
          }
          const std::vector<double> z = detail::combine_first_layer(
              state_part, action_part, boot.first_layer_bias());
          return boot.forward_from_first_layer(z);
        });
  }

  void save(const std::string& path) const;
  static DqnAgent load(const std::string& path);

 private:
  DqnAgent(Catalog catalog, std::size_t width, AgentConfig cfg, Mlp online,
           Mlp target, AdamState adam)
      : catalog_(std::move(catalog)),
        width_(width),
        cfg_(cfg),
        online_(std::move(online)),
        target_(std::move(target)),
        adam_(std::move(adam)),
        replay_(cfg.replay_capacity),
        rng_(0) {}

  /// Target-network first-layer projection of one query's action features,
  /// cached between target syncs.
  std::span<const double> target_action_projection(int query_id) {
    auto it = target_action_proj_.find(query_id);
    if (it == target_action_proj_.end()) {
      it = target_action_proj_
               .emplace(query_id,
                        target_.first_layer_partial(
                            action_features_.at(query_id),
                            catalog_.size() * width_))
               .first;
    }
    return it->second;
  }

  Catalog catalog_;
  std::size_t width_;
  AgentConfig cfg_;
  Mlp online_;
  Mlp target_;
  AdamState adam_;
  ReplayBuffer replay_;
  std::map<int, std::vector<double>> action_features_;
  std::map<int, std::vector<double>> target_action_proj_;
  std::mt19937_64 rng_;
  std::uint64_t decisions_ = 0;
  std::uint64_t train_steps_ = 0;
};

namespace detail {

inline void write_string(std::ostream& os, const std::string& s) {
  write_raw(os, static_cast<std::uint64_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
  std::uint64_t n = 0;
  read_raw(is, n);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw std::runtime_error("truncated checkpoint stream");
  return s;
}

inline void write_catalog_blob(std::ostream& os, const Catalog& catalog) {
  write_raw(os, static_cast<std::uint64_t>(catalog.size()));
  for (const RelationMeta& r : catalog.relations()) {
    write_raw(os, static_cast<std::int32_t>(r.id));
    write_raw(os, static_cast<std::uint8_t>(r.kind == RelationKind::index));
    write_raw(os, r.block_count);
    write_string(os, r.name);
  }
}

inline Catalog read_catalog_blob(std::istream& is) {
  std::uint64_t n = 0;
  read_raw(is, n);
  std::vector<RelationMeta> relations;
  relations.reserve(n);
  for (std::uint64_t k = 0; k < n; ++k) {
    RelationMeta r;
    std::int32_t id = 0;
    std::uint8_t kind = 0;
    read_raw(is, id);
    read_raw(is, kind);
    read_raw(is, r.block_count);
    r.name = read_string(is);
    r.id = id;
    r.kind = kind ? RelationKind::index : RelationKind::base;
    relations.push_back(std::move(r));
  }
  return Catalog(std::move(relations));
}

inline void write_agent_config(std::ostream& os, const AgentConfig& c) {
  write_raw(os, c.gamma);
  write_raw(os, c.epsilon_start);
  write_raw(os, c.epsilon_end);
  write_raw(os, c.epsilon_decay_steps);
  write_raw(os, static_cast<std::uint64_t>(c.replay_capacity));
  write_raw(os, static_cast<std::uint64_t>(c.batch_size));
  write_raw(os, static_cast<std::uint64_t>(c.min_replay_before_training));
  write_raw(os, c.target_sync_period);
  write_raw(os, c.learning_rate);
  write_raw(os, static_cast<std::uint8_t>(c.use_replay));
  write_raw(os, static_cast<std::uint8_t>(c.use_target_network));
  write_raw(os, c.seed);
}

inline AgentConfig read_agent_config(std::istream& is) {
  AgentConfig c;
  std::uint64_t u = 0;
  std::uint8_t b = 0;
  read_raw(is, c.gamma);
  read_raw(is, c.epsilon_start);
  read_raw(is, c.epsilon_end);
  read_raw(is, c.epsilon_decay_steps);
  read_raw(is, u);
  c.replay_capacity = static_cast<std::size_t>(u);
  read_raw(is, u);
  c.batch_size = static_cast<std::size_t>(u);
  read_raw(is, u);
  c.min_replay_before_training = static_cast<std::size_t>(u);
  read_raw(is, c.target_sync_period);
  read_raw(is, c.learning_rate);
  read_raw(is, b);
  c.use_replay = b != 0;
  read_raw(is, b);
  c.use_target_network = b != 0;
  read_raw(is, c.seed);
  return c;
}

inline constexpr char kAgentMagic[9] = "BSAGNT1\0";

}  // namespace detail

/// Agent checkpoint: catalog, config, networks and optimizer, decision
/// counters, and the rng state. Replay contents are not persisted.
inline void DqnAgent::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint file " + path);
  os.write(detail::kAgentMagic, 8);
  detail::write_raw(os, static_cast<std::uint64_t>(width_));
  detail::write_catalog_blob(os, catalog_);
  detail::write_agent_config(os, cfg_);
  detail::write_raw(os, decisions_);
  detail::write_raw(os, train_steps_);
  std::ostringstream rng_text;
  rng_text << rng_;
  detail::write_string(os, rng_text.str());
  online_.save(os);
  save_adam(os, adam_);
  target_.save(os);
  if (!os) throw std::runtime_error("failed writing checkpoint file " + path);
}

inline DqnAgent DqnAgent::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint file " + path);
  char magic[8] = {};
  is.read(magic, 8);
  if (!is || std::memcmp(magic, detail::kAgentMagic, 8) != 0) {
    throw std::runtime_error("bad agent checkpoint magic");
  }
  std::uint64_t width = 0;
  detail::read_raw(is, width);
  Catalog catalog = detail::read_catalog_blob(is);
  AgentConfig cfg = detail::read_agent_config(is);
  std::uint64_t decisions = 0, train_steps = 0;
  detail::read_raw(is, decisions);
  detail::read_raw(is, train_steps);
  const std::string rng_text = detail::read_string(is);
  Mlp online = Mlp::load(is);
  AdamState adam = load_adam(is);
  Mlp target = Mlp::load(is);

  DqnAgent agent(std::move(catalog), static_cast<std::size_t>(width), cfg,
                 std::move(online), std::move(target), std::move(adam));
  agent.decisions_ = decisions;
  agent.train_steps_ = train_steps;
  std::istringstream rng_in(rng_text);
  rng_in >> agent.rng_;
  return agent;
}

/// Greedy-on-Q evaluation of a frozen network over one queue: the policy a
/// checkpoint induces, with exploration off. The caller's agent state is
/// never touched.
inline ScheduleResult run_q_policy(BufferPool& pool,
                                   std::span<const QueuedQuery> queue,
                                   const Catalog& catalog, std::size_t width,
                                   const Mlp& net) {
  std::vector<std::vector<double>> action_feats;
  action_feats.reserve(queue.size());
  for (const QueuedQuery& q : queue) {
    action_feats.push_back(
        encode_query_action(access_matrix(q.spec, catalog), width).cells);
  }
  return run_schedule(
      pool, queue, [&](std::span<const std::size_t> remaining) {
        const std::vector<double> state =
            encode_buffer_state(pool.snapshot(catalog), width).cells;
        return detail::argmax_q(net, state, remaining.size(),
                                [&](std::size_t k) {
                                  return std::span<const double>(
                                      action_feats[remaining[k]]);
                                });
      });
}

}  // namespace bufsched
