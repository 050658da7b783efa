#include <catch2/catch.hpp>

#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "bufsched/agent.hpp"
#include "bufsched/workload.hpp"

using namespace bufsched;

namespace {

// all-zero weights except a pass-through of one action input, so the Q-value
// ranks candidates by that feature alone
Mlp ranking_net() {
  Mlp net({4, 2, 2, 1}, 1);  // state dims 2, action dims 2
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    for (std::size_t i = 0; i < net.layer_dims()[l + 1]; ++i) {
      for (std::size_t j = 0; j < net.layer_dims()[l]; ++j) {
        net.weight(l, i, j) = 0.0;
      }
    }
  }
  net.weight(0, 0, 2) = 1.0;  // first action feature
  net.weight(1, 0, 0) = 1.0;
  net.weight(2, 0, 0) = 1.0;
  return net;
}

Mlp constant_net(double value) {
  Mlp net({4, 2, 2, 1}, 1);
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    for (std::size_t i = 0; i < net.layer_dims()[l + 1]; ++i) {
      for (std::size_t j = 0; j < net.layer_dims()[l]; ++j) {
        net.weight(l, i, j) = 0.0;
      }
    }
  }
  net.bias(2, 0) = value;
  return net;
}

AgentConfig small_agent_config() {
  AgentConfig cfg;
  cfg.epsilon_decay_steps = 50;
  cfg.replay_capacity = 64;
  cfg.batch_size = 4;
  cfg.min_replay_before_training = 4;
  cfg.target_sync_period = 10;
  cfg.seed = 3;
  return cfg;
}

Workload tiny_workload(std::uint64_t seed) {
  WorkloadSpec spec;
  spec.relation_count = 4;
  spec.block_min = 8;
  spec.block_max = 16;
  spec.index_ratio = 0.25;
  spec.template_count = 4;
  spec.fanout_max = 2;
  spec.query_count = 6;
  spec.test_query_count = 0;
  spec.test_template_fraction = 0.0;
  spec.seed = seed;
  return generate_workload(spec);
}

std::vector<QueuedQuery> queue_of(const Workload& wl) {
  std::vector<QueuedQuery> queue;
  for (const QuerySpec& spec : wl.queries) {
    queue.push_back({spec, expected_reads(spec, wl.catalog)});
  }
  return queue;
}

}  // namespace

TEST_CASE("select_action: argmax with tie-break, exploration, validation") {
  const Mlp net = ranking_net();
  const std::vector<double> state{0.0, 0.0};
  const std::vector<std::vector<double>> candidates{
      {0.1, 0.0}, {0.2, 0.0}, {0.9, 0.0}};
  std::mt19937_64 rng(5);

  REQUIRE(select_action(net, state, candidates, 0.0, rng) == 2);

  // equal scores break toward the lowest index
  const std::vector<std::vector<double>> tied{{0.4, 0.0}, {0.4, 0.1}};
  REQUIRE(select_action(net, state, tied, 0.0, rng) == 0);

  // epsilon = 1 explores uniformly and reproducibly
  std::mt19937_64 rng_a(11), rng_b(11);
  std::set<std::size_t> seen;
  for (int k = 0; k < 64; ++k) {
    const std::size_t pick = select_action(net, state, candidates, 1.0, rng_a);
    REQUIRE(pick == select_action(net, state, candidates, 1.0, rng_b));
    seen.insert(pick);
  }
  REQUIRE(seen == std::set<std::size_t>{0, 1, 2});

  const std::vector<std::vector<double>> one{{0.5, 0.5}};
  for (double eps : {0.0, 0.5, 1.0}) {
    REQUIRE(select_action(net, state, one, eps, rng) == 0);
  }

  REQUIRE_THROWS_AS(
      select_action(net, state, std::vector<std::vector<double>>{}, 0.0, rng),
      std::invalid_argument);
  REQUIRE_THROWS_AS(select_action(net, state, candidates, 1.5, rng),
                    std::invalid_argument);
}

TEST_CASE("bellman_target: terminal, discount, lookahead") {
  const std::vector<int> none;
  const auto q_zero = [](int) { return 0.0; };
  REQUIRE(bellman_target(0.7, none, 0.9, q_zero) == 0.7);

  const std::vector<int> cands{1, 2};
  const auto q_table = [](int id) { return id == 1 ? 0.25 : 1.0; };
  REQUIRE(bellman_target(0.5, cands, 0.0, q_table) == 0.5);
  REQUIRE(bellman_target(0.5, cands, 0.9, q_table) == 0.5 + 0.9 * 1.0);

  // against a network that outputs a constant 1.0
  const Mlp net = constant_net(1.0);
  const std::vector<double> next_state{0.0, 0.0};
  const std::vector<std::vector<double>> actions{{0.3, 0.3}, {0.6, 0.6}};
  const double target = bellman_target(
      0.5, std::vector<int>{0, 1}, 0.9, [&](int k) {
        std::vector<double> x = next_state;
        x.insert(x.end(), actions[static_cast<std::size_t>(k)].begin(),
                 actions[static_cast<std::size_t>(k)].end());
        return net.forward(x);
      });
  REQUIRE(target == 0.5 + 0.9 * 1.0);
}

TEST_CASE("replay buffer is a ring with uniform sampling") {
  ReplayBuffer replay(3);
  REQUIRE_THROWS_AS(ReplayBuffer(0), std::invalid_argument);

  for (int k = 0; k < 5; ++k) {
    Transition tr;
    tr.reward = 0.1 * k;
    tr.terminal = true;
    replay.push(std::move(tr));
  }
  REQUIRE(replay.size() == 3);
  REQUIRE(replay.at(0).reward == Approx(0.2));  // oldest two evicted
  REQUIRE(replay.newest().reward == Approx(0.4));

  std::mt19937_64 rng(8);
  const auto sample = replay.sample(8, rng);
  REQUIRE(sample.size() == 8);
  for (const Transition* t : sample) {
    REQUIRE(t->reward >= Approx(0.2));
  }
}

TEST_CASE("transition invariant: terminal iff no candidates") {
  Transition bad;
  bad.terminal = true;
  bad.next_candidates = {1};
  REQUIRE_THROWS_AS(validate_transition(bad), std::invalid_argument);
  bad.terminal = false;
  bad.next_candidates.clear();
  REQUIRE_THROWS_AS(validate_transition(bad), std::invalid_argument);
  bad.reward = 1.5;
  bad.terminal = true;
  REQUIRE_THROWS_AS(validate_transition(bad), std::invalid_argument);
}

TEST_CASE("observe_and_learn: warmup threshold, eviction, loss") {
  const Workload wl = tiny_workload(2);
  AgentConfig cfg = small_agent_config();
  cfg.replay_capacity = 8;
  cfg.min_replay_before_training = 6;
  DqnAgent agent(wl.catalog, 4, cfg);

  const auto queue = queue_of(wl);
  for (const QueuedQuery& q : queue) agent.action_features(q.spec);

  const std::size_t feat = wl.catalog.size() * 4;
  auto make_tr = [&](double reward, bool last) {
    Transition tr;
    tr.state.assign(feat, 0.0);
    tr.next_state.assign(feat, 0.0);
    tr.action_query_id = queue[0].spec.query_id;
    tr.reward = reward;
    if (!last) tr.next_candidates = {queue[1].spec.query_id};
    tr.terminal = last;
    return tr;
  };

  for (int k = 0; k < 5; ++k) {
    REQUIRE_FALSE(agent.observe_and_learn(make_tr(0.5, false)).has_value());
  }
  REQUIRE(agent.train_steps() == 0);
  const auto loss = agent.observe_and_learn(make_tr(0.5, false));
  REQUIRE(loss.has_value());
  REQUIRE(agent.train_steps() == 1);

  for (int k = 0; k < 10; ++k) agent.observe_and_learn(make_tr(0.25, false));
  REQUIRE(agent.replay().size() == 8);  // capacity bound, oldest gone
  REQUIRE(agent.replay().at(0).reward == Approx(0.25));
}

TEST_CASE("bootstrap targets match an independent forward recomputation") {
  const Workload wl = tiny_workload(3);
  DqnAgent agent(wl.catalog, 4, small_agent_config());
  const auto queue = queue_of(wl);
  for (const QueuedQuery& q : queue) agent.action_features(q.spec);

  BufferPool pool(wl.catalog, 32);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int spot = 0; spot < 3; ++spot) {
    Transition tr;
    tr.state = agent.state_features(pool);
    pool.execute(queue[static_cast<std::size_t>(spot)].reads);
    tr.next_state = agent.state_features(pool);
    tr.action_query_id = queue[static_cast<std::size_t>(spot)].spec.query_id;
    tr.reward = unit(rng);
    for (std::size_t k = static_cast<std::size_t>(spot) + 1; k < queue.size(); ++k) {
      tr.next_candidates.push_back(queue[k].spec.query_id);
    }
    tr.terminal = tr.next_candidates.empty();

    const Mlp& target_net = agent.target_network();
    double best = -1e300;
    for (int qid : tr.next_candidates) {
      std::vector<double> x = tr.next_state;
      const QuerySpec* spec = nullptr;
      for (const auto& q : queue) {
        if (q.spec.query_id == qid) spec = &q.spec;
      }
      const auto& feats = agent.action_features(*spec);
      x.insert(x.end(), feats.begin(), feats.end());
      best = std::max(best, target_net.forward(x));
    }
    const double expected =
        tr.terminal ? tr.reward : tr.reward + agent.config().gamma * best;
    REQUIRE(agent.target_for(tr, target_net) ==
            Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("tabular Q-iteration reaches the hand-solved fixed point") {
  // two states {A, B}, two actions {stay, go}; deterministic transitions:
  //   A/stay: r=0.3 -> A      A/go: r=0.1 -> B
  //   B/stay: r=0.8 -> B      B/go: r=0.2 -> A
  // gamma=0.9. Solving the Bellman equations by hand: V(B)=8 (stay),
  // V(A)=0.1+0.9*8=7.3 (go), so
  //   Q*(A,stay)=0.3+0.9*7.3=6.87   Q*(A,go)=7.3
  //   Q*(B,stay)=8.0                Q*(B,go)=0.2+0.9*7.3=6.77
  enum { A = 0, B = 1, Stay = 0, Go = 1 };
  const double reward[2][2] = {{0.3, 0.1}, {0.8, 0.2}};
  const int next_state[2][2] = {{A, B}, {B, A}};
  const double gamma = 0.9;
  const double alpha = 0.5;
  const std::array<int, 2> actions{Stay, Go};

  double q[2][2] = {{0, 0}, {0, 0}};
  int updates = 0;
  for (; updates < 10000; ++updates) {
    const int s = (updates / 2) % 2;
    const int a = updates % 2;
    const int s2 = next_state[s][a];
    const double target = bellman_target(
        reward[s][a], actions, gamma, [&](int a2) { return q[s2][a2]; });
    q[s][a] += alpha * (target - q[s][a]);
  }
  REQUIRE(q[A][Stay] == Approx(6.87).margin(1e-6));
  REQUIRE(q[A][Go] == Approx(7.3).margin(1e-6));
  REQUIRE(q[B][Stay] == Approx(8.0).margin(1e-6));
  REQUIRE(q[B][Go] == Approx(6.77).margin(1e-6));
}

TEST_CASE("schedule executes every query exactly once") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const Workload wl = tiny_workload(seed);
    DqnAgent agent(wl.catalog, 4, small_agent_config());
    const auto queue = queue_of(wl);
    BufferPool pool(wl.catalog, 24);
    const ScheduleResult r =
        agent.schedule(pool, queue, ScheduleMode::train);

    REQUIRE(r.order.size() == queue.size());
    std::set<std::size_t> unique(r.order.begin(), r.order.end());
    REQUIRE(unique.size() == queue.size());
    for (double reward : r.rewards) {
      REQUIRE(reward >= 0.0);
      REQUIRE(reward <= 1.0);
    }
    // the episode's last transition is terminal with no candidates
    REQUIRE(agent.replay().newest().terminal);
    REQUIRE(agent.replay().newest().next_candidates.empty());
    REQUIRE(agent.decisions() == queue.size());
  }
}

TEST_CASE("evaluate mode is deterministic and leaves the agent untouched") {
  const Workload wl = tiny_workload(5);
  DqnAgent agent(wl.catalog, 4, small_agent_config());
  const auto queue = queue_of(wl);

  BufferPool pool_a(wl.catalog, 24);
  const auto a = agent.schedule(pool_a, queue, ScheduleMode::evaluate);
  REQUIRE(agent.decisions() == 0);
  REQUIRE(agent.replay().size() == 0);

  BufferPool pool_b(wl.catalog, 24);
  const auto b = agent.schedule(pool_b, queue, ScheduleMode::evaluate);
  REQUIRE(a.order == b.order);
  REQUIRE(a.rewards == b.rewards);

  // and matches the standalone frozen-policy runner
  BufferPool pool_c(wl.catalog, 24);
  const auto c = run_q_policy(pool_c, queue, wl.catalog, 4, agent.network());
  REQUIRE(a.order == c.order);
}

TEST_CASE("epsilon anneals linearly over the configured decisions") {
  const Workload wl = tiny_workload(6);
  AgentConfig cfg = small_agent_config();
  cfg.epsilon_start = 1.0;
  cfg.epsilon_end = 0.0;
  cfg.epsilon_decay_steps = 12;  // two 6-query episodes
  DqnAgent agent(wl.catalog, 4, cfg);
  REQUIRE(agent.current_epsilon() == 1.0);

  const auto queue = queue_of(wl);
  BufferPool pool(wl.catalog, 24);
  agent.schedule(pool, queue, ScheduleMode::train);
  REQUIRE(agent.current_epsilon() == Approx(0.5));
  BufferPool pool2(wl.catalog, 24);
  agent.schedule(pool2, queue, ScheduleMode::train);
  REQUIRE(agent.current_epsilon() == 0.0);
  BufferPool pool3(wl.catalog, 24);
  agent.schedule(pool3, queue, ScheduleMode::train);
  REQUIRE(agent.current_epsilon() == 0.0);  // clamped
}

TEST_CASE("ablation flags: no replay, no target network") {
  const Workload wl = tiny_workload(8);
  const auto queue = queue_of(wl);

  AgentConfig no_replay = small_agent_config();
  no_replay.use_replay = false;
  DqnAgent a(wl.catalog, 4, no_replay);
  {
    BufferPool pool(wl.catalog, 24);
    a.schedule(pool, queue, ScheduleMode::train);
    // training starts with the very first transition
    REQUIRE(a.train_steps() == queue.size());
  }

  AgentConfig no_target = small_agent_config();
  no_target.use_target_network = false;
  no_target.min_replay_before_training = 1;
  DqnAgent b(wl.catalog, 4, no_target);
  {
    BufferPool pool(wl.catalog, 24);
    b.schedule(pool, queue, ScheduleMode::train);
    REQUIRE(b.train_steps() == queue.size());
    // the frozen copy never syncs, so it still equals the initial network
    REQUIRE_FALSE(b.target_network() == b.network());
    REQUIRE(b.target_network() == Mlp(DqnAgent::q_network_dims(wl.catalog, 4),
                                      derive_seed(no_target.seed, 0xA11)));
  }
}

TEST_CASE("agent checkpoint restores policy, position, and config") {
  const Workload wl = tiny_workload(7);
  DqnAgent agent(wl.catalog, 4, small_agent_config());
  const auto queue = queue_of(wl);
  for (int epoch = 0; epoch < 3; ++epoch) {
    BufferPool pool(wl.catalog, 24);
    agent.schedule(pool, queue, ScheduleMode::train);
  }

  const std::string path = "agent_roundtrip.ckpt";
  agent.save(path);
  DqnAgent loaded = DqnAgent::load(path);
  std::remove(path.c_str());

  REQUIRE(loaded.network() == agent.network());
  REQUIRE(loaded.target_network() == agent.target_network());
  REQUIRE(loaded.decisions() == agent.decisions());
  REQUIRE(loaded.train_steps() == agent.train_steps());
  REQUIRE(loaded.current_epsilon() == agent.current_epsilon());
  REQUIRE(loaded.catalog() == agent.catalog());
  REQUIRE(loaded.width() == agent.width());

  BufferPool pool_a(wl.catalog, 24);
  BufferPool pool_b(wl.catalog, 24);
  const auto a = agent.schedule(pool_a, queue, ScheduleMode::evaluate);
  const auto b = loaded.schedule(pool_b, queue, ScheduleMode::evaluate);
  REQUIRE(a.order == b.order);
}
