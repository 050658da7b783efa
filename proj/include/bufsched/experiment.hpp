#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bufsched/agent.hpp"
#include "bufsched/baselines.hpp"
#include "bufsched/buffer_pool.hpp"
#include "bufsched/catalog.hpp"
#include "bufsched/metrics.hpp"
#include "bufsched/oracle.hpp"
#include "bufsched/schedule.hpp"
#include "bufsched/util.hpp"
#include "bufsched/workload.hpp"

namespace bufsched {

/// Simulated latency proxy: a hit and a miss have fixed costs, so "faster"
/// reduces to "fewer misses" and is testable without a live database.
struct CostModel {
  double hit_cost = 1.0;
  double miss_cost = 100.0;

  double cost(const ExecutionStats& s) const {
    return static_cast<double>(s.hits) * hit_cost +
           static_cast<double>(s.misses) * miss_cost;
  }
};

enum class EvalSet { train, test };

struct ExperimentConfig {
  WorkloadSpec workload;
  std::size_t buffer_blocks = 256;
  std::size_t width = 32;
  ReadMode read_mode = ReadMode::deterministic;
  CostModel cost;
  std::vector<std::string> schedulers{"fcfs", "greedy", "agent"};
  int train_epochs = 3;
  std::uint64_t checkpoint_every = 0;  // 0: evaluate untrained and final only
  EvalSet eval_set = EvalSet::train;
  AgentConfig agent;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
};

struct SchedulerRun {
  std::string name;
  ScheduleResult result;
  std::vector<MetricsRow> rows;
  double avg_hit_ratio = 0.0;
  double total_cost = 0.0;
};

struct ExperimentResult {
  Workload workload;
  std::vector<QueuedQuery> train_queue;
  std::vector<QueuedQuery> eval_queue;
  std::vector<SchedulerRun> runs;
  std::vector<SummaryRow> summary;
  std::optional<DqnAgent> agent;
};

inline std::vector<QueuedQuery> materialize_queue(
    std::span<const QuerySpec> specs, const Catalog& catalog, ReadMode mode,
    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<QueuedQuery> queue;
  queue.reserve(specs.size());
  for (const QuerySpec& spec : specs) {
    queue.push_back({spec, materialize_reads(spec, catalog, mode, rng)});
  }
  return queue;
}

inline std::vector<MetricsRow> metrics_rows(const std::string& scheduler,
                                            const ScheduleResult& result,
                                            std::span<const QueuedQuery> queue,
                                            const CostModel& cost) {
  std::vector<MetricsRow> rows;
  rows.reserve(result.order.size());
  double cum_cost = 0.0;
  for (std::size_t i = 0; i < result.order.size(); ++i) {
    cum_cost += cost.cost(result.stats[i]);
    MetricsRow r;
    r.scheduler = scheduler;
    r.step = i + 1;
    r.query_id = queue[result.order[i]].spec.query_id;
    r.hits = result.stats[i].hits;
    r.misses = result.stats[i].misses;
    r.hit_ratio = result.rewards[i];
    r.cum_cost = cum_cost;
    rows.push_back(std::move(r));
  }
  return rows;
}

inline void validate_experiment_config(const ExperimentConfig& cfg) {
  if (cfg.schedulers.empty()) {
    throw std::invalid_argument("at least one scheduler is required");
  }
  for (const std::string& s : cfg.schedulers) {
    if (s != "fcfs" && s != "greedy" && s != "agent") {
      throw std::invalid_argument("unknown scheduler '" + s + "'");
    }
  }
  if (cfg.train_epochs < 1) {
    throw std::invalid_argument("train_epochs must be >= 1");
  }
  if (cfg.buffer_blocks == 0) {
    throw std::invalid_argument("buffer_blocks must be >= 1");
  }
  if (cfg.width == 0) {
    throw std::invalid_argument("encoding width must be >= 1");
  }
}

/// Runs every configured scheduler on one shared workload: identical query
/// specs and identical materialized read sets, each on a freshly reset pool.
/// The agent trains on the training queue and is evaluated greedily
/// (exploration off) on the evaluation queue at every checkpoint; checkpoint
/// 0 is the untrained network.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  validate_experiment_config(cfg);

  ExperimentResult out;
  WorkloadSpec wl_spec = cfg.workload;
  wl_spec.seed = derive_seed(cfg.seed, 0x10);
  out.workload = generate_workload(wl_spec);
  const Catalog& catalog = out.workload.catalog;

  out.train_queue = materialize_queue(out.workload.queries, catalog,
                                      cfg.read_mode, derive_seed(cfg.seed, 0x20));
  if (cfg.eval_set == EvalSet::train) {
    out.eval_queue = out.train_queue;
  } else {
    if (out.workload.test_queries.empty()) {
      throw std::invalid_argument(
          "config evaluates on the test split but the workload has no test "
          "queries");
    }
    out.eval_queue = materialize_queue(out.workload.test_queries, catalog,
                                       cfg.read_mode,
                                       derive_seed(cfg.seed, 0x21));
  }

  const auto finish_run = [&](const std::string& name, ScheduleResult result) {
    SchedulerRun run;
    run.name = name;
    run.rows = metrics_rows(name, result, out.eval_queue, cfg.cost);
    run.avg_hit_ratio = result.average_hit_ratio();
    run.total_cost = run.rows.empty() ? 0.0 : run.rows.back().cum_cost;
    run.result = std::move(result);
    out.runs.push_back(std::move(run));
  };

  std::vector<std::uint64_t> checkpoints;  // agent checkpoints actually run
  std::map<std::uint64_t, std::pair<double, double>> checkpoint_values;

  for (const std::string& name : cfg.schedulers) {
    if (name == "fcfs") {
      BufferPool pool(catalog, cfg.buffer_blocks);
      finish_run(name, run_fcfs(pool, out.eval_queue));
    } else if (name == "greedy") {
      BufferPool pool(catalog, cfg.buffer_blocks);
      finish_run(name, run_greedy(pool, catalog, out.eval_queue));
    } else {
      AgentConfig agent_cfg = cfg.agent;
      agent_cfg.seed = derive_seed(cfg.seed, 0x30);
      const std::uint64_t total_decisions =
          static_cast<std::uint64_t>(cfg.train_epochs) * out.train_queue.size();
      if (agent_cfg.epsilon_decay_steps == 0) {
        agent_cfg.epsilon_decay_steps = std::max<std::uint64_t>(1, total_decisions / 2);
      }
      DqnAgent agent(catalog, cfg.width, agent_cfg);

      ScheduleResult last_eval;
      const auto evaluate_at = [&](std::uint64_t checkpoint) {
        BufferPool pool(catalog, cfg.buffer_blocks);
        ScheduleResult r = run_q_policy(pool, out.eval_queue, catalog,
                                        cfg.width, agent.network());
        double total_cost = 0.0;
        for (const ExecutionStats& s : r.stats) total_cost += cfg.cost.cost(s);
        checkpoints.push_back(checkpoint);
        checkpoint_values[checkpoint] = {r.average_hit_ratio(), total_cost};
        last_eval = std::move(r);
      };

      evaluate_at(0);
      const std::uint64_t every =
          cfg.checkpoint_every == 0 ? total_decisions : cfg.checkpoint_every;
      for (int epoch = 0; epoch < cfg.train_epochs; ++epoch) {
        BufferPool pool(catalog, cfg.buffer_blocks);
        agent.schedule(pool, out.train_queue, ScheduleMode::train,
                       [&](std::uint64_t decision) {
                         if (decision % every == 0 && decision != total_decisions) {
                           evaluate_at(decision);
                         }
                       });
      }
      evaluate_at(total_decisions);

      finish_run(name, std::move(last_eval));
      out.agent.emplace(std::move(agent));
    }
  }

  // summary: one row per scheduler per agent checkpoint; baselines are flat
  const std::vector<std::uint64_t> points =
      checkpoints.empty() ? std::vector<std::uint64_t>{0} : checkpoints;
  for (const std::string& name : cfg.schedulers) {
    if (name == "agent") {
      for (std::uint64_t c : checkpoints) {
        const auto& [ratio, total_cost] = checkpoint_values[c];
        out.summary.push_back({name, c, ratio, total_cost});
      }
      continue;
    }
    for (const SchedulerRun& run : out.runs) {
      if (run.name != name) continue;
      for (std::uint64_t c : points) {
        out.summary.push_back({name, c, run.avg_hit_ratio, run.total_cost});
      }
    }
  }
  return out;
}

/// Writes <scheduler>_metrics.csv per scheduler plus summary.csv.
inline void write_experiment_csvs(const ExperimentConfig& cfg,
                                  const ExperimentResult& result) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  for (const SchedulerRun& run : result.runs) {
    write_metrics_csv((fs::path(cfg.out_dir) / (run.name + "_metrics.csv")).string(),
                      run.rows);
  }
  write_summary_csv((fs::path(cfg.out_dir) / "summary.csv").string(),
                    result.summary);
}

}  // namespace bufsched
