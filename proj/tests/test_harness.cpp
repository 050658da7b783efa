#include <catch2/catch.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include "bufsched/experiment.hpp"
#include "bufsched/io.hpp"
#include "bufsched/metrics.hpp"
#include "bufsched/oracle.hpp"

using namespace bufsched;

namespace {

Catalog motivating_catalog() {
  std::vector<RelationMeta> rels;
  for (int i = 1; i <= 5; ++i) {
    rels.push_back({i, "b" + std::to_string(i), RelationKind::base, 1});
  }
  return Catalog(rels);
}

std::vector<QuerySpec> motivating_specs() {
  const auto full = [](int query_id, std::initializer_list<int> rels) {
    QuerySpec spec;
    spec.query_id = query_id;
    for (int r : rels) spec.profile[r] = {AccessMode::full_scan, 0.0};
    return spec;
  };
  return {full(1, {1, 2}), full(2, {4, 5}), full(3, {2, 3})};
}

ExperimentConfig tiny_experiment(std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.workload.relation_count = 6;
  cfg.workload.block_min = 16;
  cfg.workload.block_max = 48;
  cfg.workload.template_count = 8;
  cfg.workload.query_count = 16;
  cfg.workload.test_query_count = 6;
  cfg.buffer_blocks = 32;
  cfg.width = 8;
  cfg.train_epochs = 1;
  cfg.agent.batch_size = 4;
  cfg.agent.min_replay_before_training = 8;
  cfg.agent.replay_capacity = 64;
  cfg.seed = seed;
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("oracle finds the 5-miss order on the motivating workload") {
  const Catalog c = motivating_catalog();
  const auto specs = motivating_specs();
  const OracleResult r = brute_force_oracle(c, 2, specs);
  REQUIRE(r.total_misses == 5);
  // [0,2,1] and [1,0,2] both reach 5; the lexicographically smaller one wins
  REQUIRE(r.order == std::vector<std::size_t>{0, 2, 1});
}

TEST_CASE("oracle handles single queries and refuses huge queues") {
  const Catalog c = motivating_catalog();
  const auto specs = motivating_specs();
  const std::vector<QuerySpec> one(specs.begin(), specs.begin() + 1);
  const OracleResult r = brute_force_oracle(c, 2, one);
  REQUIRE(r.order == std::vector<std::size_t>{0});
  REQUIRE(r.total_misses == 2);  // cold-cache reads

  const std::vector<QuerySpec> ten(10, motivating_specs()[0]);
  REQUIRE_THROWS_AS(brute_force_oracle(c, 2, ten), std::invalid_argument);
  REQUIRE_THROWS_AS(brute_force_oracle(c, 2, std::vector<QuerySpec>{}),
                    std::invalid_argument);
}

TEST_CASE("oracle never loses to fcfs or greedy on shared reads") {
  std::mt19937_64 seeds(77);
  for (int trial = 0; trial < 8; ++trial) {
    WorkloadSpec spec;
    spec.relation_count = 5;
    spec.block_min = 8;
    spec.block_max = 24;
    spec.index_ratio = 0.2;
    spec.template_count = 5;
    spec.fanout_max = 2;
    spec.query_count = 5;
    spec.test_query_count = 0;
    spec.test_template_fraction = 0.0;
    spec.seed = seeds();
    const Workload wl = generate_workload(spec);

    std::vector<QueuedQuery> queue;
    for (const QuerySpec& q : wl.queries) {
      queue.push_back({q, expected_reads(q, wl.catalog)});
    }
    const OracleResult oracle = brute_force_oracle(wl.catalog, 16, queue);
    BufferPool fcfs_pool(wl.catalog, 16);
    BufferPool greedy_pool(wl.catalog, 16);
    REQUIRE(oracle.total_misses <= run_fcfs(fcfs_pool, queue).total_misses());
    REQUIRE(oracle.total_misses <=
            run_greedy(greedy_pool, wl.catalog, queue).total_misses());
  }
}

TEST_CASE("fcfs and the repaired order on the motivating hit ratios") {
  const Catalog c = motivating_catalog();
  const auto specs = motivating_specs();
  std::vector<QueuedQuery> queue;
  for (const QuerySpec& q : specs) {
    queue.push_back({q, expected_reads(q, c)});
  }

  BufferPool fcfs_pool(c, 2);
  const ScheduleResult fcfs = run_fcfs(fcfs_pool, queue);
  REQUIRE(fcfs.average_hit_ratio() == 0.0);  // all six reads go to disk

  // replay the oracle order: per-query ratios 0, 1/2, 0 average to 1/6
  BufferPool pool(c, 2);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t idx : {0, 2, 1}) {
    sum += hit_ratio(pool.execute(queue[idx].reads));
    ++n;
  }
  REQUIRE(sum / n == Approx(1.0 / 6.0));
  REQUIRE(sum / n > fcfs.average_hit_ratio());
}

TEST_CASE("metrics CSV: header, rows, and parse round-trip") {
  std::ostringstream empty;
  write_metrics_csv(empty, std::vector<MetricsRow>{});
  REQUIRE(empty.str() == std::string(kMetricsHeader) + "\n");

  std::vector<MetricsRow> rows;
  rows.push_back({"fcfs", 1, 42, 3, 1, 0.75, 103.0});
  rows.push_back({"fcfs", 2, 7, 0, 4, 0.0, 503.0});
  std::ostringstream os;
  write_metrics_csv(os, rows);

  std::istringstream is(os.str());
  const auto parsed = read_metrics_csv(is);
  REQUIRE(parsed.size() == 2);
  REQUIRE(parsed[0].scheduler == "fcfs");
  REQUIRE(parsed[0].query_id == 42);
  REQUIRE(parsed[0].hits == 3);
  REQUIRE(parsed[1].misses == 4);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    REQUIRE(parsed[i].hit_ratio == Approx(rows[i].hit_ratio).margin(1e-6));
    REQUIRE(parsed[i].cum_cost == Approx(rows[i].cum_cost).margin(1e-6));
  }

  std::istringstream bad("not,a,header\n");
  REQUIRE_THROWS_AS(read_metrics_csv(bad), std::runtime_error);
}

TEST_CASE("summary CSV round-trips") {
  std::vector<SummaryRow> rows;
  rows.push_back({"agent", 0, 0.125, 1000.0});
  rows.push_back({"agent", 40, 0.5, 800.0});
  std::ostringstream os;
  write_summary_csv(os, rows);
  std::istringstream is(os.str());
  const auto parsed = read_summary_csv(is);
  REQUIRE(parsed.size() == 2);
  REQUIRE(parsed[1].checkpoint == 40);
  REQUIRE(parsed[1].avg_hit_ratio == Approx(0.5).margin(1e-6));
}

TEST_CASE("cost model falls as hits rise for a fixed request count") {
  const CostModel cost;
  double prev = cost.cost({0, 10});
  for (std::int64_t hits = 1; hits <= 10; ++hits) {
    const double c = cost.cost({hits, 10 - hits});
    REQUIRE(c < prev);
    prev = c;
  }
}

TEST_CASE("run_experiment: fair comparison, summary shape, determinism") {
  const ExperimentConfig cfg = tiny_experiment(11);
  const ExperimentResult a = run_experiment(cfg);

  REQUIRE(a.runs.size() == 3);
  for (const SchedulerRun& run : a.runs) {
    REQUIRE(run.rows.size() == cfg.workload.query_count);
    // cumulative cost never decreases
    for (std::size_t i = 1; i < run.rows.size(); ++i) {
      REQUIRE(run.rows[i].cum_cost >= run.rows[i - 1].cum_cost);
    }
  }
  // fcfs executes in queue order
  for (std::size_t i = 0; i < a.runs[0].rows.size(); ++i) {
    REQUIRE(a.runs[0].rows[i].query_id == static_cast<int>(i));
  }
  // every scheduler consumed identical read sets: request totals match
  std::vector<std::int64_t> totals;
  for (const SchedulerRun& run : a.runs) {
    std::int64_t t = 0;
    for (const MetricsRow& r : run.rows) t += r.hits + r.misses;
    totals.push_back(t);
  }
  REQUIRE(totals[0] == totals[1]);
  REQUIRE(totals[0] == totals[2]);

  // summary: untrained + final checkpoints for all three schedulers
  REQUIRE(a.summary.size() == 6);
  REQUIRE(a.agent.has_value());

  // byte-identical CSVs for identical config and seed
  namespace fs = std::filesystem;
  ExperimentConfig cfg1 = cfg, cfg2 = cfg;
  cfg1.out_dir = (fs::temp_directory_path() / "bufsched_det_a").string();
  cfg2.out_dir = (fs::temp_directory_path() / "bufsched_det_b").string();
  write_experiment_csvs(cfg1, a);
  write_experiment_csvs(cfg2, run_experiment(cfg));
  for (const char* name :
       {"fcfs_metrics.csv", "greedy_metrics.csv", "agent_metrics.csv",
        "summary.csv"}) {
    REQUIRE(slurp((fs::path(cfg1.out_dir) / name).string()) ==
            slurp((fs::path(cfg2.out_dir) / name).string()));
  }
  fs::remove_all(cfg1.out_dir);
  fs::remove_all(cfg2.out_dir);
}

TEST_CASE("run_experiment validates configuration") {
  ExperimentConfig cfg = tiny_experiment(1);
  cfg.schedulers = {};
  REQUIRE_THROWS_AS(run_experiment(cfg), std::invalid_argument);
  cfg = tiny_experiment(1);
  cfg.schedulers = {"sjf"};
  REQUIRE_THROWS_AS(run_experiment(cfg), std::invalid_argument);
  cfg = tiny_experiment(1);
  cfg.train_epochs = 0;
  REQUIRE_THROWS_AS(run_experiment(cfg), std::invalid_argument);
  cfg = tiny_experiment(1);
  cfg.eval_set = EvalSet::test;
  cfg.workload.test_query_count = 0;
  cfg.workload.test_template_fraction = 0.0;
  REQUIRE_THROWS_AS(run_experiment(cfg), std::invalid_argument);
}

TEST_CASE("catalog and plan documents round-trip through JSON") {
  const Workload wl = [] {
    WorkloadSpec spec;
    spec.relation_count = 6;
    spec.block_min = 8;
    spec.block_max = 32;
    spec.template_count = 6;
    spec.query_count = 12;
    spec.test_query_count = 0;
    spec.test_template_fraction = 0.0;
    spec.seed = 21;
    return generate_workload(spec);
  }();

  REQUIRE(catalog_from_json(catalog_to_json(wl.catalog)) == wl.catalog);

  std::vector<PlanDocument> docs;
  for (std::size_t i = 0; i < wl.plans.size(); ++i) {
    docs.push_back({wl.queries[i].query_id, wl.queries[i].template_id,
                    wl.plans[i]});
  }
  json arr = json::array();
  for (const auto& d : docs) arr.push_back(plan_document_to_json(d));
  std::vector<PlanDocument> loaded;
  for (const auto& j : arr) loaded.push_back(plan_document_from_json(j));
  const auto specs = specs_from_documents(loaded, wl.catalog);
  REQUIRE(specs == wl.queries);

  REQUIRE_THROWS_AS(plan_from_json(json{{"kind", "hash_join"}}),
                    std::invalid_argument);
}

TEST_CASE("experiment config parses with defaults and overrides") {
  const json j = json::parse(R"({
    "workload": {"relation_count": 9, "query_count": 50},
    "buffer_blocks": 128,
    "read_mode": "bernoulli",
    "schedulers": ["fcfs", "agent"],
    "agent": {"gamma": 0.8, "batch_size": 4},
    "seed": 99
  })");
  const ExperimentConfig cfg = config_from_json(j);
  REQUIRE(cfg.workload.relation_count == 9);
  REQUIRE(cfg.workload.query_count == 50);
  REQUIRE(cfg.workload.block_min == 64);  // default preserved
  REQUIRE(cfg.buffer_blocks == 128);
  REQUIRE(cfg.read_mode == ReadMode::bernoulli);
  REQUIRE(cfg.schedulers == std::vector<std::string>{"fcfs", "agent"});
  REQUIRE(cfg.agent.gamma == Approx(0.8));
  REQUIRE(cfg.agent.batch_size == 4);
  REQUIRE(cfg.agent.learning_rate == Approx(1e-3));  // default preserved
  REQUIRE(cfg.seed == 99);

  REQUIRE_THROWS_AS(config_from_json(json{{"read_mode", "psychic"}}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(config_from_json(json{{"eval_set", "holdout"}}),
                    std::invalid_argument);
}
