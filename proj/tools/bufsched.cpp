// Command-line front end: trains and compares schedulers on synthetic
// workloads, runs the exhaustive ordering oracle, and exports workloads as
// catalog/plan files.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bufsched/agent.hpp"
#include "bufsched/baselines.hpp"
#include "bufsched/experiment.hpp"
#include "bufsched/io.hpp"
#include "bufsched/oracle.hpp"

namespace {

namespace fs = std::filesystem;
using namespace bufsched;

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> schedulers;
  std::optional<std::uint64_t> checkpoint_every;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "experiment config file (JSON)");
  cmd->add_option("--seed", opts.seed, "master seed (overrides config)");
  cmd->add_option("--out", opts.out_dir, "output directory (overrides config)");
}

ExperimentConfig resolve_config(const CommonOpts& opts) {
  ExperimentConfig cfg;
  if (!opts.config_path.empty()) cfg = load_config(opts.config_path);
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.out_dir) cfg.out_dir = *opts.out_dir;
  if (opts.checkpoint_every) cfg.checkpoint_every = *opts.checkpoint_every;
  if (opts.schedulers) {
    cfg.schedulers.clear();
    std::stringstream ss(*opts.schedulers);
    std::string name;
    while (std::getline(ss, name, ',')) {
      if (!name.empty()) cfg.schedulers.push_back(name);
    }
  }
  return cfg;
}

void print_summary(const ExperimentResult& result) {
  std::cout << "scheduler      avg_hit_ratio   total_cost\n";
  for (const SchedulerRun& run : result.runs) {
    std::printf("%-12s %12.6f %12.1f\n", run.name.c_str(), run.avg_hit_ratio,
                run.total_cost);
  }
}

int cmd_compare(const CommonOpts& opts) {
  ExperimentConfig cfg = resolve_config(opts);
  ExperimentResult result = run_experiment(cfg);
  write_experiment_csvs(cfg, result);
  print_summary(result);
  std::cout << "metrics written to " << cfg.out_dir << "/\n";
  return 0;
}

int cmd_train(const CommonOpts& opts, const std::string& checkpoint_path) {
  ExperimentConfig cfg = resolve_config(opts);
  cfg.schedulers = {"agent"};
  ExperimentResult result = run_experiment(cfg);
  write_experiment_csvs(cfg, result);

  fs::create_directories(cfg.out_dir);
  const std::string path = checkpoint_path.empty()
                               ? (fs::path(cfg.out_dir) / "agent.ckpt").string()
                               : checkpoint_path;
  result.agent->save(path);
  print_summary(result);
  std::cout << "agent checkpoint written to " << path << "\n";
  return 0;
}

int cmd_evaluate(const CommonOpts& opts, const std::string& checkpoint_path,
                 const std::string& eval_set) {
  ExperimentConfig cfg = resolve_config(opts);
  if (eval_set == "test") {
    cfg.eval_set = EvalSet::test;
  } else if (eval_set == "train") {
    cfg.eval_set = EvalSet::train;
  } else {
    throw std::invalid_argument("--eval-set must be 'train' or 'test'");
  }

  DqnAgent agent = DqnAgent::load(checkpoint_path);

  WorkloadSpec wl_spec = cfg.workload;
  wl_spec.seed = derive_seed(cfg.seed, 0x10);
  const Workload wl = generate_workload(wl_spec);
  const auto& specs =
      cfg.eval_set == EvalSet::test ? wl.test_queries : wl.queries;
  if (specs.empty()) {
    throw std::invalid_argument("selected evaluation split is empty");
  }
  const std::uint64_t reads_seed =
      derive_seed(cfg.seed, cfg.eval_set == EvalSet::test ? 0x21 : 0x20);
  const std::vector<QueuedQuery> queue =
      materialize_queue(specs, wl.catalog, cfg.read_mode, reads_seed);

  BufferPool pool(wl.catalog, cfg.buffer_blocks);
  const ScheduleResult result =
      run_q_policy(pool, queue, wl.catalog, agent.width(), agent.network());

  fs::create_directories(cfg.out_dir);
  const std::vector<MetricsRow> rows =
      metrics_rows("agent", result, queue, cfg.cost);
  const std::string out =
      (fs::path(cfg.out_dir) / "agent_eval_metrics.csv").string();
  write_metrics_csv(out, rows);
  std::printf("avg_hit_ratio %.6f over %zu queries (%s split)\n",
              result.average_hit_ratio(), queue.size(), eval_set.c_str());
  std::cout << "metrics written to " << out << "\n";
  return 0;
}

int cmd_oracle(const CommonOpts& opts, std::size_t n_queries,
               const std::string& catalog_path, const std::string& plans_path) {
  ExperimentConfig cfg = resolve_config(opts);

  Catalog catalog({{0, "placeholder", RelationKind::base, 1}});
  std::vector<QuerySpec> specs;
  if (!catalog_path.empty()) {
    catalog = load_catalog(catalog_path);
    const auto docs = load_plan_documents(plans_path);
    specs = specs_from_documents(docs, catalog);
  } else {
    WorkloadSpec wl_spec = cfg.workload;
    wl_spec.seed = derive_seed(cfg.seed, 0x10);
    Workload wl = generate_workload(wl_spec);
    catalog = std::move(wl.catalog);
    specs = std::move(wl.queries);
  }
  if (n_queries > specs.size()) {
    throw std::invalid_argument("workload has only " +
                                std::to_string(specs.size()) + " queries");
  }
  specs.resize(n_queries);

  std::vector<QueuedQuery> queue;
  queue.reserve(specs.size());
  for (const QuerySpec& spec : specs) {
    queue.push_back({spec, expected_reads(spec, catalog)});
  }

  const OracleResult oracle =
      brute_force_oracle(catalog, cfg.buffer_blocks, queue);
  BufferPool fcfs_pool(catalog, cfg.buffer_blocks);
  const auto fcfs = run_fcfs(fcfs_pool, queue);
  BufferPool greedy_pool(catalog, cfg.buffer_blocks);
  const auto greedy = run_greedy(greedy_pool, catalog, queue);

  std::cout << "optimal order:";
  for (std::size_t idx : oracle.order) {
    std::cout << ' ' << queue[idx].spec.query_id;
  }
  std::cout << "\noptimal misses: " << oracle.total_misses
            << "\nfcfs misses:    " << fcfs.total_misses()
            << "\ngreedy misses:  " << greedy.total_misses() << "\n";
  return 0;
}

int cmd_gen_workload(const CommonOpts& opts) {
  ExperimentConfig cfg = resolve_config(opts);
  WorkloadSpec wl_spec = cfg.workload;
  wl_spec.seed = derive_seed(cfg.seed, 0x10);
  const Workload wl = generate_workload(wl_spec);

  fs::create_directories(cfg.out_dir);
  save_catalog((fs::path(cfg.out_dir) / "catalog.json").string(), wl.catalog);

  const auto export_plans = [](const std::string& path,
                               const std::vector<QuerySpec>& specs,
                               const std::vector<PlanNode>& plans) {
    std::vector<PlanDocument> docs;
    docs.reserve(plans.size());
    for (std::size_t i = 0; i < plans.size(); ++i) {
      docs.push_back({specs[i].query_id, specs[i].template_id, plans[i]});
    }
    save_plan_documents(path, docs);
  };
  export_plans((fs::path(cfg.out_dir) / "plans.json").string(), wl.queries,
               wl.plans);
  if (!wl.test_queries.empty()) {
    export_plans((fs::path(cfg.out_dir) / "plans_test.json").string(),
                 wl.test_queries, wl.test_plans);
  }
  std::cout << "catalog: " << wl.catalog.size() << " relations, "
            << wl.catalog.total_blocks() << " blocks total\n"
            << "queries: " << wl.queries.size() << " train, "
            << wl.test_queries.size() << " test\n"
            << "files written to " << cfg.out_dir << "/\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"buffer-pool aware query scheduling simulator"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string checkpoint_path;
  std::string eval_set = "train";
  std::size_t oracle_queries = 7;
  std::string catalog_path, plans_path;

  CLI::App* compare = app.add_subcommand(
      "compare", "train the agent and compare all schedulers on one workload");
  add_common(compare, opts);
  compare->add_option("--schedulers", opts.schedulers,
                      "comma-separated subset of fcfs,greedy,agent");
  compare->add_option("--checkpoint-every", opts.checkpoint_every,
                      "evaluate the agent every K training queries");

  CLI::App* train = app.add_subcommand("train", "train the agent and save a checkpoint");
  add_common(train, opts);
  train->add_option("--checkpoint-every", opts.checkpoint_every,
                    "evaluate the agent every K training queries");
  train->add_option("--checkpoint", checkpoint_path,
                    "checkpoint output path (default <out>/agent.ckpt)");

  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "evaluate a saved agent checkpoint with exploration off");
  add_common(evaluate, opts);
  evaluate->add_option("--checkpoint", checkpoint_path, "agent checkpoint file")
      ->required();
  evaluate->add_option("--eval-set", eval_set, "train or test split");

  CLI::App* oracle = app.add_subcommand(
      "oracle", "exhaustive best ordering of a small query prefix");
  add_common(oracle, opts);
  oracle->add_option("--queries", oracle_queries, "queue length (max 9)");
  oracle->add_option("--catalog", catalog_path, "catalog file (with --plans)");
  oracle->add_option("--plans", plans_path, "plan documents file");

  CLI::App* gen = app.add_subcommand(
      "gen-workload", "export a synthetic workload as catalog/plan files");
  add_common(gen, opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (compare->parsed()) return cmd_compare(opts);
    if (train->parsed()) return cmd_train(opts, checkpoint_path);
    if (evaluate->parsed()) return cmd_evaluate(opts, checkpoint_path, eval_set);
    if (oracle->parsed()) return cmd_oracle(opts, oracle_queries, catalog_path, plans_path);
    if (gen->parsed()) return cmd_gen_workload(opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
