#pragma once

#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bufsched/catalog.hpp"
#include "bufsched/experiment.hpp"
#include "bufsched/workload.hpp"

namespace bufsched {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// catalog files: [{"id", "name", "kind", "block_count"}, ...]

inline json catalog_to_json(const Catalog& catalog) {
  json arr = json::array();
  for (const RelationMeta& r : catalog.relations()) {
    arr.push_back({{"id", r.id},
                   {"name", r.name},
                   {"kind", r.kind == RelationKind::index ? "index" : "base"},
                   {"block_count", r.block_count}});
  }
  return arr;
}

inline Catalog catalog_from_json(const json& arr) {
  if (!arr.is_array()) throw std::invalid_argument("catalog file must be an array");
  std::vector<RelationMeta> relations;
  relations.reserve(arr.size());
  for (const json& j : arr) {
    RelationMeta r;
    r.id = j.at("id").get<int>();
    r.name = j.at("name").get<std::string>();
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "base") {
      r.kind = RelationKind::base;
    } else if (kind == "index") {
      r.kind = RelationKind::index;
    } else {
      throw std::invalid_argument("relation kind must be 'base' or 'index'");
    }
    r.block_count = j.at("block_count").get<std::int64_t>();
    relations.push_back(std::move(r));
  }
  return Catalog(std::move(relations));
}

// ---------------------------------------------------------------------------
// plan documents: {"query_id", "template_id", "root": <node>}
// node: {"kind": "seq_scan"|"index_scan"|"nested_loop", "relation", "index",
//        "selectivity", "loop_count", "children"} as applicable

inline json plan_to_json(const PlanNode& node) {
  json j;
  switch (node.kind) {
    case PlanNodeKind::seq_scan:
      j["kind"] = "seq_scan";
      j["relation"] = node.relation;
      break;
    case PlanNodeKind::index_scan:
      j["kind"] = "index_scan";
      j["relation"] = node.relation;
      if (node.index) j["index"] = *node.index;
      j["selectivity"] = node.selectivity;
      break;
    case PlanNodeKind::nested_loop:
      j["kind"] = "nested_loop";
      j["loop_count"] = node.loop_count;
      j["children"] = json::array();
      for (const PlanNode& c : node.children) {
        j["children"].push_back(plan_to_json(c));
      }
      break;
  }
  return j;
}

inline PlanNode plan_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "seq_scan") {
    return seq_scan(j.at("relation").get<int>());
  }
  if (kind == "index_scan") {
    std::optional<int> index;
    if (j.contains("index") && !j["index"].is_null()) {
      index = j["index"].get<int>();
    }
    return index_scan(j.at("relation").get<int>(), index,
                      j.at("selectivity").get<double>());
  }
  if (kind == "nested_loop") {
    const json& children = j.at("children");
    if (!children.is_array() || children.size() != 2) {
      throw std::invalid_argument("nested_loop requires exactly two children");
    }
    return nested_loop(plan_from_json(children[0]), plan_from_json(children[1]),
                       j.at("loop_count").get<std::int64_t>());
  }
  throw std::invalid_argument("unknown plan node kind '" + kind + "'");
}

struct PlanDocument {
  int query_id = 0;
  int template_id = 0;
  PlanNode root;
};

inline json plan_document_to_json(const PlanDocument& doc) {
  return {{"query_id", doc.query_id},
          {"template_id", doc.template_id},
          {"root", plan_to_json(doc.root)}};
}

inline PlanDocument plan_document_from_json(const json& j) {
  PlanDocument doc;
  doc.query_id = j.at("query_id").get<int>();
  doc.template_id = j.at("template_id").get<int>();
  doc.root = plan_from_json(j.at("root"));
  return doc;
}

// ---------------------------------------------------------------------------
// file helpers

inline json load_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  json j;
  is >> j;
  return j;
}

inline void save_json_file(const std::string& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << j.dump(2) << '\n';
  if (!os) throw std::runtime_error("failed writing " + path);
}

inline Catalog load_catalog(const std::string& path) {
  return catalog_from_json(load_json_file(path));
}

inline void save_catalog(const std::string& path, const Catalog& catalog) {
  save_json_file(path, catalog_to_json(catalog));
}

inline std::vector<PlanDocument> load_plan_documents(const std::string& path) {
  const json arr = load_json_file(path);
  if (!arr.is_array()) {
    throw std::invalid_argument("plan file must be an array of documents");
  }
  std::vector<PlanDocument> docs;
  docs.reserve(arr.size());
  for (const json& j : arr) docs.push_back(plan_document_from_json(j));
  return docs;
}

inline void save_plan_documents(const std::string& path,
                                std::span<const PlanDocument> docs) {
  json arr = json::array();
  for (const PlanDocument& d : docs) arr.push_back(plan_document_to_json(d));
  save_json_file(path, arr);
}

/// Parses every plan document against the catalog.
inline std::vector<QuerySpec> specs_from_documents(
    std::span<const PlanDocument> docs, const Catalog& catalog) {
  std::vector<QuerySpec> specs;
  specs.reserve(docs.size());
  for (const PlanDocument& d : docs) {
    specs.push_back(parse_plan(d.root, catalog, d.query_id, d.template_id));
  }
  return specs;
}

// ---------------------------------------------------------------------------
// experiment config files

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  if (j.contains("workload")) {
    const json& w = j["workload"];
    WorkloadSpec& s = cfg.workload;
    s.relation_count = w.value("relation_count", s.relation_count);
    s.block_min = w.value("block_min", s.block_min);
    s.block_max = w.value("block_max", s.block_max);
    s.index_ratio = w.value("index_ratio", s.index_ratio);
    s.template_count = w.value("template_count", s.template_count);
    s.fanout_min = w.value("fanout_min", s.fanout_min);
    s.fanout_max = w.value("fanout_max", s.fanout_max);
    s.selectivity_min = w.value("selectivity_min", s.selectivity_min);
    s.selectivity_max = w.value("selectivity_max", s.selectivity_max);
    s.full_scan_fraction = w.value("full_scan_fraction", s.full_scan_fraction);
    s.loop_fraction = w.value("loop_fraction", s.loop_fraction);
    s.loop_min = w.value("loop_min", s.loop_min);
    s.loop_max = w.value("loop_max", s.loop_max);
    s.query_count = w.value("query_count", s.query_count);
    s.test_query_count = w.value("test_query_count", s.test_query_count);
    s.test_template_fraction =
        w.value("test_template_fraction", s.test_template_fraction);
  }
  cfg.buffer_blocks = j.value("buffer_blocks", cfg.buffer_blocks);
  cfg.width = j.value("width", cfg.width);
  if (j.contains("read_mode")) {
    const std::string mode = j["read_mode"].get<std::string>();
    if (mode == "deterministic") {
      cfg.read_mode = ReadMode::deterministic;
    } else if (mode == "bernoulli") {
      cfg.read_mode = ReadMode::bernoulli;
    } else {
      throw std::invalid_argument("read_mode must be 'deterministic' or 'bernoulli'");
    }
  }
  cfg.cost.hit_cost = j.value("hit_cost", cfg.cost.hit_cost);
  cfg.cost.miss_cost = j.value("miss_cost", cfg.cost.miss_cost);
  if (j.contains("schedulers")) {
    cfg.schedulers = j["schedulers"].get<std::vector<std::string>>();
  }
  cfg.train_epochs = j.value("train_epochs", cfg.train_epochs);
  cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
  if (j.contains("eval_set")) {
    const std::string set = j["eval_set"].get<std::string>();
    if (set == "train") {
      cfg.eval_set = EvalSet::train;
    } else if (set == "test") {
      cfg.eval_set = EvalSet::test;
    } else {
      throw std::invalid_argument("eval_set must be 'train' or 'test'");
    }
  }
  if (j.contains("agent")) {
    const json& a = j["agent"];
    AgentConfig& c = cfg.agent;
    c.gamma = a.value("gamma", c.gamma);
    c.epsilon_start = a.value("epsilon_start", c.epsilon_start);
    c.epsilon_end = a.value("epsilon_end", c.epsilon_end);
    c.epsilon_decay_steps = a.value("epsilon_decay_steps", c.epsilon_decay_steps);
    c.replay_capacity = a.value("replay_capacity", c.replay_capacity);
    c.batch_size = a.value("batch_size", c.batch_size);
    c.min_replay_before_training =
        a.value("min_replay_before_training", c.min_replay_before_training);
    c.target_sync_period = a.value("target_sync_period", c.target_sync_period);
    c.learning_rate = a.value("learning_rate", c.learning_rate);
    c.use_replay = a.value("use_replay", c.use_replay);
    c.use_target_network = a.value("use_target_network", c.use_target_network);
  }
  cfg.seed = j.value("seed", cfg.seed);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  return config_from_json(load_json_file(path));
}

}  // namespace bufsched
