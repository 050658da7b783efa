#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bufsched {

enum class RelationKind { base, index };

struct RelationMeta {
  int id = 0;
  std::string name;
  RelationKind kind = RelationKind::base;
  std::int64_t block_count = 0;

  friend bool operator==(const RelationMeta&, const RelationMeta&) = default;
};

/// The relation universe. Relation order is canonical: it defines the row
/// order of every matrix produced anywhere in the system.
class Catalog {
 public:
  Catalog() = default;

  explicit Catalog(std::vector<RelationMeta> relations)
      : relations_(std::move(relations)) {
    if (relations_.empty()) {
      throw std::invalid_argument("catalog must contain at least one relation");
    }
    for (std::size_t i = 0; i < relations_.size(); ++i) {
      const RelationMeta& r = relations_[i];
      if (r.block_count < 1) {
        throw std::invalid_argument("relation '" + r.name +
                                    "' must have block_count >= 1");
      }
      if (!rows_.emplace(r.id, i).second) {
        throw std::invalid_argument("duplicate relation id " +
                                    std::to_string(r.id));
      }
    }
  }

  const std::vector<RelationMeta>& relations() const { return relations_; }
  std::size_t size() const { return relations_.size(); }

  bool contains(int relation_id) const { return rows_.count(relation_id) > 0; }

  std::size_t row_of(int relation_id) const {
    auto it = rows_.find(relation_id);
    if (it == rows_.end()) {
      throw std::out_of_range("unknown relation id " +
                              std::to_string(relation_id));
    }
    return it->second;
  }

  const RelationMeta& relation(int relation_id) const {
    return relations_[row_of(relation_id)];
  }

  std::int64_t total_blocks() const {
    std::int64_t n = 0;
    for (const auto& r : relations_) n += r.block_count;
    return n;
  }

  friend bool operator==(const Catalog& a, const Catalog& b) {
    return a.relations_ == b.relations_;
  }

 private:
  std::vector<RelationMeta> relations_;
  std::map<int, std::size_t> rows_;
};

enum class AccessMode { none, full_scan, selective };

/// Per-relation block-access profile of one query: nothing, every block, or
/// each block independently with the given probability.
struct AccessDescriptor {
  AccessMode mode = AccessMode::none;
  double selectivity = 0.0;  // meaningful only for mode == selective

  double probability() const {
    switch (mode) {
      case AccessMode::none: return 0.0;
      case AccessMode::full_scan: return 1.0;
      case AccessMode::selective: return selectivity;
    }
    return 0.0;
  }

  friend bool operator==(const AccessDescriptor&,
                         const AccessDescriptor&) = default;
};

struct QuerySpec {
  int query_id = 0;
  int template_id = 0;
  std::map<int, AccessDescriptor> profile;  // relation id -> descriptor

  friend bool operator==(const QuerySpec&, const QuerySpec&) = default;
};

enum class PlanNodeKind { seq_scan, index_scan, nested_loop };

/// Neutral plan-tree format. seq_scan and index_scan are leaves; nested_loop
/// has exactly two children: [outer, inner]. The inner subtree is driven
/// loop_count times.
struct PlanNode {
  PlanNodeKind kind = PlanNodeKind::seq_scan;
  int relation = -1;              // seq_scan, index_scan: base relation
  std::optional<int> index;       // index_scan: index file, when one is used
  double selectivity = 1.0;       // index_scan
  std::int64_t loop_count = 1;    // nested_loop
  std::vector<PlanNode> children;
};

inline PlanNode seq_scan(int relation) {
  PlanNode n;
  n.kind = PlanNodeKind::seq_scan;
  n.relation = relation;
  return n;
}

inline PlanNode index_scan(int relation, std::optional<int> index,
                           double selectivity) {
  PlanNode n;
  n.kind = PlanNodeKind::index_scan;
  n.relation = relation;
  n.index = index;
  n.selectivity = selectivity;
  return n;
}

inline PlanNode nested_loop(PlanNode outer, PlanNode inner,
                            std::int64_t loop_count) {
  PlanNode n;
  n.kind = PlanNodeKind::nested_loop;
  n.loop_count = loop_count;
  n.children.push_back(std::move(outer));
  n.children.push_back(std::move(inner));
  return n;
}

namespace detail {

inline void collect_accesses(const PlanNode& node, const Catalog& catalog,
                             double loop_multiplier,
                             std::vector<std::pair<int, double>>& out) {
  switch (node.kind) {
    case PlanNodeKind::seq_scan: {
      catalog.row_of(node.relation);  // existence check
      out.emplace_back(node.relation, 1.0);
      return;
    }
    case PlanNodeKind::index_scan: {
      catalog.row_of(node.relation);
      if (node.selectivity < 0.0 || node.selectivity > 1.0) {
        throw std::invalid_argument("index_scan selectivity must be in [0,1]");
      }
      const double p = std::min(1.0, node.selectivity * loop_multiplier);
      out.emplace_back(node.relation, p);
      if (node.index) {
        catalog.row_of(*node.index);
        out.emplace_back(*node.index, p);
      }
      return;
    }
    case PlanNodeKind::nested_loop: {
      if (node.children.size() != 2) {
        throw std::invalid_argument("nested_loop must have exactly two children");
      }
      if (node.loop_count < 1) {
        throw std::invalid_argument("nested_loop loop_count must be >= 1");
      }
      collect_accesses(node.children[0], catalog, loop_multiplier, out);
      collect_accesses(node.children[1], catalog,
                       loop_multiplier * static_cast<double>(node.loop_count),
                       out);
      return;
    }
  }
  throw std::invalid_argument("unknown plan node kind");
}

}  // namespace detail

/// Walks a plan tree and produces the per-relation access profile. Scans on
/// the inner side of a nested loop have their selectivity scaled by the loop
/// count (capped at 1). Repeated reads of one relation combine by probability
/// union: 1 - prod(1 - p_k).
inline QuerySpec parse_plan(const PlanNode& plan, const Catalog& catalog,
                            int query_id = 0, int template_id = 0) {
  std::vector<std::pair<int, double>> accesses;
  detail::collect_accesses(plan, catalog, 1.0, accesses);

  std::map<int, double> miss_prob;  // relation -> prod(1 - p_k)
  for (const auto& [rel, p] : accesses) {
    auto [it, inserted] = miss_prob.emplace(rel, 1.0);
    it->second *= (1.0 - p);
  }

  QuerySpec spec;
  spec.query_id = query_id;
  spec.template_id = template_id;
  for (const auto& [rel, miss] : miss_prob) {
    const double p = 1.0 - miss;
    if (p <= 0.0) continue;
    AccessDescriptor d;
    if (p >= 1.0) {
      d.mode = AccessMode::full_scan;
    } else {
      d.mode = AccessMode::selective;
      d.selectivity = p;
    }
    spec.profile.emplace(rel, d);
  }
  return spec;
}

/// Full-resolution matrix: one row per catalog relation (canonical order),
/// row i has relation i's block count entries. Used both for per-block access
/// probabilities and for 0/1 pool occupancy.
using BlockMatrix = std::vector<std::vector<double>>;

inline BlockMatrix zero_block_matrix(const Catalog& catalog) {
  BlockMatrix m;
  m.reserve(catalog.size());
  for (const auto& r : catalog.relations()) {
    m.emplace_back(static_cast<std::size_t>(r.block_count), 0.0);
  }
  return m;
}

/// Expands a query profile to per-block access probabilities. Rows for
/// relations the query does not touch are all zero.
inline BlockMatrix access_matrix(const QuerySpec& spec, const Catalog& catalog) {
  BlockMatrix m = zero_block_matrix(catalog);
  for (const auto& [rel, desc] : spec.profile) {
    const std::size_t row = catalog.row_of(rel);
    const double p = desc.probability();
    if (p < 0.0 || p > 1.0) {
      throw std::invalid_argument("access probability must be in [0,1]");
    }
    std::fill(m[row].begin(), m[row].end(), p);
  }
  return m;
}

}  // namespace bufsched
