#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "bufsched/buffer_pool.hpp"
#include "bufsched/catalog.hpp"
#include "bufsched/util.hpp"

namespace bufsched {

/// Knobs for the synthetic catalog/template/query generator. Templates draw
/// overlapping relation sets so that queued queries share data, which is the
/// structure the schedulers exploit.
struct WorkloadSpec {
  std::size_t relation_count = 12;  // bases + indexes
  std::int64_t block_min = 64;
  std::int64_t block_max = 512;
  double index_ratio = 1.0 / 3.0;  // fraction of relations that are indexes

  std::size_t template_count = 40;
  std::size_t fanout_min = 1;  // base relations per template
  std::size_t fanout_max = 3;
  // selective reads mostly fit the default 256-block buffer, so reordering
  // has something to reuse even on the largest relations
  double selectivity_min = 0.05;
  double selectivity_max = 0.45;
  double full_scan_fraction = 0.2;  // chance a template entry is a full scan
  double loop_fraction = 0.15;      // chance an indexed entry feeds a loop
  std::int64_t loop_min = 2;
  std::int64_t loop_max = 3;

  std::size_t query_count = 400;      // instances of training templates
  std::size_t test_query_count = 50;  // instances of held-out templates
  double test_template_fraction = 0.2;

  std::uint64_t seed = 1;
};

/// A query skeleton: which relations it scans and how, with selectivity
/// ranges instead of points.
struct TemplateEntry {
  int relation = -1;        // base relation
  std::optional<int> index; // index file driving a selective scan
  bool full_scan = false;
  double sel_min = 0.0;
  double sel_max = 0.0;
  std::int64_t loop_count = 1;  // > 1: the scan sits inside a nested loop
};

struct Template {
  int template_id = 0;
  std::vector<TemplateEntry> entries;
};

struct Workload {
  Catalog catalog;
  std::vector<Template> templates;
  std::vector<int> train_template_ids;
  std::vector<int> test_template_ids;
  std::vector<QuerySpec> queries;  // from training templates
  std::vector<PlanNode> plans;     // plan tree per training query
  std::vector<QuerySpec> test_queries;  // from held-out templates
  std::vector<PlanNode> test_plans;
};

inline void validate_workload_spec(const WorkloadSpec& s) {
  if (s.relation_count == 0) {
    throw std::invalid_argument("relation_count must be >= 1");
  }
  if (s.block_min < 1 || s.block_max < s.block_min) {
    throw std::invalid_argument("block count range is empty");
  }
  if (s.index_ratio < 0.0 || s.index_ratio > 1.0) {
    throw std::invalid_argument("index_ratio must be in [0,1]");
  }
  if (s.template_count == 0) {
    throw std::invalid_argument("template_count must be >= 1");
  }
  if (s.fanout_min < 1 || s.fanout_max < s.fanout_min) {
    throw std::invalid_argument("fan-out range is empty");
  }
  if (s.selectivity_min < 0.0 || s.selectivity_max > 1.0 ||
      s.selectivity_max < s.selectivity_min) {
    throw std::invalid_argument("selectivity range must be within [0,1]");
  }
  for (double f : {s.full_scan_fraction, s.loop_fraction,
                   s.test_template_fraction}) {
    if (f < 0.0 || f > 1.0) {
      throw std::invalid_argument("fractions must be in [0,1]");
    }
  }
  if (s.loop_min < 1 || s.loop_max < s.loop_min) {
    throw std::invalid_argument("loop count range is empty");
  }
  const std::size_t n_index = static_cast<std::size_t>(
      std::llround(s.index_ratio * static_cast<double>(s.relation_count)));
  const std::size_t n_base = s.relation_count - n_index;
  if (n_base == 0) {
    throw std::invalid_argument("workload needs at least one base relation");
  }
  if (s.fanout_max > n_base) {
    throw std::invalid_argument(
        "template fan-out exceeds the number of base relations");
  }
}

namespace detail {

inline PlanNode instantiate_template(const Template& tpl,
                                     std::mt19937_64& rng) {
  std::vector<PlanNode> scans;
  scans.reserve(tpl.entries.size());
  std::vector<std::int64_t> loops;
  for (const TemplateEntry& e : tpl.entries) {
    if (e.full_scan) {
      scans.push_back(seq_scan(e.relation));
    } else {
      std::uniform_real_distribution<double> sel(e.sel_min, e.sel_max);
      scans.push_back(index_scan(e.relation, e.index, sel(rng)));
    }
    loops.push_back(e.loop_count);
  }
  PlanNode root = std::move(scans[0]);
  for (std::size_t k = 1; k < scans.size(); ++k) {
    root = nested_loop(std::move(root), std::move(scans[k]), loops[k]);
  }
  return root;
}

}  // namespace detail

/// Deterministic for a fixed seed: catalog, templates, the train/test
/// template split, and query instances drawn from each side of the split.
inline Workload generate_workload(const WorkloadSpec& spec) {
  validate_workload_spec(spec);
  Workload wl;

  std::mt19937_64 catalog_rng(derive_seed(spec.seed, 0x01));
  std::mt19937_64 template_rng(derive_seed(spec.seed, 0x02));
  std::mt19937_64 query_rng(derive_seed(spec.seed, 0x03));

  // catalog: bases first, then indexes round-robin over the bases
  const std::size_t n_index = static_cast<std::size_t>(std::llround(
      spec.index_ratio * static_cast<double>(spec.relation_count)));
  const std::size_t n_base = spec.relation_count - n_index;
  std::vector<RelationMeta> relations;
  relations.reserve(spec.relation_count);
  std::uniform_int_distribution<std::int64_t> blocks(spec.block_min,
                                                     spec.block_max);
  for (std::size_t k = 0; k < n_base; ++k) {
    relations.push_back({static_cast<int>(k), "t" + std::to_string(k),
                         RelationKind::base, blocks(catalog_rng)});
  }
  std::vector<std::vector<int>> indexes_of(n_base);
  const std::int64_t idx_min = std::max<std::int64_t>(1, spec.block_min / 4);
  const std::int64_t idx_max = std::max<std::int64_t>(idx_min, spec.block_max / 4);
  std::uniform_int_distribution<std::int64_t> idx_blocks(idx_min, idx_max);
  for (std::size_t k = 0; k < n_index; ++k) {
    const std::size_t base = k % n_base;
    const int id = static_cast<int>(n_base + k);
    relations.push_back({id, "ix" + std::to_string(base) + "_" + std::to_string(k),
                         RelationKind::index, idx_blocks(catalog_rng)});
    indexes_of[base].push_back(id);
  }
  wl.catalog = Catalog(std::move(relations));

  // templates
  std::uniform_int_distribution<std::size_t> fanout(spec.fanout_min,
                                                    spec.fanout_max);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> sel(spec.selectivity_min,
                                             spec.selectivity_max);
  std::uniform_int_distribution<std::int64_t> loop(spec.loop_min, spec.loop_max);
  std::vector<std::size_t> base_ids(n_base);
  std::iota(base_ids.begin(), base_ids.end(), 0);
  for (std::size_t tid = 0; tid < spec.template_count; ++tid) {
    Template tpl;
    tpl.template_id = static_cast<int>(tid);
    std::shuffle(base_ids.begin(), base_ids.end(), template_rng);
    const std::size_t n_entries = fanout(template_rng);
    for (std::size_t e = 0; e < n_entries; ++e) {
      TemplateEntry entry;
      entry.relation = static_cast<int>(base_ids[e]);
      if (unit(template_rng) < spec.full_scan_fraction) {
        entry.full_scan = true;
      } else {
        const auto& ix = indexes_of[base_ids[e]];
        if (!ix.empty()) {
          std::uniform_int_distribution<std::size_t> pick(0, ix.size() - 1);
          entry.index = ix[pick(template_rng)];
        }
        const double a = sel(template_rng);
        const double b = sel(template_rng);
        entry.sel_min = std::min(a, b);
        entry.sel_max = std::max(a, b);
        // loops only attach to non-root scans so every plan has an outer side
        if (e > 0 && unit(template_rng) < spec.loop_fraction) {
          entry.loop_count = loop(template_rng);
        }
      }
      tpl.entries.push_back(entry);
    }
    wl.templates.push_back(std::move(tpl));
  }

  // train/test template split
  std::vector<int> tids(spec.template_count);
  std::iota(tids.begin(), tids.end(), 0);
  std::shuffle(tids.begin(), tids.end(), template_rng);
  const std::size_t n_test = static_cast<std::size_t>(std::llround(
      spec.test_template_fraction * static_cast<double>(spec.template_count)));
  wl.test_template_ids.assign(tids.begin(),
                              tids.begin() + static_cast<std::ptrdiff_t>(n_test));
  wl.train_template_ids.assign(
      tids.begin() + static_cast<std::ptrdiff_t>(n_test), tids.end());
  std::sort(wl.test_template_ids.begin(), wl.test_template_ids.end());
  std::sort(wl.train_template_ids.begin(), wl.train_template_ids.end());
  if (wl.train_template_ids.empty()) {
    throw std::invalid_argument("template split leaves no training templates");
  }
  if (wl.test_template_ids.empty() && spec.test_query_count > 0) {
    throw std::invalid_argument(
        "test queries requested but the split holds out no templates");
  }

  const auto instantiate = [&](const std::vector<int>& template_pool,
                               std::size_t count, int first_query_id,
                               std::vector<QuerySpec>& specs,
                               std::vector<PlanNode>& plans) {
    std::uniform_int_distribution<std::size_t> pick(0, template_pool.size() - 1);
    for (std::size_t q = 0; q < count; ++q) {
      const int tid = template_pool[pick(query_rng)];
      PlanNode plan =
          detail::instantiate_template(wl.templates[static_cast<std::size_t>(tid)],
                                       query_rng);
      specs.push_back(parse_plan(plan, wl.catalog,
                                 first_query_id + static_cast<int>(q), tid));
      plans.push_back(std::move(plan));
    }
  };
  instantiate(wl.train_template_ids, spec.query_count, 0, wl.queries, wl.plans);
  instantiate(wl.test_template_ids, spec.test_query_count,
              static_cast<int>(spec.query_count), wl.test_queries,
              wl.test_plans);
  return wl;
}

enum class ReadMode { deterministic, bernoulli };

/// Deterministic read set: full scans take every block; a selective scan
/// with probability p takes the leading round(p * block_count) blocks, so the
/// set has the expected size and overlapping selectivities share prefixes.
inline std::vector<BlockRef> expected_reads(const QuerySpec& spec,
                                            const Catalog& catalog) {
  std::vector<BlockRef> reads;
  for (const RelationMeta& r : catalog.relations()) {
    auto it = spec.profile.find(r.id);
    if (it == spec.profile.end()) continue;
    const double p = it->second.probability();
    const std::int64_t take = std::min(
        r.block_count, static_cast<std::int64_t>(std::llround(
                           p * static_cast<double>(r.block_count))));
    for (std::int64_t j = 0; j < take; ++j) reads.push_back({r.id, j});
  }
  return reads;
}

/// Sampled read set: each block of a selective relation is included
/// independently with probability p, in ascending order.
inline std::vector<BlockRef> sample_reads(const QuerySpec& spec,
                                          const Catalog& catalog,
                                          std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<BlockRef> reads;
  for (const RelationMeta& r : catalog.relations()) {
    auto it = spec.profile.find(r.id);
    if (it == spec.profile.end()) continue;
    const double p = it->second.probability();
    if (it->second.mode == AccessMode::full_scan) {
      for (std::int64_t j = 0; j < r.block_count; ++j) reads.push_back({r.id, j});
      continue;
    }
    for (std::int64_t j = 0; j < r.block_count; ++j) {
      if (unit(rng) < p) reads.push_back({r.id, j});
    }
  }
  return reads;
}

inline std::vector<BlockRef> materialize_reads(const QuerySpec& spec,
                                               const Catalog& catalog,
                                               ReadMode mode,
                                               std::mt19937_64& rng) {
  return mode == ReadMode::deterministic ? expected_reads(spec, catalog)
                                         : sample_reads(spec, catalog, rng);
}

}  // namespace bufsched
