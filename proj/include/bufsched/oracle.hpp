#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "bufsched/buffer_pool.hpp"
#include "bufsched/catalog.hpp"
#include "bufsched/schedule.hpp"
#include "bufsched/workload.hpp"

namespace bufsched {

inline constexpr std::size_t kOracleMaxQueue = 9;

struct OracleResult {
  std::vector<std::size_t> order;  // lexicographically smallest minimizer
  std::int64_t total_misses = 0;
};

/// Exhaustive search over execution orders, each simulated on a fresh pool
/// with the queue's fixed read sets. Factorial in the queue length, hence the
/// hard guard.
inline OracleResult brute_force_oracle(const Catalog& catalog,
                                       std::size_t buffer_blocks,
                                       std::span<const QueuedQuery> queue) {
  if (queue.empty()) {
    throw std::invalid_argument("oracle queue must be nonempty");
  }
  if (queue.size() > kOracleMaxQueue) {
    throw std::invalid_argument("oracle queue exceeds the factorial guard of " +
                                std::to_string(kOracleMaxQueue) + " queries");
  }
  std::vector<std::size_t> perm(queue.size());
  std::iota(perm.begin(), perm.end(), 0);

  OracleResult best;
  bool first = true;
  do {
    BufferPool pool(catalog, buffer_blocks);
    std::int64_t misses = 0;
    for (std::size_t idx : perm) {
      misses += pool.execute(queue[idx].reads).misses;
    }
    // permutations arrive in lexicographic order, so a strict improvement
    // keeps the smallest minimizing order
    if (first || misses < best.total_misses) {
      best.order = perm;
      best.total_misses = misses;
      first = false;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Convenience form over raw specs: materializes deterministic read sets.
inline OracleResult brute_force_oracle(const Catalog& catalog,
                                       std::size_t buffer_blocks,
                                       std::span<const QuerySpec> queries) {
  std::vector<QueuedQuery> queue;
  queue.reserve(queries.size());
  for (const QuerySpec& spec : queries) {
    queue.push_back({spec, expected_reads(spec, catalog)});
  }
  return brute_force_oracle(catalog, buffer_blocks, queue);
}

}  // namespace bufsched
