#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "bufsched/buffer_pool.hpp"
#include "bufsched/catalog.hpp"

namespace bufsched {

/// A queued query with its read set materialized once, so every scheduler
/// replays identical block requests.
struct QueuedQuery {
  QuerySpec spec;
  std::vector<BlockRef> reads;
};

struct ScheduleResult {
  std::vector<std::size_t> order;     // indices into the input queue
  std::vector<ExecutionStats> stats;  // per query, in execution order
  std::vector<double> rewards;        // hit ratios, in execution order

  double average_hit_ratio() const {
    if (rewards.empty()) return 0.0;
    double sum = 0.0;
    for (double r : rewards) sum += r;
    return sum / static_cast<double>(rewards.size());
  }

  std::int64_t total_misses() const {
    std::int64_t n = 0;
    for (const auto& s : stats) n += s.misses;
    return n;
  }
};

/// Drains the queue through the pool. `pick` sees the remaining queue indices
/// and returns a position into that list; the chosen query executes and is
/// removed. Every query runs exactly once.
template <class PickFn>
ScheduleResult run_schedule(BufferPool& pool, std::span<const QueuedQuery> queue,
                            PickFn&& pick) {
  if (queue.empty()) {
    throw std::invalid_argument("schedule queue must be nonempty");
  }
  std::vector<std::size_t> remaining(queue.size());
  std::iota(remaining.begin(), remaining.end(), 0);

  ScheduleResult result;
  result.order.reserve(queue.size());
  while (!remaining.empty()) {
    const std::size_t pos = pick(std::span<const std::size_t>(remaining));
    if (pos >= remaining.size()) {
      throw std::out_of_range("scheduler picked a position outside the queue");
    }
    const std::size_t chosen = remaining[pos];
    const ExecutionStats stats = pool.execute(queue[chosen].reads);
    result.order.push_back(chosen);
    result.stats.push_back(stats);
    result.rewards.push_back(hit_ratio(stats));
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pos));
  }
  return result;
}

}  // namespace bufsched
