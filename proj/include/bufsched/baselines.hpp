#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "bufsched/buffer_pool.hpp"
#include "bufsched/catalog.hpp"
#include "bufsched/schedule.hpp"

namespace bufsched {

/// First-come-first-served: always the head of the queue.
inline std::size_t fcfs_next(std::span<const std::size_t> remaining) {
  if (remaining.empty()) {
    throw std::invalid_argument("fcfs_next on empty queue");
  }
  return 0;
}

/// Expected buffer hits of one query against the current pool contents:
/// sum over blocks of occupancy * access probability.
inline double greedy_score(const BlockMatrix& pool_snapshot,
                           const BlockMatrix& query_access) {
  if (pool_snapshot.size() != query_access.size()) {
    throw std::invalid_argument("snapshot/access row count mismatch");
  }
  double score = 0.0;
  for (std::size_t i = 0; i < pool_snapshot.size(); ++i) {
    if (pool_snapshot[i].size() != query_access[i].size()) {
      throw std::invalid_argument("snapshot/access row length mismatch");
    }
    for (std::size_t j = 0; j < pool_snapshot[i].size(); ++j) {
      score += pool_snapshot[i][j] * query_access[i][j];
    }
  }
  return score;
}

/// Greedy pick: the candidate with the highest score, ties to the lowest
/// index (queue order).
inline std::size_t greedy_next(const BlockMatrix& pool_snapshot,
                               std::span<const BlockMatrix> candidate_access) {
  if (candidate_access.empty()) {
    throw std::invalid_argument("greedy_next on empty queue");
  }
  std::size_t best = 0;
  double best_score = greedy_score(pool_snapshot, candidate_access[0]);
  for (std::size_t k = 1; k < candidate_access.size(); ++k) {
    const double s = greedy_score(pool_snapshot, candidate_access[k]);
    if (s > best_score) {
      best = k;
      best_score = s;
    }
  }
  return best;
}

inline ScheduleResult run_fcfs(BufferPool& pool,
                               std::span<const QueuedQuery> queue) {
  return run_schedule(pool, queue, [](std::span<const std::size_t> remaining) {
    return fcfs_next(remaining);
  });
}

inline ScheduleResult run_greedy(BufferPool& pool, const Catalog& catalog,
                                 std::span<const QueuedQuery> queue) {
  std::vector<BlockMatrix> access;
  access.reserve(queue.size());
  for (const QueuedQuery& q : queue) {
    access.push_back(access_matrix(q.spec, catalog));
  }
  return run_schedule(
      pool, queue, [&](std::span<const std::size_t> remaining) {
        const BlockMatrix snap = pool.snapshot(catalog);
        std::size_t best = 0;
        double best_score = greedy_score(snap, access[remaining[0]]);
        for (std::size_t k = 1; k < remaining.size(); ++k) {
          const double s = greedy_score(snap, access[remaining[k]]);
          if (s > best_score) {
            best = k;
            best_score = s;
          }
        }
        return best;
      });
}

}  // namespace bufsched
