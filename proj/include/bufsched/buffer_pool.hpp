#pragma once

#include <cstdint>
#include <list>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "bufsched/catalog.hpp"

namespace bufsched {

struct BlockRef {
  int relation_id = 0;
  std::int64_t block_index = 0;

  friend bool operator==(const BlockRef&, const BlockRef&) = default;
  friend auto operator<=>(const BlockRef&, const BlockRef&) = default;
};

struct BlockRefHash {
  std::size_t operator()(const BlockRef& b) const {
    const std::uint64_t k = (static_cast<std::uint64_t>(
                                 static_cast<std::uint32_t>(b.relation_id))
                             << 32) ^
                            static_cast<std::uint64_t>(b.block_index);
    return std::hash<std::uint64_t>{}(k);
  }
};

enum class AccessResult { hit, miss };

struct ExecutionStats {
  std::int64_t hits = 0;
  std::int64_t misses = 0;

  std::int64_t requests() const { return hits + misses; }

  friend bool operator==(const ExecutionStats&, const ExecutionStats&) = default;
};

/// Per-query hit ratio, the agent's reward. Zero-request stats yield 0 so
/// degenerate queries stay harmless.
inline double hit_ratio(const ExecutionStats& s) {
  const std::int64_t n = s.requests();
  return n == 0 ? 0.0 : static_cast<double>(s.hits) / static_cast<double>(n);
}

/// Fixed-capacity block cache with strict LRU eviction. Single-owner;
/// distinct instances are independent.
class BufferPool {
 public:
  BufferPool(const Catalog& catalog, std::size_t capacity_blocks)
      : capacity_(capacity_blocks) {
    if (capacity_blocks == 0) {
      throw std::invalid_argument("buffer pool capacity must be positive");
    }
    for (const auto& r : catalog.relations()) {
      block_counts_.emplace(r.id, r.block_count);
    }
  }

  BufferPool(const BufferPool&) = delete;
  BufferPool& operator=(const BufferPool&) = delete;
  BufferPool(BufferPool&&) = default;
  BufferPool& operator=(BufferPool&&) = default;

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return index_.size(); }

  bool resident(const BlockRef& b) const { return index_.count(b) > 0; }

  /// One block request. A hit moves the block to most-recent; a miss inserts
  /// it, evicting the least-recently-used block when the pool is full.
  AccessResult access(const BlockRef& b) {
    validate(b);
    auto it = index_.find(b);
    if (it != index_.end()) {
      lru_.splice(lru_.end(), lru_, it->second);  // move to most-recent
      return AccessResult::hit;
    }
    if (index_.size() == capacity_) {
      index_.erase(lru_.front());
      lru_.pop_front();
    }
    lru_.push_back(b);
    index_.emplace(b, std::prev(lru_.end()));
    return AccessResult::miss;
  }

  /// Plays one query's read set through the pool in order.
  ExecutionStats execute(std::span<const BlockRef> reads) {
    ExecutionStats stats;
    for (const BlockRef& b : reads) {
      if (access(b) == AccessResult::hit) {
        ++stats.hits;
      } else {
        ++stats.misses;
      }
    }
    return stats;
  }

  /// 0/1 occupancy matrix in catalog shape: entry (i, j) is 1 iff block j of
  /// relation i is resident.
  BlockMatrix snapshot(const Catalog& catalog) const {
    BlockMatrix m = zero_block_matrix(catalog);
    for (const BlockRef& b : lru_) {
      m[catalog.row_of(b.relation_id)][static_cast<std::size_t>(b.block_index)] =
          1.0;
    }
    return m;
  }

 private:
  void validate(const BlockRef& b) const {
    auto it = block_counts_.find(b.relation_id);
    if (it == block_counts_.end()) {
      throw std::out_of_range("block ref names unknown relation id " +
                              std::to_string(b.relation_id));
    }
    if (b.block_index < 0 || b.block_index >= it->second) {
      throw std::invalid_argument(
          "block index " + std::to_string(b.block_index) +
          " out of range for relation id " + std::to_string(b.relation_id));
    }
  }

  std::size_t capacity_;
  std::list<BlockRef> lru_;  // front = least recent, back = most recent
  std::unordered_map<BlockRef, std::list<BlockRef>::iterator, BlockRefHash>
      index_;
  std::unordered_map<int, std::int64_t> block_counts_;
};

}  // namespace bufsched
