#pragma once

// Dataplane-model fast path. DBRu reports whose Alloc-ID is registered as
// low latency are intercepted at the NIC (consumed, never forwarded to the
// host) and held in a bounded FIFO. When the next downstream frame departs,
// merge_bwmap appends grants for the held requests into the frame's reserved
// tail region [capacity - reserve, capacity), using one traversal of the
// queue and only integer add/compare/min steps, the operations a P4 pipeline
// can do at line rate. Original allocations are never moved or rewritten.

#include <cstdint>
#include <deque>
#include <limits>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "ponsim/common.hpp"
#include "ponsim/vdba.hpp"
#include "ponsim/wire.hpp"

namespace ponsim::fastpath {

using wire::AllocationStructure;
using wire::DbruReport;
using wire::DownstreamFrame;

// An original allocation intrudes into the reserved region: the host/NIC
// contract is broken.
struct MalformedInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Route : std::uint8_t { FastPath = 0, HostPath = 1 };

struct ClassifierTable {
  std::unordered_set<std::uint16_t> low_latency_ids;

  static ClassifierTable from_registry(const dba::TcontRegistry& registry) {
    ClassifierTable t;
    for (const auto& [id, spec] : registry.entries())
      if (spec.cls == TcontClass::LowLatency) t.low_latency_ids.insert(id);
    return t;
  }
};

// Unknown ids route to the host, which raises UnknownAllocId there. An empty
// table disables the fast path entirely.
inline Route classify(const DbruReport& report, const ClassifierTable& table) {
  return table.low_latency_ids.contains(report.alloc_id) ? Route::FastPath : Route::HostPath;
}

struct PendingEntry {
  std::uint16_t alloc_id = 0;
  std::uint32_t remaining_words = 0;  // > 0 while queued
  std::int64_t intercepted_at_ns = 0;
  std::uint64_t tag = 0;  // caller correlation handle, opaque here
};

class PendingQueue {
 public:
  explicit PendingQueue(std::size_t capacity = 1024) : capacity_(capacity) {}

  // False when the queue is full: the newest request is dropped and counted.
  bool push(PendingEntry e) {
    if (q_.size() >= capacity_) {
      ++drops_;
      return false;
    }
    total_words_ += e.remaining_words;
    q_.push_back(e);
    return true;
  }

  bool empty() const { return q_.empty(); }
  std::size_t size() const { return q_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t drops() const { return drops_; }
  std::uint64_t total_words() const { return total_words_; }

  const PendingEntry& front() const { return q_.front(); }
  const PendingEntry& at(std::size_t i) const { return q_[i]; }

  void pop_front() {
    total_words_ -= q_.front().remaining_words;
    q_.pop_front();
  }

  void reduce_front(std::uint32_t words) {
    q_.front().remaining_words -= words;
    total_words_ -= words;
  }

 private:
  std::deque<PendingEntry> q_;
  std::size_t capacity_;
  std::uint64_t drops_ = 0;
  std::uint64_t total_words_ = 0;
};

// Intercepts one fast-path report: appends {alloc_id, occupancy, now} to the
// queue and consumes the report. Zero-occupancy reports (keep-alives) are
// not enqueued. Returns false if nothing was queued; an overflow drop is
// visible via queue.drops().
inline bool intercept(PendingQueue& queue, const DbruReport& report, std::int64_t now_ns,
                      std::uint64_t tag = 0) {
  if (report.occupancy_words == 0) return false;
  return queue.push({report.alloc_id, report.occupancy_words, now_ns, tag});
}

struct GrantRecord {
  std::uint64_t tag = 0;
  std::uint16_t alloc_id = 0;
  std::uint32_t granted_words = 0;
  bool completed = false;  // request fully served, entry dequeued
};

struct MergeResult {
  DownstreamFrame frame;
  std::uint32_t merged_words = 0;
  std::uint64_t ops_used = 0;  // instrumented add/compare/min count
  std::vector<GrantRecord> grants;
};

inline constexpr std::size_t kMergeAll = std::numeric_limits<std::size_t>::max();

// Merges queued requests into the reserved tail of a departing frame.
// FIFO order; each request gets min(remaining, space left); a partially
// served head entry stays queued with its remainder (carry-over). Original
// allocation records are copied untouched, so their serialized bytes sit at
// the same offsets in the merged frame. max_entries bounds how deep into the
// queue the merge may look (the caller's eligibility cutoff: requests
// intercepted too close to departure wait for the next frame).
//
// ops_used counts the scheduling loop's integer steps (loop compare, min,
// two accumulator adds per granted entry) and is <= 4 * (granted + 1).
inline MergeResult merge_bwmap(const DownstreamFrame& frame, PendingQueue& queue,
                               std::uint32_t capacity_words, std::uint32_t reserve_words,
                               std::size_t max_entries = kMergeAll) {
  if (capacity_words > 0xFFFF) throw std::invalid_argument("capacity exceeds 16-bit start_time");
  if (reserve_words > capacity_words) throw std::invalid_argument("reserve exceeds capacity");
  const std::uint32_t region_start = capacity_words - reserve_words;
  if (!frame.bwmap.empty()) {
    const auto& last = frame.bwmap.back();
    if (std::uint32_t(last.start_time) + last.grant_size > region_start)
      throw MalformedInput("original BWMAP intrudes into the reserved region");
  }

  MergeResult r;
  r.frame = frame;
  std::uint32_t next_start = region_start;
  std::uint32_t space = reserve_words;
  std::size_t taken = 0;

  // Single pass, head of queue only: compare, min, add, add per grant.
  while (true) {
    ++r.ops_used;  // loop compare
    if (queue.empty() || taken >= max_entries || space == 0) break;
    if (r.frame.bwmap.size() >= wire::kMaxBwmapLen) break;  // structural bound, never hit at PON scale
    const PendingEntry& head = queue.front();
    ++r.ops_used;  // min
    const std::uint32_t g = std::min(head.remaining_words, space);
    r.frame.bwmap.push_back(
        {head.alloc_id, wire::kFlagDbruRequested, std::uint16_t(next_start), std::uint16_t(g)});
    r.grants.push_back({head.tag, head.alloc_id, g, g == head.remaining_words});
    r.ops_used += 2;  // start += g, space -= g
    next_start += g;
    space -= g;
    r.merged_words += g;
    if (g == head.remaining_words) {
      queue.pop_front();
      ++taken;
    } else {
      queue.reduce_front(g);  // head keeps the remainder for the next frame
    }
  }

  r.frame.hlend.bwmap_len = std::uint16_t(r.frame.bwmap.size());
  return r;
}

}  // namespace ponsim::fastpath
