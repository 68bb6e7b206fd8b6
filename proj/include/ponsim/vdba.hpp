#pragma once

// Host-resident virtual DBA. Collects DBRu reports for a cycle (one cycle =
// one downstream frame period), then computes a BWMAP over the grantable
// region [0, capacity - reserve). The tail region [capacity - reserve,
// capacity) is deliberately left unallocated for the dataplane fast path.
//
// Grant discipline: weighted shares with two-pass redistribution.
//   pass 1  g_i = min(occupancy_i, floor(grantable * w_i / sum(w)))
//           over pending alloc-ids in ascending order
//   pass 2  leftover handed out in the same order until no demand or no
//           capacity
// Grants pack contiguously from start_time 0 in ascending alloc-id order;
// zero grants are omitted; every grant carries the DBRu-solicit flag.
//
// ReservePolicy fractions are stored as integers (ppm for the fixed
// fraction, Q16 for the EWMA alpha) so every scheduling decision is exact
// integer arithmetic and runs reproduce bit-for-bit.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "ponsim/common.hpp"
#include "ponsim/wire.hpp"

namespace ponsim::dba {

using wire::AllocationStructure;
using wire::DbruReport;

struct UnknownAllocId : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// A LowLatency-class report reached the host: classification bug upstream.
struct WrongClass : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TcontSpec {
  TcontClass cls = TcontClass::Normal;
  std::uint32_t onu_id = 0;
  std::uint32_t weight = 1;
};

class TcontRegistry {
 public:
  void add(std::uint16_t alloc_id, TcontSpec spec) {
    if (alloc_id > wire::kMaxAllocId) throw std::invalid_argument("alloc_id exceeds 14 bits");
    if (spec.weight == 0) throw std::invalid_argument("weight must be positive");
    if (!entries_.emplace(alloc_id, spec).second)
      throw std::invalid_argument("duplicate alloc_id");
  }

  const TcontSpec* find(std::uint16_t alloc_id) const {
    auto it = entries_.find(alloc_id);
    return it == entries_.end() ? nullptr : &it->second;
  }

  const std::map<std::uint16_t, TcontSpec>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::uint16_t, TcontSpec> entries_;  // ascending alloc_id
};

enum class ReserveMode : std::uint8_t { Fixed = 0, Adaptive = 1 };

struct ReservePolicy {
  ReserveMode mode = ReserveMode::Fixed;
  std::uint32_t fixed_fraction_ppm = 0;      // fraction of capacity, 1e-6 steps
  std::uint32_t ewma_alpha_q16 = 1u << 16;   // alpha in (0,1], 2^-16 steps
  std::uint32_t min_words = 0;
  std::uint32_t max_words = 0;

  static ReservePolicy fixed(double fraction, std::uint32_t min_w, std::uint32_t max_w) {
    if (fraction < 0.0 || fraction >= 1.0) throw std::invalid_argument("fixed_fraction not in [0,1)");
    if (min_w > max_w) throw std::invalid_argument("min_words > max_words");
    return {ReserveMode::Fixed, std::uint32_t(fraction * 1e6 + 0.5), 1u << 16, min_w, max_w};
  }

  static ReservePolicy adaptive(double alpha, std::uint32_t min_w, std::uint32_t max_w) {
    if (alpha <= 0.0 || alpha > 1.0) throw std::invalid_argument("ewma_alpha not in (0,1]");
    if (min_w > max_w) throw std::invalid_argument("min_words > max_words");
    return {ReserveMode::Adaptive, 0, std::uint32_t(alpha * 65536.0 + 0.5), min_w, max_w};
  }
};

struct CycleState {
  std::map<std::uint16_t, std::uint32_t> pending_reports;  // alloc_id -> occupancy, latest wins
  std::uint64_t cycle_seq = 0;
  std::int64_t reserve_demand_ewma_q16 = 0;  // Q16 words
};

inline void ingest_report(CycleState& state, const DbruReport& report,
                          const TcontRegistry& registry) {
  const TcontSpec* spec = registry.find(report.alloc_id);
  if (!spec) throw UnknownAllocId("unregistered alloc_id " + std::to_string(report.alloc_id));
  if (spec->cls != TcontClass::Normal)
    throw WrongClass("low-latency alloc_id " + std::to_string(report.alloc_id) +
                     " reached the host path");
  state.pending_reports[report.alloc_id] = report.occupancy_words;
}

inline std::uint32_t reserved_words(const ReservePolicy& policy, const CycleState& state,
                                    std::uint32_t capacity_words) {
  std::uint64_t want = 0;
  if (policy.mode == ReserveMode::Fixed) {
    want = std::uint64_t(capacity_words) * policy.fixed_fraction_ppm / 1'000'000;
  } else {
    want = std::uint64_t((state.reserve_demand_ewma_q16 + 0xFFFF) >> 16);  // ceil
  }
  if (want < policy.min_words) want = policy.min_words;
  if (want > policy.max_words) want = policy.max_words;
  return std::uint32_t(want);
}

// Feeds one frame's low-latency demand (words pending at the NIC when the
// frame was merged) into the adaptive reserve estimate.
inline void update_reserve_demand(const ReservePolicy& policy, CycleState& state,
                                  std::uint64_t demand_words) {
  const std::int64_t a = policy.ewma_alpha_q16;
  state.reserve_demand_ewma_q16 =
      (a * std::int64_t(demand_words << 16) + ((1 << 16) - a) * state.reserve_demand_ewma_q16) >> 16;
}

inline std::vector<AllocationStructure> compute_bwmap(const CycleState& state,
                                                      const TcontRegistry& registry,
                                                      std::uint32_t capacity_words,
                                                      std::uint32_t reserve_words) {
  if (capacity_words > 0xFFFF) throw std::invalid_argument("capacity exceeds 16-bit start_time");
  if (reserve_words > capacity_words) throw std::invalid_argument("reserve exceeds capacity");
  const std::uint64_t grantable = capacity_words - reserve_words;

  std::uint64_t weight_sum = 0;
  for (const auto& [id, occ] : state.pending_reports) {
    const TcontSpec* spec = registry.find(id);
    if (!spec) throw UnknownAllocId("pending report for unregistered alloc_id");
    weight_sum += spec->weight;
  }

  std::vector<AllocationStructure> out;
  if (weight_sum == 0) return out;

  // Pass 1: weighted share, capped by demand.
  std::vector<std::pair<std::uint16_t, std::uint64_t>> grants;  // ascending alloc_id
  std::uint64_t granted = 0;
  for (const auto& [id, occ] : state.pending_reports) {
    const std::uint64_t share = grantable * registry.find(id)->weight / weight_sum;
    const std::uint64_t g = std::min<std::uint64_t>(occ, share);
    grants.emplace_back(id, g);
    granted += g;
  }

  // Pass 2: redistribute leftover to remaining demand, same order.
  std::uint64_t leftover = grantable - granted;
  for (auto& [id, g] : grants) {
    if (leftover == 0) break;
    const std::uint64_t want = state.pending_reports.at(id) - g;
    const std::uint64_t extra = std::min(want, leftover);
    g += extra;
    leftover -= extra;
  }

  std::uint32_t next_start = 0;
  for (const auto& [id, g] : grants) {
    if (g == 0) continue;
    out.push_back({id, wire::kFlagDbruRequested, std::uint16_t(next_start), std::uint16_t(g)});
    next_start += std::uint32_t(g);
  }
  return out;
}

// Static equal split of the full capacity across every registered alloc-id,
// identical every frame; the fixed-allocation baseline. Remainder words go
// to the lowest alloc-ids.
inline std::vector<AllocationStructure> compute_fixed_bwmap(const TcontRegistry& registry,
                                                            std::uint32_t capacity_words) {
  if (registry.empty()) throw std::invalid_argument("registry is empty");
  if (capacity_words > 0xFFFF) throw std::invalid_argument("capacity exceeds 16-bit start_time");
  const std::uint64_t n = registry.size();
  const std::uint64_t base = capacity_words / n;
  std::uint64_t remainder = capacity_words % n;

  std::vector<AllocationStructure> out;
  out.reserve(registry.size());
  std::uint32_t next_start = 0;
  for (const auto& [id, spec] : registry.entries()) {
    std::uint64_t g = base;
    if (remainder > 0) {
      ++g;
      --remainder;
    }
    if (g == 0) continue;
    out.push_back({id, wire::kFlagDbruRequested, std::uint16_t(next_start), std::uint16_t(g)});
    next_start += std::uint32_t(g);
  }
  return out;
}

}  // namespace ponsim::dba
