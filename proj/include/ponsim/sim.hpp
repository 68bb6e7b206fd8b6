#pragma once

// Deterministic discrete-event simulator wiring ONUs, the dataplane fast
// path, the host vDBA and the fibre into the A-F pipeline:
//
//   A  DBRu created at the ONU-side generator
//   B  parsed at the OLT NIC after the upstream propagation delay
//   C  fast path: intercepted and held at the NIC (low-latency Alloc-IDs)
//   D  host path: transferred to and ingested by the vDBA
//   E  grants leave with a downstream frame (host map merged at the NIC)
//   F  metrics collection (stage timestamps on every sample)
//
// Downstream frames depart the NIC at every multiple of the frame period.
// A host BWMAP computed at boundary n arrives at the NIC after
// host_dba_compute + host_to_nic and rides the first departure after its
// arrival; a map that misses a departure slips exactly one frame. Fast-path
// requests ride the first departure d with intercept_time + fast_merge <= d.
// The ONU applies a grant onu_grant_apply after the frame arrives and
// transmits at the granted start_time inside the next upstream frame window.
//
// Ties are broken by (timestamp, event kind, alloc_id, insertion order), so
// a scenario+seed pair always replays to the identical event trace; the
// trace digest (FNV-1a 64) is the determinism witness.

#include <cstdint>
#include <map>
#include <memory>
#include <queue>
#include <string>
#include <vector>

#include "ponsim/fast_intercept.hpp"
#include "ponsim/metrics.hpp"
#include "ponsim/pcap.hpp"
#include "ponsim/scenario.hpp"
#include "ponsim/traffic.hpp"
#include "ponsim/vdba.hpp"
#include "ponsim/wire.hpp"

namespace ponsim::sim {

enum class EventKind : std::uint8_t {
  EmitReport = 0,
  ReportReady = 1,
  HostIngest = 2,
  HostMapArrive = 3,
  FrameDepart = 4,
  GrantAtOnu = 5,
};

struct TraceEntry {
  std::int64_t ts_ns = 0;
  std::uint8_t kind = 0;
  std::uint16_t alloc_id = 0;
  std::uint32_t aux = 0;  // frame_seq for frame events
};

struct EventTrace {
  std::vector<TraceEntry> entries;  // populated only when recording
  std::uint64_t hash = 0;
};

// One emitted downstream frame plus its reserved-region size, retained when
// RunOptions::record_frames is set (test introspection).
struct FrameRecord {
  std::int64_t depart_ns = 0;
  wire::DownstreamFrame frame;
  std::uint32_t reserve_words = 0;
};

struct RunOptions {
  bool record_trace = false;
  bool record_frames = false;
  bool keep_samples = true;
  wire::PcapWriter* pcap = nullptr;
};

struct SimReport {
  std::uint64_t frames_emitted = 0;
  std::uint64_t trace_hash = 0;
  metrics::Summary summary;
  std::vector<metrics::LatencySample> samples;

  std::uint64_t fast_queue_drops = 0;
  std::uint64_t slips = 0;                 // fast requests not fully served by
                                           // their first eligible departure
  std::uint64_t ll_entries_completed = 0;  // fast requests fully served
  std::uint64_t offered_ll_words = 0;      // fast requests with a full 2-frame window
  std::uint64_t ll_words_within_2f = 0;    // of those, words granted in time
  std::uint64_t dropped_ll_words = 0;
  std::uint64_t ungranted_reports = 0;  // host reports starved in their cycle
  std::uint64_t incomplete_samples = 0; // still in flight at end of run

  // Utilization accounting, indexed by TcontClass.
  std::uint64_t granted_words[2] = {0, 0};
  std::uint64_t transmitted_words[2] = {0, 0};

  EventTrace trace;
  std::vector<FrameRecord> frames;
};

namespace detail {

inline constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

inline void fnv_mix(std::uint64_t& h, std::uint64_t v, unsigned bytes) {
  for (unsigned i = 0; i < bytes; ++i) {
    h ^= (v >> (8 * i)) & 0xFF;
    h *= kFnvPrime;
  }
}

struct Event {
  std::int64_t ts;
  EventKind kind;
  std::uint16_t alloc_id;
  std::uint32_t aux;
  std::uint64_t seq;
};

struct EventAfter {
  bool operator()(const Event& a, const Event& b) const {
    if (a.ts != b.ts) return a.ts > b.ts;
    if (a.kind != b.kind) return a.kind > b.kind;
    if (a.alloc_id != b.alloc_id) return a.alloc_id > b.alloc_id;
    return a.seq > b.seq;
  }
};

class Run {
 public:
  Run(const Scenario& sc, const RunOptions& opt) : sc_(sc), opt_(opt), fastq_(sc.fast_queue_capacity) {
    capacity_ = sc.capacity_words();
    period_ = sc.frame_period_ns;

    // The scheduling view of the registry: in Standard and FixedAllocation
    // modes nothing is fast-classed, so every T-CONT is host-eligible.
    for (const auto& [id, spec] : sc.registry.entries()) {
      dba::TcontSpec host_spec = spec;
      if (sc.mode != SchedulingMode::FastIntercept) host_spec.cls = TcontClass::Normal;
      sched_registry_.add(id, host_spec);
    }
    if (sc.mode == SchedulingMode::FastIntercept)
      classifier_ = fastpath::ClassifierTable::from_registry(sc.registry);
    if (sc.mode == SchedulingMode::FixedAllocation)
      fixed_map_ = dba::compute_fixed_bwmap(sc.registry, capacity_);

    for (const auto& ts : sc.traffic)
      generators_.emplace(ts.alloc_id, traffic::ArrivalGenerator(ts.process));
  }

  SimReport run() {
    schedule({0, EventKind::FrameDepart, 0, 0, seq_++});
    for (auto& [alloc, gen] : generators_) pull_generator(alloc, gen);

    while (!events_.empty() && events_.top().ts < sc_.duration_ns) {
      const Event ev = events_.top();
      events_.pop();
      trace(ev);
      switch (ev.kind) {
        case EventKind::EmitReport: on_emit(ev); break;
        case EventKind::ReportReady: on_report_ready(ev); break;
        case EventKind::HostIngest: on_host_ingest(ev); break;
        case EventKind::HostMapArrive: arrived_maps_.push_back(ev.aux); break;
        case EventKind::FrameDepart: on_frame_depart(ev); break;
        case EventKind::GrantAtOnu: on_grant_at_onu(ev); break;
      }
    }
    return finish();
  }

 private:
  struct SampleState {
    metrics::LatencySample s;
    std::uint32_t words = 0;
    std::uint32_t remaining = 0;
    std::uint16_t final_start = 0;
    bool counts_offered = false;
    bool first_eligible_seen = false;
    bool dropped = false;
    bool done = false;
  };

  struct HostMapRec {
    std::vector<wire::AllocationStructure> bwmap;
    std::uint32_t reserve = 0;
    std::map<std::uint16_t, std::vector<std::uint32>> consumed;
  };

  struct FrameRec {
    wire::DownstreamFrame frame;
    std::uint32_t reserve = 0;
    std::vector<std::uint32> completed;  // sample ids finalized by this frame
  };

  void schedule(Event ev) { events_.push(ev); }

  void trace(const Event& ev) {
    detail::fnv_mix(hash_, std::uint64_t(ev.ts), 8);
    detail::fnv_mix(hash_, std::uint64_t(ev.kind), 1);
    detail::fnv_mix(hash_, ev.alloc_id, 2);
    detail::fnv_mix(hash_, ev.aux, 4);
    if (opt_.record_trace)
      trace_entries_.push_back({ev.ts, std::uint8_t(ev.kind), ev.alloc_id, ev.aux});
  }

  void pull_generator(std::uint16_t alloc, traffic::ArrivalGenerator& gen) {
    const traffic::TrafficEvent next = gen.next();
    if (next.at_ns >= sc_.duration_ns) return;
    samples_.push_back(make_sample(alloc, next));
    schedule({next.at_ns, EventKind::EmitReport, alloc,
              std::uint32_t(samples_.size() - 1), seq_++});
  }

  SampleState make_sample(std::uint16_t alloc, const traffic::TrafficEvent& ev) {
    SampleState st;
    st.s.alloc_id = alloc;
    st.s.cls = sc_.registry.find(alloc)->cls;
    st.s.t_created = ev.at_ns;
    st.words = st.remaining = ev.words;
    return st;
  }

  void on_emit(const Event& ev) {
    SampleState& st = samples_[ev.aux];
    backlog_[ev.alloc_id] += st.words;
    schedule({ev.ts + sc_.delays.prop_delay_ns + sc_.delays.nic_parse_ns, EventKind::ReportReady,
              ev.alloc_id, ev.aux, seq_++});
    pull_generator(ev.alloc_id, generators_.at(ev.alloc_id));
  }

  void on_report_ready(const Event& ev) {
    SampleState& st = samples_[ev.aux];
    st.s.t_nic_parsed = ev.ts;
    const wire::DbruReport report{ev.alloc_id, st.words, st.s.t_created};

    if (opt_.pcap) opt_.pcap->append(wire::encode_dbru(report, upstream_wire_), ev.ts);

    if (sc_.mode == SchedulingMode::FixedAllocation) {
      // Grants are unconditional; the report only marks demand. Kept on the
      // host path for metrics with a zero-cost ingest.
      st.s.path = PathKind::Host;
      st.s.t_host_ingested = ev.ts;
      if (st.words > 0) fixed_waiting_[ev.alloc_id].push_back(ev.aux);
      return;
    }

    if (fastpath::classify(report, classifier_) == fastpath::Route::FastPath) {
      st.s.path = PathKind::Fast;
      st.s.t_intercepted = ev.ts;
      if (st.words > 0 && st.s.t_created + 3 * period_ <= sc_.duration_ns) {
        st.counts_offered = true;
        report_.offered_ll_words += st.words;
      }
      if (!fastpath::intercept(fastq_, report, ev.ts, ev.aux) && st.words > 0) {
        st.dropped = true;
        report_.dropped_ll_words += st.words;
      }
      return;
    }

    st.s.path = PathKind::Host;
    schedule({ev.ts + sc_.delays.nic_to_host_ns, EventKind::HostIngest, ev.alloc_id, ev.aux,
              seq_++});
  }

  void on_host_ingest(const Event& ev) {
    SampleState& st = samples_[ev.aux];
    st.s.t_host_ingested = ev.ts;
    dba::ingest_report(cycle_, {ev.alloc_id, st.words, st.s.t_created}, sched_registry_);
    if (st.words > 0) cycle_samples_[ev.alloc_id].push_back(ev.aux);
  }

  void on_frame_depart(const Event& ev) {
    const std::int64_t now = ev.ts;
    const std::uint32_t n = ev.aux;

    FrameRec rec;
    rec.frame.frame_seq = n;

    if (sc_.mode == SchedulingMode::FixedAllocation) {
      rec.frame.bwmap = fixed_map_;
      for (auto& [alloc, waiting] : fixed_waiting_) {
        if (waiting.empty()) continue;
        for (const auto& a : fixed_map_) {
          if (a.alloc_id != alloc) continue;
          for (std::uint32_t sid : waiting) {
            samples_[sid].s.t_merged = now;
            samples_[sid].final_start = a.start_time;
            rec.completed.push_back(sid);
          }
          waiting.clear();
          break;
        }
      }
    } else {
      // Base map: oldest host BWMAP that has reached the NIC, if any.
      if (!arrived_maps_.empty()) {
        const HostMapRec& hm = host_maps_[arrived_maps_.front()];
        arrived_maps_.erase(arrived_maps_.begin());
        rec.frame.bwmap = hm.bwmap;
        rec.reserve = hm.reserve;
        complete_host_samples(hm, rec, now);
      } else {
        rec.reserve = current_reserve();
      }

      if (sc_.mode == SchedulingMode::FastIntercept) {
        merge_fast_grants(rec, now);
        dba::update_reserve_demand(sc_.reserve, cycle_, fastq_.total_words());
      }

      host_tick(now);
    }

    rec.frame.hlend.bwmap_len = std::uint16_t(rec.frame.bwmap.size());
    if (opt_.pcap) opt_.pcap->append(wire::encode_downstream(rec.frame, downstream_wire_), now);
    if (opt_.record_frames) report_.frames.push_back({now, rec.frame, rec.reserve});

    ++report_.frames_emitted;
    frame_recs_.push_back(std::move(rec));
    schedule({now + sc_.delays.prop_delay_ns, EventKind::GrantAtOnu, 0,
              std::uint32_t(frame_recs_.size() - 1), seq_++});
    const std::int64_t next_depart = now + period_;
    if (next_depart < sc_.duration_ns)
      schedule({next_depart, EventKind::FrameDepart, 0, n + 1, seq_++});
  }

  std::uint32_t current_reserve() const {
    if (sc_.mode != SchedulingMode::FastIntercept) return 0;
    return dba::reserved_words(sc_.reserve, cycle_, capacity_);
  }

  void complete_host_samples(const HostMapRec& hm, FrameRec& rec, std::int64_t now) {
    for (const auto& [alloc, sids] : hm.consumed) {
      const wire::AllocationStructure* granted = nullptr;
      for (const auto& a : hm.bwmap)
        if (a.alloc_id == alloc) {
          granted = &a;
          break;
        }
      if (!granted) {
        report_.ungranted_reports += sids.size();
        continue;
      }
      for (std::uint32_t sid : sids) {
        samples_[sid].s.t_merged = now;
        samples_[sid].final_start = granted->start_time;
        rec.completed.push_back(sid);
      }
    }
  }

  void merge_fast_grants(FrameRec& rec, std::int64_t now) {
    // Requests intercepted within fast_merge of departure wait one frame.
    std::size_t eligible = 0;
    std::vector<std::uint32_t> first_timers;
    while (eligible < fastq_.size() &&
           fastq_.at(eligible).intercepted_at_ns + sc_.delays.fast_merge_ns <= now) {
      SampleState& st = samples_[std::uint32_t(fastq_.at(eligible).tag)];
      if (!st.first_eligible_seen) {
        st.first_eligible_seen = true;
        first_timers.push_back(std::uint32_t(fastq_.at(eligible).tag));
      }
      ++eligible;
    }

    auto merged = fastpath::merge_bwmap(rec.frame, fastq_, capacity_, rec.reserve, eligible);
    const std::size_t appended_at = rec.frame.bwmap.size();  // original record count
    rec.frame = std::move(merged.frame);

    for (std::size_t i = 0; i < merged.grants.size(); ++i) {
      const auto& g = merged.grants[i];
      SampleState& st = samples_[std::uint32_t(g.tag)];
      st.remaining -= g.granted_words;
      if (st.counts_offered && now <= st.s.t_created + 2 * period_)
        report_.ll_words_within_2f += g.granted_words;
      if (g.completed) {
        st.s.t_merged = now;
        st.final_start = rec.frame.bwmap[appended_at + i].start_time;
        rec.completed.push_back(std::uint32_t(g.tag));
        ++report_.ll_entries_completed;
      }
    }
    for (std::uint32_t sid : first_timers)
      if (samples_[sid].remaining > 0) ++report_.slips;
  }

  void host_tick(std::int64_t now) {
    HostMapRec hm;
    hm.reserve = current_reserve();
    hm.bwmap = dba::compute_bwmap(cycle_, sched_registry_, capacity_, hm.reserve);
    hm.consumed = std::move(cycle_samples_);
    cycle_samples_.clear();
    cycle_.pending_reports.clear();
    ++cycle_.cycle_seq;
    host_maps_.push_back(std::move(hm));
    schedule({now + sc_.delays.host_dba_compute_ns + sc_.delays.host_to_nic_ns,
              EventKind::HostMapArrive, 0, std::uint32_t(host_maps_.size() - 1), seq_++});
  }

  void on_grant_at_onu(const Event& ev) {
    const FrameRec& rec = frame_recs_[ev.aux];
    const std::int64_t apply = ev.ts + sc_.delays.onu_grant_apply_ns;
    const std::int64_t window = (apply + period_ - 1) / period_ * period_;

    for (const auto& a : rec.frame.bwmap) {
      const auto cls = std::size_t(sc_.registry.find(a.alloc_id)->cls);
      report_.granted_words[cls] += a.grant_size;
      std::uint64_t& backlog = backlog_[a.alloc_id];
      const std::uint64_t tx = std::min<std::uint64_t>(backlog, a.grant_size);
      backlog -= tx;
      report_.transmitted_words[cls] += tx;
    }

    for (std::uint32_t sid : rec.completed) {
      SampleState& st = samples_[sid];
      st.s.t_grant_at_onu = apply;
      st.s.t_tx_start = window + std::int64_t(st.final_start) * period_ / capacity_;
      collector_.record(st.s);
      st.done = true;
    }
  }

  SimReport finish() {
    collector_.add_fast_queue_drops(fastq_.drops());
    report_.fast_queue_drops = fastq_.drops();
    for (const auto& st : samples_)
      if (!st.done && !st.dropped && st.words > 0) ++report_.incomplete_samples;
    report_.summary = collector_.summarize();
    if (opt_.keep_samples) report_.samples = collector_.take_samples();
    report_.trace.hash = report_.trace_hash = hash_;
    report_.trace.entries = std::move(trace_entries_);
    return std::move(report_);
  }

  const Scenario& sc_;
  RunOptions opt_;
  std::uint32_t capacity_ = 0;
  std::int64_t period_ = 0;

  dba::TcontRegistry sched_registry_;
  fastpath::ClassifierTable classifier_;
  std::vector<wire::AllocationStructure> fixed_map_;
  std::map<std::uint16_t, traffic::ArrivalGenerator> generators_;

  std::priority_queue<Event, std::vector<Event>, EventAfter> events_;
  std::uint64_t seq_ = 0;

  dba::CycleState cycle_;
  std::map<std::uint16_t, std::vector<std::uint32>> cycle_samples_;
  std::map<std::uint16_t, std::vector<std::uint32>> fixed_waiting_;
  fastpath::PendingQueue fastq_;
  std::vector<HostMapRec> host_maps_;
  std::vector<std::uint32_t> arrived_maps_;  // FIFO of host maps at the NIC
  std::vector<FrameRec> frame_recs_;
  std::vector<SampleState> samples_;
  std::map<std::uint16_t, std::uint64_t> backlog_;

  metrics::MetricsCollector collector_;
  std::uint64_t hash_ = kFnvOffset;
  std::vector<TraceEntry> trace_entries_;
  SimReport report_;

  wire::WireConfig downstream_wire_{{{0xff, 0xff, 0xff, 0xff, 0xff, 0xff}},
                                    {{0x02, 0x50, 0x4f, 0x4e, 0x00, 0x01}},
                                    wire::kDefaultEtherType};
  wire::WireConfig upstream_wire_{{{0x02, 0x50, 0x4f, 0x4e, 0x00, 0x01}},
                                  {{0x02, 0x50, 0x4f, 0x4e, 0x00, 0x02}},
                                  wire::kDefaultEtherType};
};

}  // namespace detail

inline SimReport run(const Scenario& scenario, const RunOptions& options = {}) {
  return detail::Run(scenario, options).run();
}

// Mean grant latency for one class, combining paths (count-weighted).
inline double class_grant_mean_ns(const metrics::Summary& s, TcontClass cls) {
  double sum = 0;
  std::uint64_t count = 0;
  for (const auto& g : s.groups) {
    if (g.cls != cls) continue;
    sum += g.grant.mean * double(g.count);
    count += g.count;
  }
  return count ? sum / double(count) : 0.0;
}

inline nlohmann::json report_to_json(const Scenario& sc, const SimReport& r) {
  char hash_hex[19];
  std::snprintf(hash_hex, sizeof hash_hex, "0x%016llx", (unsigned long long)r.trace_hash);
  return {{"schema_version", 1},
          {"scenario", scenario_to_json(sc)},
          {"frames_emitted", r.frames_emitted},
          {"trace_hash", hash_hex},
          {"summary", metrics::to_json(r.summary)},
          {"counters",
           {{"fast_queue_drops", r.fast_queue_drops},
            {"slips", r.slips},
            {"ll_entries_completed", r.ll_entries_completed},
            {"offered_ll_words", r.offered_ll_words},
            {"ll_words_within_2f", r.ll_words_within_2f},
            {"dropped_ll_words", r.dropped_ll_words},
            {"ungranted_reports", r.ungranted_reports},
            {"incomplete_samples", r.incomplete_samples}}},
          {"words",
           {{"granted",
             {{"Normal", r.granted_words[0]}, {"LowLatency", r.granted_words[1]}}},
            {"transmitted",
             {{"Normal", r.transmitted_words[0]}, {"LowLatency", r.transmitted_words[1]}}}}}};
}

struct ComparisonReport {
  struct Entry {
    SchedulingMode mode;
    SimReport report;
  };
  std::vector<Entry> runs;
};

// Runs each scenario and pairs their summaries. The scenarios must be
// identical apart from mode.
inline ComparisonReport compare(const std::vector<Scenario>& scenarios,
                                const RunOptions& options = {}) {
  if (scenarios.size() < 2) throw ConfigError("compare", "needs at least two scenarios");
  nlohmann::json base = scenario_to_json(scenarios.front());
  base.erase("mode");
  for (const auto& sc : scenarios) {
    nlohmann::json other = scenario_to_json(sc);
    other.erase("mode");
    if (other != base) throw ConfigError("compare", "scenarios differ in more than mode");
  }
  ComparisonReport out;
  for (const auto& sc : scenarios) out.runs.push_back({sc.mode, run(sc, options)});
  return out;
}

inline nlohmann::json comparison_to_json(const std::vector<Scenario>& scenarios,
                                         const ComparisonReport& cmp) {
  nlohmann::json runs = nlohmann::json::array();
  for (std::size_t i = 0; i < cmp.runs.size(); ++i) {
    nlohmann::json jr = report_to_json(scenarios[i], cmp.runs[i].report);
    jr["mode"] = to_string(cmp.runs[i].mode);
    runs.push_back(jr);
  }

  nlohmann::json deltas = nlohmann::json::array();
  for (TcontClass cls : {TcontClass::Normal, TcontClass::LowLatency}) {
    nlohmann::json by_mode;
    for (const auto& entry : cmp.runs)
      by_mode[to_string(entry.mode)] = class_grant_mean_ns(entry.report.summary, cls);
    nlohmann::json d{{"class", to_string(cls)}, {"grant_mean_ns", by_mode}};
    if (by_mode.contains("Standard") && by_mode.contains("FastIntercept"))
      d["standard_minus_fastintercept_ns"] =
          by_mode["Standard"].get<double>() - by_mode["FastIntercept"].get<double>();
    deltas.push_back(d);
  }
  return {{"schema_version", 1}, {"runs", runs}, {"deltas", deltas}};
}

}  // namespace ponsim::sim
