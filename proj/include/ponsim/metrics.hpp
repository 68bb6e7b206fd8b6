#pragma once

// Stage-timestamp collection and latency statistics, the simulator's stand-in
// for the demo's monitoring platform. Samples retain every stage crossing
// (A = created, B = NIC parsed, C = intercepted / D = host ingested,
// E = merged or mapped into a departing frame, grant at ONU, TX start).
// All samples are kept in memory; percentiles are exact nearest-rank over
// the retained set, never sketched.
//
// Exported formats (see docs/formats.md):
//   samples CSV   one row per sample, fixed column order, blank for unset
//   summary CSV   one row per (class, path) group
//   summary JSON  schema_version 1

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ponsim/common.hpp"

namespace ponsim::metrics {

struct InvalidSample : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LatencySample {
  std::uint16_t alloc_id = 0;
  TcontClass cls = TcontClass::Normal;
  PathKind path = PathKind::Host;
  std::int64_t t_created = 0;
  std::int64_t t_nic_parsed = 0;
  std::optional<std::int64_t> t_intercepted;    // fast path only
  std::optional<std::int64_t> t_host_ingested;  // host path only
  std::int64_t t_merged = 0;        // departing-frame timestamp carrying the grant
  std::int64_t t_grant_at_onu = 0;
  std::int64_t t_tx_start = 0;

  std::int64_t grant_latency_ns() const { return t_grant_at_onu - t_created; }
  std::int64_t service_latency_ns() const { return t_tx_start - t_created; }

  bool operator==(const LatencySample&) const = default;
};

struct DistStats {
  std::uint64_t count = 0;
  double mean = 0;
  std::int64_t p50 = 0, p95 = 0, p99 = 0, max = 0;
};

struct GroupSummary {
  TcontClass cls = TcontClass::Normal;
  PathKind path = PathKind::Host;
  std::uint64_t count = 0;
  DistStats grant;
  DistStats service;
  // Mean per-stage durations for the stages this path crosses.
  std::optional<double> mean_b_to_c_ns, mean_c_to_e_ns;  // fast
  std::optional<double> mean_b_to_d_ns, mean_d_to_e_ns;  // host
};

struct Summary {
  std::uint64_t total = 0;
  std::vector<GroupSummary> groups;  // ordered by (class, path)
  std::uint64_t fast_queue_drops = 0;
};

// Nearest-rank percentile over a sorted ascending vector: the
// ceil(p/100 * n)-th smallest value.
inline std::int64_t nearest_rank(const std::vector<std::int64_t>& sorted, unsigned pct) {
  const std::size_t n = sorted.size();
  std::size_t rank = (n * pct + 99) / 100;
  if (rank < 1) rank = 1;
  return sorted[rank - 1];
}

class MetricsCollector {
 public:
  // Validates monotonicity along the taken path before retaining the sample.
  void record(const LatencySample& s) {
    if (s.t_intercepted.has_value() == s.t_host_ingested.has_value())
      throw InvalidSample("exactly one of t_intercepted/t_host_ingested must be set");
    std::int64_t stage = s.t_created;
    auto step = [&stage](std::int64_t next) {
      if (next < stage) throw InvalidSample("timestamps not nondecreasing along path");
      stage = next;
    };
    step(s.t_nic_parsed);
    step(s.path == PathKind::Fast ? *s.t_intercepted : *s.t_host_ingested);
    step(s.t_merged);
    step(s.t_grant_at_onu);
    step(s.t_tx_start);
    samples_.push_back(s);
  }

  void add_fast_queue_drops(std::uint64_t n) { drops_ += n; }

  const std::vector<LatencySample>& samples() const { return samples_; }
  std::vector<LatencySample> take_samples() { return std::move(samples_); }

  Summary summarize() const {
    Summary out;
    out.total = samples_.size();
    out.fast_queue_drops = drops_;

    std::map<std::pair<int, int>, std::vector<const LatencySample*>> groups;
    for (const auto& s : samples_) groups[{int(s.cls), int(s.path)}].push_back(&s);

    for (const auto& [key, members] : groups) {
      GroupSummary g;
      g.cls = TcontClass(key.first);
      g.path = PathKind(key.second);
      g.count = members.size();
      g.grant = dist_of(members, [](const LatencySample& s) { return s.grant_latency_ns(); });
      g.service = dist_of(members, [](const LatencySample& s) { return s.service_latency_ns(); });
      if (g.path == PathKind::Fast) {
        g.mean_b_to_c_ns = mean_of(members, [](const LatencySample& s) {
          return *s.t_intercepted - s.t_nic_parsed;
        });
        g.mean_c_to_e_ns = mean_of(members, [](const LatencySample& s) {
          return s.t_merged - *s.t_intercepted;
        });
      } else {
        g.mean_b_to_d_ns = mean_of(members, [](const LatencySample& s) {
          return *s.t_host_ingested - s.t_nic_parsed;
        });
        g.mean_d_to_e_ns = mean_of(members, [](const LatencySample& s) {
          return s.t_merged - *s.t_host_ingested;
        });
      }
      out.groups.push_back(g);
    }
    return out;
  }

 private:
  template <typename F>
  static DistStats dist_of(const std::vector<const LatencySample*>& members, F value) {
    DistStats d;
    d.count = members.size();
    if (members.empty()) return d;
    std::vector<std::int64_t> vals;
    vals.reserve(members.size());
    double sum = 0;
    for (const auto* s : members) {
      vals.push_back(value(*s));
      sum += double(vals.back());
    }
    std::sort(vals.begin(), vals.end());
    d.mean = sum / double(vals.size());
    d.p50 = nearest_rank(vals, 50);
    d.p95 = nearest_rank(vals, 95);
    d.p99 = nearest_rank(vals, 99);
    d.max = vals.back();
    return d;
  }

  template <typename F>
  static double mean_of(const std::vector<const LatencySample*>& members, F value) {
    double sum = 0;
    for (const auto* s : members) sum += double(value(*s));
    return members.empty() ? 0.0 : sum / double(members.size());
  }

  std::vector<LatencySample> samples_;
  std::uint64_t drops_ = 0;
};

inline constexpr const char* kSamplesCsvHeader =
    "alloc_id,class,path,t_created_ns,t_nic_parsed_ns,t_intercepted_ns,t_host_ingested_ns,"
    "t_merged_ns,t_grant_at_onu_ns,t_tx_start_ns,grant_latency_ns,service_latency_ns";

inline void export_samples_csv(const std::vector<LatencySample>& samples,
                               const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path);
  f << kSamplesCsvHeader << '\n';
  for (const auto& s : samples) {
    f << s.alloc_id << ',' << to_string(s.cls) << ',' << to_string(s.path) << ','
      << s.t_created << ',' << s.t_nic_parsed << ',';
    if (s.t_intercepted) f << *s.t_intercepted;
    f << ',';
    if (s.t_host_ingested) f << *s.t_host_ingested;
    f << ',' << s.t_merged << ',' << s.t_grant_at_onu << ',' << s.t_tx_start << ','
      << s.grant_latency_ns() << ',' << s.service_latency_ns() << '\n';
  }
  if (!f.good()) throw IoError("write failed: " + path);
}

inline std::vector<LatencySample> load_samples_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line != kSamplesCsvHeader)
    throw IoError("unexpected samples CSV header in " + path);
  std::vector<LatencySample> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    cols.resize(12);
    LatencySample s;
    s.alloc_id = std::uint16_t(std::stoul(cols[0]));
    s.cls = cols[1] == "LowLatency" ? TcontClass::LowLatency : TcontClass::Normal;
    s.path = cols[2] == "Fast" ? PathKind::Fast : PathKind::Host;
    s.t_created = std::stoll(cols[3]);
    s.t_nic_parsed = std::stoll(cols[4]);
    if (!cols[5].empty()) s.t_intercepted = std::stoll(cols[5]);
    if (!cols[6].empty()) s.t_host_ingested = std::stoll(cols[6]);
    s.t_merged = std::stoll(cols[7]);
    s.t_grant_at_onu = std::stoll(cols[8]);
    s.t_tx_start = std::stoll(cols[9]);
    out.push_back(s);
  }
  return out;
}

inline nlohmann::json to_json(const DistStats& d) {
  if (d.count == 0) return nullptr;
  return {{"mean_ns", d.mean}, {"p50_ns", d.p50}, {"p95_ns", d.p95},
          {"p99_ns", d.p99},   {"max_ns", d.max}};
}

inline nlohmann::json to_json(const Summary& s) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : s.groups) {
    nlohmann::json jg{{"class", to_string(g.cls)},
                      {"path", to_string(g.path)},
                      {"count", g.count},
                      {"grant_latency", to_json(g.grant)},
                      {"service_latency", to_json(g.service)}};
    nlohmann::json stages;
    if (g.mean_b_to_c_ns) stages["b_to_c_mean_ns"] = *g.mean_b_to_c_ns;
    if (g.mean_c_to_e_ns) stages["c_to_e_mean_ns"] = *g.mean_c_to_e_ns;
    if (g.mean_b_to_d_ns) stages["b_to_d_mean_ns"] = *g.mean_b_to_d_ns;
    if (g.mean_d_to_e_ns) stages["d_to_e_mean_ns"] = *g.mean_d_to_e_ns;
    jg["stage_means"] = stages;
    groups.push_back(jg);
  }
  return {{"schema_version", 1},
          {"total_samples", s.total},
          {"fast_queue_drops", s.fast_queue_drops},
          {"groups", groups}};
}

inline void export_summary_json(const Summary& s, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path);
  f << to_json(s).dump(2) << '\n';
  if (!f.good()) throw IoError("write failed: " + path);
}

inline constexpr const char* kSummaryCsvHeader =
    "class,path,count,grant_mean_ns,grant_p50_ns,grant_p95_ns,grant_p99_ns,grant_max_ns,"
    "service_mean_ns,service_p50_ns,service_p95_ns,service_p99_ns,service_max_ns";

inline void export_summary_csv(const Summary& s, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path);
  f << kSummaryCsvHeader << '\n';
  for (const auto& g : s.groups) {
    f << to_string(g.cls) << ',' << to_string(g.path) << ',' << g.count << ',' << g.grant.mean
      << ',' << g.grant.p50 << ',' << g.grant.p95 << ',' << g.grant.p99 << ',' << g.grant.max
      << ',' << g.service.mean << ',' << g.service.p50 << ',' << g.service.p95 << ','
      << g.service.p99 << ',' << g.service.max << '\n';
  }
  if (!f.good()) throw IoError("write failed: " + path);
}

}  // namespace ponsim::metrics
