#pragma once

// Scenario description and its JSON config-file form. Parsing is strict:
// unknown keys are rejected and every validation error names the offending
// field path, which the CLI surfaces verbatim (exit code 2).

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ponsim/common.hpp"
#include "ponsim/traffic.hpp"
#include "ponsim/vdba.hpp"

namespace ponsim {

struct ConfigError : std::runtime_error {
  std::string field;
  ConfigError(std::string field_path, const std::string& what)
      : std::runtime_error("config error at " + field_path + ": " + what),
        field(std::move(field_path)) {}
};

enum class SchedulingMode : std::uint8_t { Standard = 0, FastIntercept = 1, FixedAllocation = 2 };

constexpr const char* to_string(SchedulingMode m) {
  switch (m) {
    case SchedulingMode::Standard: return "Standard";
    case SchedulingMode::FastIntercept: return "FastIntercept";
    default: return "FixedAllocation";
  }
}

// Per-stage delays of the A-F pipeline, all nanoseconds.
struct StageDelays {
  std::int64_t prop_delay_ns = 25000;       // OLT <-> ONU fibre, ~5 km
  std::int64_t nic_parse_ns = 2000;         // stage B
  std::int64_t fast_merge_ns = 1000;        // stage E, fast part
  std::int64_t nic_to_host_ns = 20000;      // path D, NIC -> host
  std::int64_t host_to_nic_ns = 20000;      // path D, host -> NIC
  std::int64_t host_dba_compute_ns = 30000; // stage D compute
  std::int64_t onu_grant_apply_ns = 0;
};

struct TrafficSpec {
  std::uint16_t alloc_id = 0;
  traffic::ArrivalProcess process;
  bool seed_overridden = false;
};

struct Scenario {
  std::int64_t frame_period_ns = 125000;
  double line_rate_bps = 9.95328e9;
  std::uint32_t upstream_capacity_words = 0;  // 0 = derive from line rate
  SchedulingMode mode = SchedulingMode::Standard;
  dba::ReservePolicy reserve = dba::ReservePolicy::fixed(0.1, 0, 0xFFFF);
  dba::TcontRegistry registry;
  std::vector<TrafficSpec> traffic;  // ascending alloc_id
  StageDelays delays;
  std::int64_t duration_ns = 0;
  std::uint64_t seed = 1;
  std::uint32_t fast_queue_capacity = 1024;

  std::uint32_t capacity_words() const {
    if (upstream_capacity_words != 0) return upstream_capacity_words;
    const std::uint64_t bps = std::uint64_t(line_rate_bps + 0.5);
    return std::uint32_t(bps * std::uint64_t(frame_period_ns) / 8 / kWordBytes / 1'000'000'000);
  }
};

struct OutputOptions {
  std::optional<std::string> csv_path;      // summary CSV
  std::optional<std::string> json_path;     // summary JSON
  std::optional<std::string> samples_path;  // per-sample CSV
  std::optional<std::string> pcap_path;
};

struct ConfigFile {
  Scenario scenario;
  OutputOptions output;
};

namespace cfg_detail {

using nlohmann::json;

inline void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
}

inline void check_keys(const json& obj, const std::string& path,
                       std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError(path + "." + it.key(), "unknown key");
  }
}

inline std::int64_t get_int(const json& obj, const std::string& path, const char* key,
                            std::optional<std::int64_t> def = std::nullopt) {
  if (!obj.contains(key)) {
    if (def) return *def;
    throw ConfigError(path + "." + key, "missing required field");
  }
  const json& v = obj.at(key);
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw ConfigError(path + "." + key, "expected an integer");
  return v.get<std::int64_t>();
}

inline double get_num(const json& obj, const std::string& path, const char* key,
                      std::optional<double> def = std::nullopt) {
  if (!obj.contains(key)) {
    if (def) return *def;
    throw ConfigError(path + "." + key, "missing required field");
  }
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(path + "." + key, "expected a number");
  return v.get<double>();
}

inline std::string get_str(const json& obj, const std::string& path, const char* key,
                           std::optional<std::string> def = std::nullopt) {
  if (!obj.contains(key)) {
    if (def) return *def;
    throw ConfigError(path + "." + key, "missing required field");
  }
  const json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(path + "." + key, "expected a string");
  return v.get<std::string>();
}

inline std::int64_t require_nonneg(std::int64_t v, const std::string& field) {
  if (v < 0) throw ConfigError(field, "must be >= 0");
  return v;
}

inline traffic::ArrivalProcess parse_process(const json& jt, const std::string& path,
                                             bool& seed_overridden) {
  traffic::ArrivalProcess p;

  require_object(jt.contains("arrival") ? jt.at("arrival") : json(), path + ".arrival");
  const json& ja = jt.at("arrival");
  const std::string akind = get_str(ja, path + ".arrival", "kind");
  if (akind == "Poisson") {
    check_keys(ja, path + ".arrival", {"kind", "rate_per_s"});
    p.kind = traffic::ArrivalKind::Poisson;
    p.rate_per_s = get_num(ja, path + ".arrival", "rate_per_s");
    if (!(p.rate_per_s > 0)) throw ConfigError(path + ".arrival.rate_per_s", "must be > 0");
  } else if (akind == "CBR") {
    check_keys(ja, path + ".arrival", {"kind", "interval_ns"});
    p.kind = traffic::ArrivalKind::Cbr;
    p.interval_ns = get_int(ja, path + ".arrival", "interval_ns");
    if (p.interval_ns <= 0) throw ConfigError(path + ".arrival.interval_ns", "must be > 0");
  } else if (akind == "OnOff") {
    check_keys(ja, path + ".arrival", {"kind", "on_ns", "off_ns", "interval_ns"});
    p.kind = traffic::ArrivalKind::OnOff;
    p.on_ns = get_int(ja, path + ".arrival", "on_ns");
    p.off_ns = get_int(ja, path + ".arrival", "off_ns");
    p.interval_ns = get_int(ja, path + ".arrival", "interval_ns");
    if (p.on_ns <= 0) throw ConfigError(path + ".arrival.on_ns", "must be > 0");
    if (p.off_ns < 0) throw ConfigError(path + ".arrival.off_ns", "must be >= 0");
    if (p.interval_ns <= 0 || p.interval_ns > p.on_ns)
      throw ConfigError(path + ".arrival.interval_ns", "must be in (0, on_ns]");
  } else {
    throw ConfigError(path + ".arrival.kind", "expected Poisson | CBR | OnOff");
  }

  require_object(jt.contains("size") ? jt.at("size") : json(), path + ".size");
  const json& js = jt.at("size");
  const std::string skind = get_str(js, path + ".size", "kind");
  if (skind == "Fixed") {
    check_keys(js, path + ".size", {"kind", "words"});
    p.size_kind = traffic::SizeKind::Fixed;
    p.words = std::uint32_t(require_nonneg(get_int(js, path + ".size", "words"), path + ".size.words"));
  } else if (skind == "UniformInt") {
    check_keys(js, path + ".size", {"kind", "lo", "hi"});
    p.size_kind = traffic::SizeKind::UniformInt;
    p.lo = std::uint32_t(require_nonneg(get_int(js, path + ".size", "lo"), path + ".size.lo"));
    p.hi = std::uint32_t(require_nonneg(get_int(js, path + ".size", "hi"), path + ".size.hi"));
    if (p.lo > p.hi) throw ConfigError(path + ".size.lo", "lo must be <= hi");
  } else {
    throw ConfigError(path + ".size.kind", "expected Fixed | UniformInt");
  }

  seed_overridden = jt.contains("seed");
  if (seed_overridden) p.seed = std::uint64_t(get_int(jt, path, "seed"));
  return p;
}

}  // namespace cfg_detail

inline ConfigFile parse_config(const nlohmann::json& doc) {
  using namespace cfg_detail;
  require_object(doc, "<root>");
  check_keys(doc, "<root>",
             {"frame_period_ns", "line_rate_bps", "upstream_capacity_words", "mode", "reserve",
              "tconts", "traffic", "delays", "duration_ns", "seed", "fast_queue_capacity",
              "output"});

  ConfigFile cf;
  Scenario& sc = cf.scenario;

  sc.frame_period_ns = get_int(doc, "<root>", "frame_period_ns", 125000);
  if (sc.frame_period_ns < 1000 || sc.frame_period_ns > 10'000'000)
    throw ConfigError("frame_period_ns", "must be in [1000, 10000000]");
  sc.line_rate_bps = get_num(doc, "<root>", "line_rate_bps", 9.95328e9);
  if (!(sc.line_rate_bps > 0)) throw ConfigError("line_rate_bps", "must be > 0");
  sc.upstream_capacity_words =
      std::uint32_t(require_nonneg(get_int(doc, "<root>", "upstream_capacity_words", 0),
                                   "upstream_capacity_words"));

  const std::string mode = get_str(doc, "<root>", "mode");
  if (mode == "Standard") sc.mode = SchedulingMode::Standard;
  else if (mode == "FastIntercept") sc.mode = SchedulingMode::FastIntercept;
  else if (mode == "FixedAllocation") sc.mode = SchedulingMode::FixedAllocation;
  else throw ConfigError("mode", "expected Standard | FastIntercept | FixedAllocation");

  const std::uint32_t capacity = sc.capacity_words();
  if (capacity == 0 || capacity > 0xFFFF)
    throw ConfigError("upstream_capacity_words",
                      "capacity " + std::to_string(capacity) + " not in [1, 65535]");

  if (doc.contains("reserve")) {
    const nlohmann::json& jr = doc.at("reserve");
    require_object(jr, "reserve");
    check_keys(jr, "reserve", {"mode", "fixed_fraction", "ewma_alpha", "min_words", "max_words"});
    const std::string rmode = get_str(jr, "reserve", "mode");
    const auto min_w = std::uint32_t(require_nonneg(get_int(jr, "reserve", "min_words", 0),
                                                    "reserve.min_words"));
    const auto max_w = std::uint32_t(require_nonneg(
        get_int(jr, "reserve", "max_words", std::int64_t(capacity)), "reserve.max_words"));
    if (min_w > max_w) throw ConfigError("reserve.min_words", "must be <= max_words");
    if (max_w > capacity) throw ConfigError("reserve.max_words", "must be <= upstream capacity");
    if (rmode == "Fixed") {
      const double frac = get_num(jr, "reserve", "fixed_fraction");
      if (frac < 0 || frac >= 1) throw ConfigError("reserve.fixed_fraction", "must be in [0, 1)");
      sc.reserve = dba::ReservePolicy::fixed(frac, min_w, max_w);
    } else if (rmode == "Adaptive") {
      const double alpha = get_num(jr, "reserve", "ewma_alpha");
      if (alpha <= 0 || alpha > 1) throw ConfigError("reserve.ewma_alpha", "must be in (0, 1]");
      sc.reserve = dba::ReservePolicy::adaptive(alpha, min_w, max_w);
    } else {
      throw ConfigError("reserve.mode", "expected Fixed | Adaptive");
    }
  } else {
    sc.reserve = dba::ReservePolicy::fixed(0.1, 0, capacity);
  }

  if (!doc.contains("tconts") || !doc.at("tconts").is_array() || doc.at("tconts").empty())
    throw ConfigError("tconts", "must be a non-empty array");
  {
    std::size_t i = 0;
    for (const auto& jt : doc.at("tconts")) {
      const std::string path = "tconts[" + std::to_string(i++) + "]";
      require_object(jt, path);
      check_keys(jt, path, {"alloc_id", "class", "onu_id", "weight"});
      const std::int64_t id = get_int(jt, path, "alloc_id");
      if (id < 0 || id > wire::kMaxAllocId)
        throw ConfigError(path + ".alloc_id", "must be in [0, 16383]");
      dba::TcontSpec spec;
      const std::string cls = get_str(jt, path, "class");
      if (cls == "Normal") spec.cls = TcontClass::Normal;
      else if (cls == "LowLatency") spec.cls = TcontClass::LowLatency;
      else throw ConfigError(path + ".class", "expected Normal | LowLatency");
      spec.onu_id = std::uint32_t(require_nonneg(get_int(jt, path, "onu_id", 0), path + ".onu_id"));
      const std::int64_t w = get_int(jt, path, "weight", 1);
      if (w < 1) throw ConfigError(path + ".weight", "must be >= 1");
      spec.weight = std::uint32_t(w);
      try {
        sc.registry.add(std::uint16_t(id), spec);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(path + ".alloc_id", e.what());
      }
    }
  }

  if (doc.contains("traffic")) {
    if (!doc.at("traffic").is_array()) throw ConfigError("traffic", "must be an array");
    std::size_t i = 0;
    for (const auto& jt : doc.at("traffic")) {
      const std::string path = "traffic[" + std::to_string(i++) + "]";
      require_object(jt, path);
      check_keys(jt, path, {"alloc_id", "arrival", "size", "seed"});
      TrafficSpec ts;
      const std::int64_t id = get_int(jt, path, "alloc_id");
      if (id < 0 || id > wire::kMaxAllocId || !sc.registry.find(std::uint16_t(id)))
        throw ConfigError(path + ".alloc_id", "not a registered T-CONT");
      ts.alloc_id = std::uint16_t(id);
      for (const auto& other : sc.traffic)
        if (other.alloc_id == ts.alloc_id)
          throw ConfigError(path + ".alloc_id", "duplicate traffic entry");
      ts.process = parse_process(jt, path, ts.seed_overridden);
      sc.traffic.push_back(ts);
    }
  }

  if (doc.contains("delays")) {
    const nlohmann::json& jd = doc.at("delays");
    require_object(jd, "delays");
    check_keys(jd, "delays",
               {"prop_delay_ns", "nic_parse_ns", "fast_merge_ns", "nic_to_host_ns",
                "host_to_nic_ns", "host_dba_compute_ns", "onu_grant_apply_ns"});
    StageDelays& d = sc.delays;
    auto field = [&](const char* key, std::int64_t def) {
      return require_nonneg(get_int(jd, "delays", key, def), std::string("delays.") + key);
    };
    d.prop_delay_ns = field("prop_delay_ns", d.prop_delay_ns);
    d.nic_parse_ns = field("nic_parse_ns", d.nic_parse_ns);
    d.fast_merge_ns = field("fast_merge_ns", d.fast_merge_ns);
    d.nic_to_host_ns = field("nic_to_host_ns", d.nic_to_host_ns);
    d.host_to_nic_ns = field("host_to_nic_ns", d.host_to_nic_ns);
    d.host_dba_compute_ns = field("host_dba_compute_ns", d.host_dba_compute_ns);
    d.onu_grant_apply_ns = field("onu_grant_apply_ns", d.onu_grant_apply_ns);
  }

  sc.duration_ns = get_int(doc, "<root>", "duration_ns");
  if (sc.duration_ns < 10 * sc.frame_period_ns)
    throw ConfigError("duration_ns", "must cover at least 10 frame periods");

  sc.seed = std::uint64_t(get_int(doc, "<root>", "seed", 1));
  const std::int64_t qcap = get_int(doc, "<root>", "fast_queue_capacity", 1024);
  if (qcap < 1) throw ConfigError("fast_queue_capacity", "must be >= 1");
  sc.fast_queue_capacity = std::uint32_t(qcap);

  // Seed the per-T-CONT substreams now so generators are self-contained.
  for (auto& ts : sc.traffic)
    if (!ts.seed_overridden) ts.process.seed = traffic::substream_seed(sc.seed, ts.alloc_id);

  if (doc.contains("output")) {
    const nlohmann::json& jo = doc.at("output");
    require_object(jo, "output");
    check_keys(jo, "output", {"csv_path", "json_path", "samples_path", "pcap_path"});
    auto opt = [&](const char* key) -> std::optional<std::string> {
      if (!jo.contains(key)) return std::nullopt;
      return get_str(jo, "output", key);
    };
    cf.output.csv_path = opt("csv_path");
    cf.output.json_path = opt("json_path");
    cf.output.samples_path = opt("samples_path");
    cf.output.pcap_path = opt("pcap_path");
  }

  return cf;
}

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("<config>", "cannot open " + path);
  nlohmann::json doc = nlohmann::json::parse(f, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("<config>", "invalid JSON in " + path);
  return doc;
}

// Applies "dotted.path=value" overrides onto the raw JSON document. Values
// parse as JSON when possible and fall back to strings (mode=Standard).
inline void apply_overrides(nlohmann::json& doc, const std::vector<std::string>& overrides) {
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("--set", "expected key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    const std::string raw = kv.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    nlohmann::json* at = &doc;
    std::size_t pos = 0;
    while (true) {
      const auto dot = key.find('.', pos);
      const std::string part = key.substr(pos, dot == std::string::npos ? dot : dot - pos);
      if (part.empty()) throw ConfigError("--set", "bad key path '" + key + "'");
      if (dot == std::string::npos) {
        (*at)[part] = value;
        break;
      }
      at = &(*at)[part];
      if (!at->is_object() && !at->is_null())
        throw ConfigError(key, "cannot descend into non-object");
      pos = dot + 1;
    }
  }
}

// Canonical JSON form of a scenario, used to validate that compared
// scenarios differ only in mode and to echo effective settings.
inline nlohmann::json scenario_to_json(const Scenario& sc) {
  nlohmann::json tconts = nlohmann::json::array();
  for (const auto& [id, spec] : sc.registry.entries())
    tconts.push_back({{"alloc_id", id},
                      {"class", to_string(spec.cls)},
                      {"onu_id", spec.onu_id},
                      {"weight", spec.weight}});

  nlohmann::json traffic = nlohmann::json::array();
  for (const auto& ts : sc.traffic) {
    nlohmann::json arrival;
    switch (ts.process.kind) {
      case traffic::ArrivalKind::Poisson:
        arrival = {{"kind", "Poisson"}, {"rate_per_s", ts.process.rate_per_s}};
        break;
      case traffic::ArrivalKind::Cbr:
        arrival = {{"kind", "CBR"}, {"interval_ns", ts.process.interval_ns}};
        break;
      case traffic::ArrivalKind::OnOff:
        arrival = {{"kind", "OnOff"},
                   {"on_ns", ts.process.on_ns},
                   {"off_ns", ts.process.off_ns},
                   {"interval_ns", ts.process.interval_ns}};
        break;
    }
    nlohmann::json size =
        ts.process.size_kind == traffic::SizeKind::Fixed
            ? nlohmann::json{{"kind", "Fixed"}, {"words", ts.process.words}}
            : nlohmann::json{{"kind", "UniformInt"}, {"lo", ts.process.lo}, {"hi", ts.process.hi}};
    traffic.push_back({{"alloc_id", ts.alloc_id},
                       {"arrival", arrival},
                       {"size", size},
                       {"seed", ts.process.seed}});
  }

  nlohmann::json reserve{{"mode", sc.reserve.mode == dba::ReserveMode::Fixed ? "Fixed" : "Adaptive"},
                         {"fixed_fraction_ppm", sc.reserve.fixed_fraction_ppm},
                         {"ewma_alpha_q16", sc.reserve.ewma_alpha_q16},
                         {"min_words", sc.reserve.min_words},
                         {"max_words", sc.reserve.max_words}};

  return {{"frame_period_ns", sc.frame_period_ns},
          {"line_rate_bps", sc.line_rate_bps},
          {"upstream_capacity_words", sc.capacity_words()},
          {"mode", to_string(sc.mode)},
          {"reserve", reserve},
          {"tconts", tconts},
          {"traffic", traffic},
          {"delays",
           {{"prop_delay_ns", sc.delays.prop_delay_ns},
            {"nic_parse_ns", sc.delays.nic_parse_ns},
            {"fast_merge_ns", sc.delays.fast_merge_ns},
            {"nic_to_host_ns", sc.delays.nic_to_host_ns},
            {"host_to_nic_ns", sc.delays.host_to_nic_ns},
            {"host_dba_compute_ns", sc.delays.host_dba_compute_ns},
            {"onu_grant_apply_ns", sc.delays.onu_grant_apply_ns}}},
          {"duration_ns", sc.duration_ns},
          {"seed", sc.seed},
          {"fast_queue_capacity", sc.fast_queue_capacity},
          {"rng", traffic::kRngAlgorithm}};
}

}  // namespace ponsim
