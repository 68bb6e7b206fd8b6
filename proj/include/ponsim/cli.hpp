#pragma once

// Command-line surface:
//
//   ponsim run <config> [--set k=v ...] [--pcap path] [--seed N] [--duration-ns N]
//   ponsim compare <config> [--set k=v ...] [--pcap path] [--seed N] [--duration-ns N]
//
// run executes the configured scenario and writes the outputs named in the
// config; compare executes Standard, FastIntercept and FixedAllocation on
// the identical seed and traffic and reports per-class latency deltas.
// Exit codes: 0 success, 1 I/O failure, 2 configuration error (the message
// names the offending field). Printed tables are rendered from the exported
// JSON documents, not recomputed.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ponsim/metrics.hpp"
#include "ponsim/scenario.hpp"
#include "ponsim/sim.hpp"

namespace ponsim::cli {

namespace detail {

inline void ensure_parent_dir(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(parent, ec);
  }
}

inline void write_text(const std::string& path, const std::string& text) {
  ensure_parent_dir(path);
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path);
  f << text;
  if (!f.good()) throw IoError("write failed: " + path);
}

inline void print_summary_table(const nlohmann::json& summary, std::ostream& out) {
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %-5s %9s %12s %12s %12s %12s %12s",
                "class", "path", "count", "grant mean", "p50", "p95", "p99", "max (us)");
  out << line << '\n';
  for (const auto& g : summary.at("groups")) {
    const auto& gl = g.at("grant_latency");
    if (gl.is_null()) continue;
    std::snprintf(line, sizeof line, "%-12s %-5s %9llu %12.1f %12.1f %12.1f %12.1f %12.1f",
                  g.at("class").get<std::string>().c_str(),
                  g.at("path").get<std::string>().c_str(),
                  (unsigned long long)g.at("count").get<std::uint64_t>(),
                  gl.at("mean_ns").get<double>() / 1e3, gl.at("p50_ns").get<double>() / 1e3,
                  gl.at("p95_ns").get<double>() / 1e3, gl.at("p99_ns").get<double>() / 1e3,
                  gl.at("max_ns").get<double>() / 1e3);
    out << line << '\n';
  }
  out << "samples: " << summary.at("total_samples").get<std::uint64_t>()
      << "  fast-queue drops: " << summary.at("fast_queue_drops").get<std::uint64_t>() << '\n';
}

inline void print_comparison_table(const nlohmann::json& cmp, std::ostream& out) {
  out << "mean grant latency (us) per class and mode\n";
  char line[160];
  std::snprintf(line, sizeof line, "%-12s", "class");
  out << line;
  const auto& runs = cmp.at("runs");
  for (const auto& r : runs) {
    std::snprintf(line, sizeof line, " %16s", r.at("mode").get<std::string>().c_str());
    out << line;
  }
  out << '\n';
  for (const auto& d : cmp.at("deltas")) {
    std::snprintf(line, sizeof line, "%-12s", d.at("class").get<std::string>().c_str());
    out << line;
    for (const auto& r : runs) {
      const auto& by_mode = d.at("grant_mean_ns");
      const std::string mode = r.at("mode").get<std::string>();
      std::snprintf(line, sizeof line, " %16.1f", by_mode.at(mode).get<double>() / 1e3);
      out << line;
    }
    if (d.contains("standard_minus_fastintercept_ns"))
      out << "   (Standard - FastIntercept: "
          << d.at("standard_minus_fastintercept_ns").get<double>() / 1e3 << " us)";
    out << '\n';
  }
}

inline std::string pcap_path_for_mode(const std::string& base, SchedulingMode mode) {
  const std::filesystem::path p(base);
  std::filesystem::path out = p.parent_path() / p.stem();
  out += std::string("_") + to_string(mode);
  out += p.extension();
  return out.string();
}

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string pcap_path;
  std::int64_t seed = -1;
  std::int64_t duration_ns = -1;

  ConfigFile load() const {
    nlohmann::json doc = load_json_file(config_path);
    std::vector<std::string> all = overrides;
    if (seed >= 0) all.push_back("seed=" + std::to_string(seed));
    if (duration_ns >= 0) all.push_back("duration_ns=" + std::to_string(duration_ns));
    apply_overrides(doc, all);
    return parse_config(doc);
  }
};

inline void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("config", args.config_path, "scenario config (JSON)")->required();
  cmd->add_option("--set", args.overrides, "override a config field, dotted.path=value");
  cmd->add_option("--pcap", args.pcap_path, "write a packet capture to this path");
  cmd->add_option("--seed", args.seed, "override the scenario seed");
  cmd->add_option("--duration-ns", args.duration_ns, "override the simulated duration");
}

inline int cmd_run(const CommonArgs& args, std::ostream& out) {
  const ConfigFile cf = args.load();

  sim::RunOptions opts;
  wire::PcapWriter pcap;
  std::string pcap_path = args.pcap_path;
  if (pcap_path.empty() && cf.output.pcap_path) pcap_path = *cf.output.pcap_path;
  if (!pcap_path.empty()) {
    ensure_parent_dir(pcap_path);
    pcap.open(pcap_path);
    opts.pcap = &pcap;
  }

  const sim::SimReport report = sim::run(cf.scenario, opts);
  const nlohmann::json doc = sim::report_to_json(cf.scenario, report);

  if (cf.output.json_path) write_text(*cf.output.json_path, doc.dump(2) + "\n");
  if (cf.output.csv_path) {
    ensure_parent_dir(*cf.output.csv_path);
    metrics::export_summary_csv(report.summary, *cf.output.csv_path);
  }
  if (cf.output.samples_path) {
    ensure_parent_dir(*cf.output.samples_path);
    metrics::export_samples_csv(report.samples, *cf.output.samples_path);
  }

  out << "mode " << to_string(cf.scenario.mode) << ", frames "
      << doc.at("frames_emitted").get<std::uint64_t>() << ", trace "
      << doc.at("trace_hash").get<std::string>() << '\n';
  print_summary_table(doc.at("summary"), out);
  return 0;
}

inline int cmd_compare(const CommonArgs& args, std::ostream& out) {
  const ConfigFile cf = args.load();

  std::vector<Scenario> scenarios;
  for (SchedulingMode mode : {SchedulingMode::Standard, SchedulingMode::FastIntercept,
                              SchedulingMode::FixedAllocation}) {
    Scenario sc = cf.scenario;
    sc.mode = mode;
    scenarios.push_back(std::move(sc));
  }

  sim::ComparisonReport cmp;
  if (!args.pcap_path.empty()) {
    for (const auto& sc : scenarios) {
      wire::PcapWriter pcap;
      const std::string path = pcap_path_for_mode(args.pcap_path, sc.mode);
      ensure_parent_dir(path);
      pcap.open(path);
      sim::RunOptions opts;
      opts.pcap = &pcap;
      cmp.runs.push_back({sc.mode, sim::run(sc, opts)});
    }
  } else {
    cmp = sim::compare(scenarios);
  }

  const nlohmann::json doc = sim::comparison_to_json(scenarios, cmp);
  if (cf.output.json_path) write_text(*cf.output.json_path, doc.dump(2) + "\n");
  print_comparison_table(doc, out);
  return 0;
}

}  // namespace detail

inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"virtual PON DBA simulator with a dataplane fast-intercept path", "ponsim"};
  app.require_subcommand(1);

  detail::CommonArgs run_args, cmp_args;
  CLI::App* run_cmd = app.add_subcommand("run", "run one scenario and write its outputs");
  detail::add_common(run_cmd, run_args);
  CLI::App* cmp_cmd =
      app.add_subcommand("compare", "run Standard, FastIntercept and FixedAllocation");
  detail::add_common(cmp_cmd, cmp_args);

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return 0;
    }
    err << e.what() << '\n';
    return 2;
  }

  try {
    if (run_cmd->parsed()) return detail::cmd_run(run_args, out);
    return detail::cmd_compare(cmp_args, out);
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    err << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace ponsim::cli
