#pragma once

// DBRu request streams, one generator per T-CONT, emulating the demo's two
// traffic-generator processes. Arrivals: Poisson (exponential gaps), CBR
// (exact interval), or OnOff (CBR gated by a deterministic on/off cycle).
// Request sizes: fixed or uniform words.
//
// RNG is splitmix64 (Steele et al.), a splittable 64-bit generator with a
// published algorithm, so any run is reproducible from (seed, alloc_id)
// alone. Per-T-CONT substreams mix the scenario seed with the alloc-id.
// Uniform sizes map by modulo; u01 maps the top 53 bits into (0, 1].

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace ponsim::traffic {

inline constexpr const char* kRngAlgorithm = "splitmix64";

struct SplitMix64 {
  std::uint64_t state = 0;

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // (0, 1]
  double u01() { return double((next() >> 11) + 1) * 0x1.0p-53; }
};

inline std::uint64_t mix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t substream_seed(std::uint64_t scenario_seed, std::uint16_t alloc_id) {
  return mix64(scenario_seed ^ mix64((std::uint64_t(alloc_id) + 1) * 0x9E3779B97F4A7C15ull));
}

enum class ArrivalKind : std::uint8_t { Poisson = 0, Cbr = 1, OnOff = 2 };
enum class SizeKind : std::uint8_t { Fixed = 0, UniformInt = 1 };

struct ArrivalProcess {
  ArrivalKind kind = ArrivalKind::Cbr;
  double rate_per_s = 0;        // Poisson
  std::int64_t interval_ns = 0; // Cbr, OnOff emission spacing
  std::int64_t on_ns = 0;       // OnOff
  std::int64_t off_ns = 0;      // OnOff

  SizeKind size_kind = SizeKind::Fixed;
  std::uint32_t words = 0;      // Fixed
  std::uint32_t lo = 0, hi = 0; // UniformInt, inclusive

  std::uint64_t seed = 0;
};

struct TrafficEvent {
  std::int64_t at_ns = 0;
  std::uint32_t words = 0;
};

// Pull-based generator: next() returns the following arrival, strictly
// increasing in time, deterministic from the process seed.
class ArrivalGenerator {
 public:
  explicit ArrivalGenerator(const ArrivalProcess& proc) : proc_(proc), rng_{proc.seed} {
    switch (proc.kind) {
      case ArrivalKind::Poisson:
        if (!(proc.rate_per_s > 0)) throw std::invalid_argument("rate_per_s must be positive");
        break;
      case ArrivalKind::Cbr:
        if (proc.interval_ns <= 0) throw std::invalid_argument("interval_ns must be positive");
        break;
      case ArrivalKind::OnOff:
        if (proc.interval_ns <= 0) throw std::invalid_argument("interval_ns must be positive");
        if (proc.on_ns <= 0 || proc.off_ns < 0) throw std::invalid_argument("bad on/off durations");
        if (proc.interval_ns > proc.on_ns)
          throw std::invalid_argument("interval_ns must not exceed on_ns");
        break;
    }
    if (proc.size_kind == SizeKind::UniformInt && proc.lo > proc.hi)
      throw std::invalid_argument("lo > hi");
  }

  TrafficEvent next() {
    switch (proc_.kind) {
      case ArrivalKind::Poisson: {
        const double gap_s = -std::log(rng_.u01()) / proc_.rate_per_s;
        std::int64_t gap = std::int64_t(std::llround(gap_s * 1e9));
        if (gap < 1) gap = 1;
        t_ += gap;
        break;
      }
      case ArrivalKind::Cbr:
        t_ += proc_.interval_ns;
        break;
      case ArrivalKind::OnOff: {
        const std::int64_t cycle = proc_.on_ns + proc_.off_ns;
        do {
          t_ += proc_.interval_ns;
        } while (t_ % cycle >= proc_.on_ns);
        break;
      }
    }
    return {t_, draw_size()};
  }

 private:
  std::uint32_t draw_size() {
    if (proc_.size_kind == SizeKind::Fixed) return proc_.words;
    return proc_.lo + std::uint32_t(rng_.next() % (std::uint64_t(proc_.hi) - proc_.lo + 1));
  }

  ArrivalProcess proc_;
  SplitMix64 rng_;
  std::int64_t t_ = 0;
};

}  // namespace ponsim::traffic
