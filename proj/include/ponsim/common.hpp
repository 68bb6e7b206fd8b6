#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ponsim {

using Bytes = std::vector<std::uint8_t>;
using ByteSpan = std::span<const std::uint8_t>;

// Upstream accounting unit: one word = 4 bytes (XG-PON convention). A 16-bit
// start_time therefore covers a full 125 us frame at 10G.
inline constexpr unsigned kWordBytes = 4;

enum class TcontClass : std::uint8_t { Normal = 0, LowLatency = 1 };

constexpr const char* to_string(TcontClass c) {
  return c == TcontClass::Normal ? "Normal" : "LowLatency";
}

enum class PathKind : std::uint8_t { Fast = 0, Host = 1 };

constexpr const char* to_string(PathKind p) {
  return p == PathKind::Fast ? "Fast" : "Host";
}

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ponsim
