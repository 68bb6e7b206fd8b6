#pragma once

// On-wire codec for the two control frames the simulator exchanges over an
// emulated Ethernet link: downstream frames (HLend + BWMAP) and upstream DBRu
// bursts. All multi-byte fields are big-endian.
//
// Encapsulation header, 19 bytes, shared by both kinds:
//
//   dst mac   src mac   ethertype   kind   seq
//     6B        6B         2B        1B     4B
//
// kind 0 = downstream frame, kind 1 = upstream DBRu burst. seq carries the
// downstream frame_seq and is zero for DBRu bursts.
//
// Downstream body:
//
//   HLend          2B    bwmap_len:11 | pad:5
//   allocation     8B    one record per BWMAP entry, bwmap_len records
//   payload        payload_len zero bytes (user payload is not modelled)
//
// Allocation record:
//
//   alloc_id:14 flags:2   start_time:16   grant_size:16   reserved:16 (zero)
//
// start_time and grant_size are in 4-byte words within the upstream frame.
// Encoded downstream length = 19 + 2 + 8 * bwmap_len + payload_len.
//
// DBRu body (13 bytes):
//
//   alloc_id:16 (top 2 bits zero)   occupancy_words:24   created_at_ns:64

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>

#include "ponsim/common.hpp"

namespace ponsim::wire {

struct CodecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Encode-side input breaks a frame invariant (field width, sortedness, ...).
struct InvariantViolation : CodecError {
  using CodecError::CodecError;
};
struct TruncatedFrame : CodecError {
  using CodecError::CodecError;
};
struct BadEthertype : CodecError {
  using CodecError::CodecError;
};
struct WrongKind : CodecError {
  using CodecError::CodecError;
};
// Decoded BWMAP is unsorted or has overlapping grants.
struct MalformedBwmap : CodecError {
  using CodecError::CodecError;
};

inline constexpr std::uint16_t kDefaultEtherType = 0x88B5;  // IEEE local experimental
inline constexpr std::size_t kEncapHeaderSize = 19;
inline constexpr std::size_t kAllocRecordSize = 8;
inline constexpr std::size_t kHlendSize = 2;
inline constexpr std::size_t kDbruBodySize = 13;

inline constexpr std::uint16_t kMaxAllocId = (1u << 14) - 1;
inline constexpr std::uint16_t kMaxBwmapLen = (1u << 11) - 1;
inline constexpr std::uint32_t kMaxOccupancyWords = (1u << 24) - 1;

// Allocation flags (2-bit field).
inline constexpr std::uint8_t kFlagDbruRequested = 0x1;

enum class FrameKind : std::uint8_t { Downstream = 0, DbruBurst = 1 };

struct MacAddr {
  std::array<std::uint8_t, 6> octets{};
  bool operator==(const MacAddr&) const = default;
};

// One BWMAP entry: the unit the fast path appends and rewrites.
struct AllocationStructure {
  std::uint16_t alloc_id = 0;    // < 2^14
  std::uint8_t flags = 0;        // 2 bits, bit 0 = DBRu solicited
  std::uint16_t start_time = 0;  // words from the start of the upstream frame
  std::uint16_t grant_size = 0;  // words
  bool operator==(const AllocationStructure&) const = default;
};

struct HLend {
  std::uint16_t bwmap_len = 0;  // < 2^11, must equal the record count
  bool operator==(const HLend&) const = default;
};

struct DownstreamFrame {
  std::uint32_t frame_seq = 0;
  HLend hlend{};
  std::vector<AllocationStructure> bwmap;
  std::uint32_t payload_len = 0;
  bool operator==(const DownstreamFrame&) const = default;
};

// Upstream buffer-occupancy report for one Alloc-ID.
struct DbruReport {
  std::uint16_t alloc_id = 0;        // < 2^14
  std::uint32_t occupancy_words = 0; // < 2^24; 0 is a valid keep-alive
  std::int64_t created_at_ns = 0;
  bool operator==(const DbruReport&) const = default;
};

struct WireConfig {
  MacAddr dst{{0xff, 0xff, 0xff, 0xff, 0xff, 0xff}};
  MacAddr src{{0x02, 0x50, 0x4f, 0x4e, 0x00, 0x01}};
  std::uint16_t ethertype = kDefaultEtherType;
};

// Validates the DownstreamFrame invariants shared by encode and decode:
// field widths, hlend consistency, sorted non-overlapping grants.
// Returns a description of the first violation, or nullptr.
inline const char* check_frame(const DownstreamFrame& f) {
  if (f.hlend.bwmap_len != f.bwmap.size()) return "hlend.bwmap_len does not match record count";
  if (f.bwmap.size() > kMaxBwmapLen) return "bwmap_len exceeds 11 bits";
  for (std::size_t i = 0; i < f.bwmap.size(); ++i) {
    const auto& a = f.bwmap[i];
    if (a.alloc_id > kMaxAllocId) return "alloc_id exceeds 14 bits";
    if (a.flags > 0x3) return "flags exceeds 2 bits";
    if (i + 1 < f.bwmap.size()) {
      const auto& b = f.bwmap[i + 1];
      if (std::uint32_t(a.start_time) + a.grant_size > b.start_time)
        return "bwmap unsorted or overlapping";
    }
  }
  return nullptr;
}

inline std::size_t encoded_downstream_size(std::size_t bwmap_len, std::size_t payload_len) {
  return kEncapHeaderSize + kHlendSize + kAllocRecordSize * bwmap_len + payload_len;
}

namespace detail {

inline void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(std::uint8_t(v >> 8));
  out.push_back(std::uint8_t(v));
}
inline void put_u32(Bytes& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(std::uint8_t(v >> s));
}
inline void put_u64(Bytes& out, std::uint64_t v) {
  for (int s = 56; s >= 0; s -= 8) out.push_back(std::uint8_t(v >> s));
}
inline std::uint16_t get_u16(ByteSpan b, std::size_t at) {
  return std::uint16_t(b[at] << 8 | b[at + 1]);
}
inline std::uint32_t get_u32(ByteSpan b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = v << 8 | b[at + i];
  return v;
}
inline std::uint64_t get_u64(ByteSpan b, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = v << 8 | b[at + i];
  return v;
}

inline void put_encap(Bytes& out, const WireConfig& cfg, FrameKind kind, std::uint32_t seq) {
  out.insert(out.end(), cfg.dst.octets.begin(), cfg.dst.octets.end());
  out.insert(out.end(), cfg.src.octets.begin(), cfg.src.octets.end());
  put_u16(out, cfg.ethertype);
  out.push_back(std::uint8_t(kind));
  put_u32(out, seq);
}

// Checks the encap header and returns (kind, seq). Throws on short input or
// ethertype mismatch; kind is validated by the caller.
inline std::pair<std::uint8_t, std::uint32_t> get_encap(ByteSpan b, const WireConfig& cfg) {
  if (b.size() < kEncapHeaderSize) throw TruncatedFrame("frame shorter than encap header");
  if (get_u16(b, 12) != cfg.ethertype) throw BadEthertype("unexpected ethertype");
  return {b[14], get_u32(b, 15)};
}

}  // namespace detail

inline Bytes encode_downstream(const DownstreamFrame& f, const WireConfig& cfg = {}) {
  if (const char* why = check_frame(f)) throw InvariantViolation(why);
  Bytes out;
  out.reserve(encoded_downstream_size(f.bwmap.size(), f.payload_len));
  detail::put_encap(out, cfg, FrameKind::Downstream, f.frame_seq);
  detail::put_u16(out, std::uint16_t(f.hlend.bwmap_len << 5));
  for (const auto& a : f.bwmap) {
    detail::put_u16(out, std::uint16_t(a.alloc_id << 2 | a.flags));
    detail::put_u16(out, a.start_time);
    detail::put_u16(out, a.grant_size);
    detail::put_u16(out, 0);
  }
  out.resize(out.size() + f.payload_len, 0);
  return out;
}

inline DownstreamFrame decode_downstream(ByteSpan bytes, const WireConfig& cfg = {}) {
  auto [kind, seq] = detail::get_encap(bytes, cfg);
  if (kind != std::uint8_t(FrameKind::Downstream)) throw WrongKind("not a downstream frame");
  if (bytes.size() < kEncapHeaderSize + kHlendSize) throw TruncatedFrame("missing HLend");
  DownstreamFrame f;
  f.frame_seq = seq;
  f.hlend.bwmap_len = std::uint16_t(detail::get_u16(bytes, kEncapHeaderSize) >> 5);
  std::size_t at = kEncapHeaderSize + kHlendSize;
  if (bytes.size() < at + kAllocRecordSize * f.hlend.bwmap_len)
    throw TruncatedFrame("bwmap_len exceeds remaining bytes");
  f.bwmap.reserve(f.hlend.bwmap_len);
  for (std::uint16_t i = 0; i < f.hlend.bwmap_len; ++i, at += kAllocRecordSize) {
    const std::uint16_t w0 = detail::get_u16(bytes, at);
    f.bwmap.push_back({std::uint16_t(w0 >> 2), std::uint8_t(w0 & 0x3),
                       detail::get_u16(bytes, at + 2), detail::get_u16(bytes, at + 4)});
  }
  f.payload_len = std::uint32_t(bytes.size() - at);
  if (const char* why = check_frame(f)) throw MalformedBwmap(why);
  return f;
}

inline Bytes encode_dbru(const DbruReport& r, const WireConfig& cfg = {}) {
  if (r.alloc_id > kMaxAllocId) throw InvariantViolation("alloc_id exceeds 14 bits");
  if (r.occupancy_words > kMaxOccupancyWords) throw InvariantViolation("occupancy exceeds 24 bits");
  Bytes out;
  out.reserve(kEncapHeaderSize + kDbruBodySize);
  detail::put_encap(out, cfg, FrameKind::DbruBurst, 0);
  detail::put_u16(out, r.alloc_id);
  out.push_back(std::uint8_t(r.occupancy_words >> 16));
  out.push_back(std::uint8_t(r.occupancy_words >> 8));
  out.push_back(std::uint8_t(r.occupancy_words));
  detail::put_u64(out, std::uint64_t(r.created_at_ns));
  return out;
}

inline DbruReport decode_dbru(ByteSpan bytes, const WireConfig& cfg = {}) {
  auto [kind, seq] = detail::get_encap(bytes, cfg);
  (void)seq;
  if (kind != std::uint8_t(FrameKind::DbruBurst)) throw WrongKind("not a DBRu burst");
  if (bytes.size() != kEncapHeaderSize + kDbruBodySize) throw TruncatedFrame("DBRu length mismatch");
  DbruReport r;
  r.alloc_id = detail::get_u16(bytes, kEncapHeaderSize);
  if (r.alloc_id > kMaxAllocId) throw InvariantViolation("alloc_id exceeds 14 bits");
  r.occupancy_words = std::uint32_t(bytes[21]) << 16 | std::uint32_t(bytes[22]) << 8 | bytes[23];
  r.created_at_ns = std::int64_t(detail::get_u64(bytes, 24));
  return r;
}

}  // namespace ponsim::wire
