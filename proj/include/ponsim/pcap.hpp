#pragma once

// Minimal PCAP trace sink, nanosecond-timestamp variant (magic 0xA1B23C4D),
// link type Ethernet. Headers are written little-endian, which standard
// readers detect from the magic. Single writer; callers serialize access.

#include <cstdint>
#include <cstdio>
#include <string>

#include "ponsim/common.hpp"

namespace ponsim::wire {

class PcapWriter {
 public:
  PcapWriter() = default;
  explicit PcapWriter(const std::string& path) { open(path); }
  PcapWriter(const PcapWriter&) = delete;
  PcapWriter& operator=(const PcapWriter&) = delete;
  ~PcapWriter() {
    if (file_) std::fclose(file_);
  }

  void open(const std::string& path) {
    close();
    file_ = std::fopen(path.c_str(), "wb");
    if (!file_) throw IoError("cannot open pcap file: " + path);
    Bytes hdr;
    put_u32(hdr, 0xA1B23C4Du);  // ns-resolution magic
    put_u16(hdr, 2);            // version 2.4
    put_u16(hdr, 4);
    put_u32(hdr, 0);      // thiszone
    put_u32(hdr, 0);      // sigfigs
    put_u32(hdr, 65535);  // snaplen
    put_u32(hdr, 1);      // LINKTYPE_ETHERNET
    write(hdr.data(), hdr.size());
  }

  void append(ByteSpan bytes, std::int64_t ts_ns) {
    if (!file_) throw IoError("pcap writer is not open");
    Bytes hdr;
    put_u32(hdr, std::uint32_t(ts_ns / 1'000'000'000));
    put_u32(hdr, std::uint32_t(ts_ns % 1'000'000'000));
    put_u32(hdr, std::uint32_t(bytes.size()));
    put_u32(hdr, std::uint32_t(bytes.size()));
    write(hdr.data(), hdr.size());
    write(bytes.data(), bytes.size());
    ++records_;
  }

  void close() {
    if (!file_) return;
    const int rc = std::fclose(file_);
    file_ = nullptr;
    if (rc != 0) throw IoError("pcap close failed");
  }

  bool is_open() const { return file_ != nullptr; }
  std::uint64_t records() const { return records_; }

 private:
  static void put_u16(Bytes& out, std::uint16_t v) {
    out.push_back(std::uint8_t(v));
    out.push_back(std::uint8_t(v >> 8));
  }
  static void put_u32(Bytes& out, std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) out.push_back(std::uint8_t(v >> s));
  }
  void write(const std::uint8_t* data, std::size_t n) {
    if (n && std::fwrite(data, 1, n, file_) != n) throw IoError("pcap write failed");
  }

  std::FILE* file_ = nullptr;
  std::uint64_t records_ = 0;
};

}  // namespace ponsim::wire
