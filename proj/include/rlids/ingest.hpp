#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rlids/error.hpp"
#include "rlids/packet.hpp"

namespace rlids {

struct PcapDiagnostic {
    ErrorCode code;       // BadMagic or Truncated
    std::size_t offset;   // byte offset of the header that could not be read
    std::string message;
};

struct PcapCapture {
    std::vector<PacketRecord> records;
    std::size_t frames_total = 0;    // frames whose record header and data were fully present
    std::size_t frames_skipped = 0;  // frames present but not Ethernet/IPv4/ARP-parseable
    std::optional<PcapDiagnostic> error;  // set when parsing stopped early

    bool ok() const { return !error.has_value(); }
};

// Classic pcap reader (both byte orders, microsecond timestamps, Ethernet link
// type). Parsing stops at the first fatal problem; records read before it are
// kept. Device ids are attributed through `devices` (may be empty).
PcapCapture parse_pcap_stream(std::span<const std::byte> bytes, const DeviceMap& devices = {});

inline constexpr std::string_view kSummaryCsvHeader =
    "timestamp,src_ip,dst_ip,src_port,dst_port,protocol,length,device_id";

// Throws Error(SchemaMismatch) on a wrong header and RowError on bad rows.
std::vector<PacketRecord> parse_summary_csv(std::string_view text);
std::string write_summary_csv(std::span<const PacketRecord> records);

std::string read_file(const std::string& path);
std::vector<std::byte> read_binary_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace rlids
