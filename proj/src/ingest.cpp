#include "rlids/ingest.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace rlids {
namespace {

constexpr std::uint32_t kPcapMagic = 0xa1b2c3d4;
constexpr std::uint32_t kPcapMagicSwapped = 0xd4c3b2a1;
constexpr std::uint32_t kLinkTypeEthernet = 1;
constexpr std::size_t kGlobalHeaderLen = 24;
constexpr std::size_t kRecordHeaderLen = 16;

constexpr std::uint16_t kEtherIpv4 = 0x0800;
constexpr std::uint16_t kEtherArp = 0x0806;
constexpr std::uint16_t kEtherIpv6 = 0x86dd;
constexpr std::uint16_t kEtherVlan = 0x8100;

std::uint8_t u8(std::span<const std::byte> b, std::size_t at) {
    return static_cast<std::uint8_t>(b[at]);
}

std::uint16_t be16(std::span<const std::byte> b, std::size_t at) {
    return static_cast<std::uint16_t>((u8(b, at) << 8) | u8(b, at + 1));
}

std::uint32_t be32(std::span<const std::byte> b, std::size_t at) {
    return (std::uint32_t{u8(b, at)} << 24) | (std::uint32_t{u8(b, at + 1)} << 16) |
           (std::uint32_t{u8(b, at + 2)} << 8) | u8(b, at + 3);
}

std::uint32_t le32(std::span<const std::byte> b, std::size_t at) {
    return (std::uint32_t{u8(b, at + 3)} << 24) | (std::uint32_t{u8(b, at + 2)} << 16) |
           (std::uint32_t{u8(b, at + 1)} << 8) | u8(b, at);
}

std::uint64_t mac_at(std::span<const std::byte> b, std::size_t at) {
    std::uint64_t mac = 0;
    for (std::size_t i = 0; i < 6; ++i) mac = (mac << 8) | u8(b, at + i);
    return mac;
}

Protocol classify_l4(Protocol transport, std::uint16_t sport, std::uint16_t dport) {
    if (sport == 53 || dport == 53) return Protocol::DNS;
    if (transport == Protocol::TCP && (sport == 443 || dport == 443)) return Protocol::TLS;
    return transport;
}

void attribute(PacketRecord& r, const DeviceMap& devices, std::uint64_t src_mac, std::uint64_t dst_mac) {
    r.device_id = attribute_device(devices, r);
    if (r.device_id != kUnknownDevice || !r.src_ip) return;
    if (const auto* d = devices.lookup_mac(dst_mac)) {
        r.device_id = *d;
    } else if (const auto* s = devices.lookup_mac(src_mac)) {
        r.device_id = *s;
    }
}

// Decodes one Ethernet frame; nullopt when the frame is not parseable.
std::optional<PacketRecord> decode_frame(std::span<const std::byte> frame, Micros ts,
                                         std::uint32_t wire_len, const DeviceMap& devices) {
    if (frame.size() < 14) return std::nullopt;
    const std::uint64_t dst_mac = mac_at(frame, 0);
    const std::uint64_t src_mac = mac_at(frame, 6);
    std::size_t off = 12;
    std::uint16_t ethertype = be16(frame, off);
    off += 2;
    if (ethertype == kEtherVlan) {
        if (frame.size() < off + 4) return std::nullopt;
        ethertype = be16(frame, off + 2);
        off += 4;
    }

    PacketRecord r;
    r.timestamp = ts;
    r.length = wire_len;

    if (ethertype == kEtherIpv6) {
        r.protocol = Protocol::OTHER;
        r.device_id = std::string(kUnknownDevice);
        return r;
    }

    if (ethertype == kEtherArp) {
        if (frame.size() < off + 28) return std::nullopt;
        const std::uint16_t ptype = be16(frame, off + 2);
        const std::uint8_t hlen = u8(frame, off + 4);
        const std::uint8_t plen = u8(frame, off + 5);
        if (ptype != kEtherIpv4 || hlen != 6 || plen != 4) return std::nullopt;
        r.protocol = Protocol::ARP;
        r.src_ip = Ipv4{be32(frame, off + 14)};
        r.dst_ip = Ipv4{be32(frame, off + 24)};
        attribute(r, devices, src_mac, dst_mac);
        return r;
    }

    if (ethertype != kEtherIpv4) return std::nullopt;
    if (frame.size() < off + 20) return std::nullopt;
    const std::uint8_t ver_ihl = u8(frame, off);
    if ((ver_ihl >> 4) != 4) return std::nullopt;
    const std::size_t ihl = std::size_t{ver_ihl & 0x0fu} * 4;
    if (ihl < 20 || frame.size() < off + ihl) return std::nullopt;
    const std::uint16_t frag = be16(frame, off + 6);
    const bool first_fragment = (frag & 0x1fff) == 0;
    const std::uint8_t proto = u8(frame, off + 9);
    r.src_ip = Ipv4{be32(frame, off + 12)};
    r.dst_ip = Ipv4{be32(frame, off + 16)};
    const std::size_t l4 = off + ihl;

    switch (proto) {
        case 1:
            r.protocol = Protocol::ICMP;
            break;
        case 6:
        case 17: {
            if (!first_fragment) {
                r.protocol = Protocol::OTHER;
                break;
            }
            if (frame.size() < l4 + 4) return std::nullopt;
            const Protocol transport = proto == 6 ? Protocol::TCP : Protocol::UDP;
            const std::uint16_t sport = be16(frame, l4);
            const std::uint16_t dport = be16(frame, l4 + 2);
            r.src_port = sport;
            r.dst_port = dport;
            r.protocol = classify_l4(transport, sport, dport);
            break;
        }
        default:
            r.protocol = Protocol::OTHER;
    }
    attribute(r, devices, src_mac, dst_mac);
    return r;
}

std::string offset_message(const char* what, std::size_t offset) {
    return std::string(what) + " at byte offset " + std::to_string(offset);
}

}  // namespace

PcapCapture parse_pcap_stream(std::span<const std::byte> bytes, const DeviceMap& devices) {
    PcapCapture cap;
    if (bytes.size() < 4) {
        cap.error = PcapDiagnostic{ErrorCode::BadMagic, 0, offset_message("missing pcap magic", 0)};
        return cap;
    }
    const std::uint32_t magic = le32(bytes, 0);
    bool little;
    if (magic == kPcapMagic) {
        little = true;
    } else if (magic == kPcapMagicSwapped) {
        little = false;
    } else {
        cap.error = PcapDiagnostic{ErrorCode::BadMagic, 0, offset_message("not a classic pcap capture", 0)};
        return cap;
    }
    auto rd32 = [&](std::size_t at) { return little ? le32(bytes, at) : be32(bytes, at); };

    if (bytes.size() < kGlobalHeaderLen) {
        cap.error = PcapDiagnostic{ErrorCode::Truncated, 0, offset_message("truncated global header", 0)};
        return cap;
    }
    const std::uint32_t link = rd32(20);
    if (link != kLinkTypeEthernet) {
        cap.error = PcapDiagnostic{ErrorCode::InputError, 20,
                                   "unsupported link type " + std::to_string(link) + " at byte offset 20"};
        return cap;
    }

    std::size_t pos = kGlobalHeaderLen;
    while (pos < bytes.size()) {
        if (bytes.size() - pos < kRecordHeaderLen) {
            cap.error = PcapDiagnostic{ErrorCode::Truncated, pos,
                                       offset_message("truncated record header", pos)};
            return cap;
        }
        const std::uint32_t ts_sec = rd32(pos);
        const std::uint32_t ts_usec = rd32(pos + 4);
        const std::uint32_t incl_len = rd32(pos + 8);
        const std::uint32_t orig_len = rd32(pos + 12);
        if (bytes.size() - pos - kRecordHeaderLen < incl_len) {
            cap.error = PcapDiagnostic{ErrorCode::Truncated, pos,
                                       offset_message("record shorter than declared length", pos)};
            return cap;
        }
        const auto frame = bytes.subspan(pos + kRecordHeaderLen, incl_len);
        const Micros ts = Micros{ts_sec} * kMicrosPerSecond + Micros{ts_usec};
        ++cap.frames_total;
        if (auto rec = decode_frame(frame, ts, orig_len, devices)) {
            cap.records.push_back(std::move(*rec));
        } else {
            ++cap.frames_skipped;
        }
        pos += kRecordHeaderLen + incl_len;
    }
    return cap;
}

// ---------------------------------------------------------------------------
// Summary CSV

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

// Parses "S[.ffffff]" exactly into microseconds.
std::optional<Micros> parse_timestamp(std::string_view text) {
    const auto dot = text.find('.');
    const std::string_view whole = text.substr(0, dot);
    const std::string_view frac = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
    if (whole.empty() || frac.size() > 6) return std::nullopt;
    if (dot != std::string_view::npos && frac.empty()) return std::nullopt;
    Micros seconds = 0;
    auto [p, ec] = std::from_chars(whole.data(), whole.data() + whole.size(), seconds);
    if (ec != std::errc{} || p != whole.data() + whole.size() || seconds < 0) return std::nullopt;
    Micros micros = 0;
    for (std::size_t i = 0; i < 6; ++i) {
        micros *= 10;
        if (i < frac.size()) {
            const char c = frac[i];
            if (c < '0' || c > '9') return std::nullopt;
            micros += c - '0';
        }
    }
    return seconds * kMicrosPerSecond + micros;
}

template <typename Int>
std::optional<Int> parse_int(std::string_view text) {
    Int v{};
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || p != text.data() + text.size() || text.empty()) return std::nullopt;
    return v;
}

std::optional<std::uint16_t> parse_port(std::string_view text, std::size_t line, const char* name) {
    if (text.empty()) return std::nullopt;
    auto v = parse_int<std::uint32_t>(text);
    if (!v || *v > 65535) throw RowError(line, std::string("bad ") + name + " '" + std::string(text) + "'");
    return static_cast<std::uint16_t>(*v);
}

std::optional<Ipv4> parse_ip_field(std::string_view text, std::size_t line, const char* name) {
    if (text.empty()) return std::nullopt;
    auto ip = Ipv4::parse(text);
    if (!ip) throw RowError(line, std::string("bad ") + name + " '" + std::string(text) + "'");
    return ip;
}

}  // namespace

std::vector<PacketRecord> parse_summary_csv(std::string_view text) {
    std::vector<PacketRecord> out;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    bool seen_header = false;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!seen_header) {
            if (line != kSummaryCsvHeader) {
                throw Error(ErrorCode::SchemaMismatch,
                            "expected header '" + std::string(kSummaryCsvHeader) + "'");
            }
            seen_header = true;
            continue;
        }
        if (line.empty()) continue;
        const auto f = split_fields(line);
        if (f.size() != 8) throw RowError(line_no, "expected 8 fields, got " + std::to_string(f.size()));

        PacketRecord r;
        auto ts = parse_timestamp(f[0]);
        if (!ts) throw RowError(line_no, "bad timestamp '" + std::string(f[0]) + "'");
        r.timestamp = *ts;
        r.src_ip = parse_ip_field(f[1], line_no, "src_ip");
        r.dst_ip = parse_ip_field(f[2], line_no, "dst_ip");
        r.src_port = parse_port(f[3], line_no, "src_port");
        r.dst_port = parse_port(f[4], line_no, "dst_port");
        auto proto = parse_protocol(f[5]);
        if (!proto) throw RowError(line_no, "unknown protocol '" + std::string(f[5]) + "'");
        r.protocol = *proto;
        auto len = parse_int<std::uint32_t>(f[6]);
        if (!len) throw RowError(line_no, "bad length '" + std::string(f[6]) + "'");
        r.length = *len;
        if (f[7].empty()) throw RowError(line_no, "empty device_id");
        r.device_id = std::string(f[7]);
        if (!is_valid(r)) {
            throw RowError(line_no, "ports must be present exactly for TCP/UDP/DNS/TLS records");
        }
        out.push_back(std::move(r));
    }
    if (!seen_header) throw Error(ErrorCode::SchemaMismatch, "missing header line");
    return out;
}

std::string write_summary_csv(std::span<const PacketRecord> records) {
    std::string out;
    out.reserve(64 * (records.size() + 1));
    out += kSummaryCsvHeader;
    out += '\n';
    char ts[32];
    for (const auto& r : records) {
        std::snprintf(ts, sizeof ts, "%lld.%06lld", static_cast<long long>(r.timestamp / kMicrosPerSecond),
                      static_cast<long long>(r.timestamp % kMicrosPerSecond));
        out += ts;
        out += ',';
        if (r.src_ip) out += r.src_ip->to_string();
        out += ',';
        if (r.dst_ip) out += r.dst_ip->to_string();
        out += ',';
        if (r.src_port) out += std::to_string(*r.src_port);
        out += ',';
        if (r.dst_port) out += std::to_string(*r.dst_port);
        out += ',';
        out += to_string(r.protocol);
        out += ',';
        out += std::to_string(r.length);
        out += ',';
        out += r.device_id;
        out += '\n';
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::byte> read_binary_file(const std::string& path) {
    const std::string raw = read_file(path);
    std::vector<std::byte> out(raw.size());
    std::memcpy(out.data(), raw.data(), raw.size());
    return out;
}

void write_file(const std::string& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

}  // namespace rlids
