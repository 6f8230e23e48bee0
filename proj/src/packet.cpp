#include "rlids/packet.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

#include "rlids/error.hpp"

namespace rlids {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::Truncated: return "Truncated";
        case ErrorCode::SchemaMismatch: return "SchemaMismatch";
        case ErrorCode::RowError: return "RowError";
        case ErrorCode::UnsortedInput: return "UnsortedInput";
        case ErrorCode::EmptyDistribution: return "EmptyDistribution";
        case ErrorCode::AlphaIsOne: return "AlphaIsOne";
        case ErrorCode::FeatureMismatch: return "FeatureMismatch";
        case ErrorCode::NoMeasurement: return "NoMeasurement";
        case ErrorCode::UnknownTarget: return "UnknownTarget";
        case ErrorCode::StreamExhausted: return "StreamExhausted";
        case ErrorCode::FingerprintMismatch: return "FingerprintMismatch";
        case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::InputError: return "InputError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

Micros from_seconds(double seconds) {
    return static_cast<Micros>(std::llround(seconds * 1e6));
}

std::string_view to_string(Protocol p) {
    switch (p) {
        case Protocol::ARP: return "ARP";
        case Protocol::ICMP: return "ICMP";
        case Protocol::TCP: return "TCP";
        case Protocol::UDP: return "UDP";
        case Protocol::DNS: return "DNS";
        case Protocol::TLS: return "TLS";
        case Protocol::OTHER: return "OTHER";
    }
    return "OTHER";
}

std::optional<Protocol> parse_protocol(std::string_view text) {
    for (Protocol p : kAllProtocols) {
        if (to_string(p) == text) return p;
    }
    return std::nullopt;
}

std::optional<Ipv4> Ipv4::parse(std::string_view text) {
    std::uint32_t value = 0;
    const char* p = text.data();
    const char* end = text.data() + text.size();
    for (int octet = 0; octet < 4; ++octet) {
        if (octet > 0) {
            if (p == end || *p != '.') return std::nullopt;
            ++p;
        }
        unsigned part = 0;
        auto [next, ec] = std::from_chars(p, end, part);
        if (ec != std::errc{} || next == p || next - p > 3 || part > 255) return std::nullopt;
        value = (value << 8) | part;
        p = next;
    }
    if (p != end) return std::nullopt;
    return Ipv4{value};
}

std::string Ipv4::to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", (value >> 24) & 0xff, (value >> 16) & 0xff,
                  (value >> 8) & 0xff, value & 0xff);
    return buf;
}

bool is_valid(const PacketRecord& r) {
    if (r.timestamp < 0) return false;
    const bool has_ports = r.src_port.has_value() && r.dst_port.has_value();
    const bool no_ports = !r.src_port.has_value() && !r.dst_port.has_value();
    return carries_ports(r.protocol) ? has_ports : no_ports;
}

std::optional<std::uint64_t> parse_mac(std::string_view text) {
    if (text.size() != 17) return std::nullopt;
    std::uint64_t mac = 0;
    for (int i = 0; i < 6; ++i) {
        if (i > 0 && text[i * 3 - 1] != ':' && text[i * 3 - 1] != '-') return std::nullopt;
        unsigned byte = 0;
        const char* first = text.data() + i * 3;
        auto [next, ec] = std::from_chars(first, first + 2, byte, 16);
        if (ec != std::errc{} || next != first + 2) return std::nullopt;
        mac = (mac << 8) | byte;
    }
    return mac;
}

namespace {

template <typename Map, typename Key>
void bind(Map& map, Key key, std::string_view device_id, std::string_view address) {
    auto [it, inserted] = map.try_emplace(key, device_id);
    if (!inserted && it->second != device_id) {
        throw ConfigError("device_map", "address " + std::string(address) + " already bound to " +
                                            it->second);
    }
}

}  // namespace

void DeviceMap::add(std::string_view address, std::string_view device_id) {
    if (device_id.empty()) throw ConfigError("device_map", "empty device id");
    if (auto ip = Ipv4::parse(address)) {
        bind(by_ip_, ip->value, device_id, address);
    } else if (auto mac = parse_mac(address)) {
        bind(by_mac_, *mac, device_id, address);
    } else {
        throw ConfigError("device_map", "malformed address '" + std::string(address) + "'");
    }
}

void DeviceMap::add(Ipv4 ip, std::string_view device_id) { add(ip.to_string(), device_id); }

const std::string* DeviceMap::lookup(Ipv4 ip) const {
    auto it = by_ip_.find(ip.value);
    return it == by_ip_.end() ? nullptr : &it->second;
}

const std::string* DeviceMap::lookup_mac(std::uint64_t mac) const {
    auto it = by_mac_.find(mac);
    return it == by_mac_.end() ? nullptr : &it->second;
}

std::vector<std::string> DeviceMap::devices() const {
    std::vector<std::string> out;
    for (const auto& [_, d] : by_ip_) out.push_back(d);
    for (const auto& [_, d] : by_mac_) out.push_back(d);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<Ipv4> DeviceMap::addresses_of(std::string_view device_id) const {
    std::vector<Ipv4> out;
    for (const auto& [ip, d] : by_ip_) {
        if (d == device_id) out.push_back(Ipv4{ip});
    }
    std::sort(out.begin(), out.end());
    return out;
}

DeviceMap DeviceMap::parse_csv(std::string_view text) {
    DeviceMap map;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line_no == 1) {
            if (line != "address,device_id") {
                throw Error(ErrorCode::SchemaMismatch, "device map header must be 'address,device_id'");
            }
            continue;
        }
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string_view::npos) throw RowError(line_no, "expected 'address,device_id'");
        try {
            map.add(line.substr(0, comma), line.substr(comma + 1));
        } catch (const ConfigError& e) {
            throw RowError(line_no, e.what());
        }
    }
    return map;
}

std::string DeviceMap::to_csv() const {
    std::map<std::uint32_t, std::string> ordered(by_ip_.begin(), by_ip_.end());
    std::string out = "address,device_id\n";
    for (const auto& [ip, d] : ordered) out += Ipv4{ip}.to_string() + "," + d + "\n";
    std::map<std::uint64_t, std::string> macs(by_mac_.begin(), by_mac_.end());
    for (const auto& [mac, d] : macs) {
        char buf[18];
        std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x",
                      unsigned((mac >> 40) & 0xff), unsigned((mac >> 32) & 0xff),
                      unsigned((mac >> 24) & 0xff), unsigned((mac >> 16) & 0xff),
                      unsigned((mac >> 8) & 0xff), unsigned(mac & 0xff));
        out += std::string(buf) + "," + d + "\n";
    }
    return out;
}

DeviceMap DeviceMap::infer(std::span<const PacketRecord> records) {
    // (device, ip) -> number of that device's records mentioning ip
    std::map<std::pair<std::string, std::uint32_t>, std::size_t> tally;
    for (const auto& r : records) {
        if (r.device_id == kUnknownDevice) continue;
        if (r.src_ip) ++tally[{r.device_id, r.src_ip->value}];
        if (r.dst_ip && (!r.src_ip || r.dst_ip != r.src_ip)) ++tally[{r.device_id, r.dst_ip->value}];
    }
    std::map<std::string, std::pair<std::uint32_t, std::size_t>> best;
    for (const auto& [key, n] : tally) {
        auto& slot = best[key.first];
        if (n > slot.second) slot = {key.second, n};
    }
    DeviceMap map;
    for (const auto& [device, choice] : best) {
        // Two devices claiming the same address keep the first binding.
        map.by_ip_.try_emplace(choice.first, device);
    }
    return map;
}

std::string attribute_device(const DeviceMap& map, const PacketRecord& r) {
    if (r.dst_ip) {
        if (const auto* d = map.lookup(*r.dst_ip)) return *d;
    }
    if (r.src_ip) {
        if (const auto* d = map.lookup(*r.src_ip)) return *d;
    }
    return std::string(kUnknownDevice);
}

}  // namespace rlids
