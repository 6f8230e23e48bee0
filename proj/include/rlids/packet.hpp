#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rlids {

// Microseconds since the epoch. Records carry integral time so windowing and
// CSV round-trips are exact.
using Micros = std::int64_t;

inline constexpr Micros kMicrosPerSecond = 1'000'000;

inline double to_seconds(Micros us) { return static_cast<double>(us) / 1e6; }
Micros from_seconds(double seconds);

enum class Protocol : std::uint8_t { ARP, ICMP, TCP, UDP, DNS, TLS, OTHER };

inline constexpr std::array<Protocol, 7> kAllProtocols = {
    Protocol::ARP, Protocol::ICMP, Protocol::TCP, Protocol::UDP,
    Protocol::DNS, Protocol::TLS,  Protocol::OTHER};

std::string_view to_string(Protocol p);
std::optional<Protocol> parse_protocol(std::string_view text);

// True for protocols whose records must carry both ports.
constexpr bool carries_ports(Protocol p) {
    return p == Protocol::TCP || p == Protocol::UDP || p == Protocol::DNS || p == Protocol::TLS;
}

struct Ipv4 {
    std::uint32_t value = 0;  // host byte order, a.b.c.d == a<<24 | b<<16 | c<<8 | d

    static constexpr Ipv4 from_octets(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d) {
        return Ipv4{(std::uint32_t{a} << 24) | (std::uint32_t{b} << 16) | (std::uint32_t{c} << 8) | d};
    }
    static std::optional<Ipv4> parse(std::string_view text);
    std::string to_string() const;

    friend constexpr auto operator<=>(const Ipv4&, const Ipv4&) = default;
};

inline constexpr std::string_view kUnknownDevice = "unknown";

struct PacketRecord {
    Micros timestamp = 0;
    std::optional<Ipv4> src_ip;
    std::optional<Ipv4> dst_ip;
    std::optional<std::uint16_t> src_port;
    std::optional<std::uint16_t> dst_port;
    Protocol protocol = Protocol::OTHER;
    std::uint32_t length = 0;
    std::string device_id{kUnknownDevice};

    double seconds() const { return to_seconds(timestamp); }

    friend bool operator==(const PacketRecord&, const PacketRecord&) = default;
};

// Checks the record-level invariants: non-negative time, ports present iff the
// protocol carries them.
bool is_valid(const PacketRecord& r);

// Address -> device attribution. An address may belong to one device only.
class DeviceMap {
public:
    // Accepts dotted IPv4 or colon-separated MAC. Throws Error(ConfigError) on a
    // malformed address or when the address is already bound to another device.
    void add(std::string_view address, std::string_view device_id);
    void add(Ipv4 ip, std::string_view device_id);

    const std::string* lookup(Ipv4 ip) const;
    const std::string* lookup_mac(std::uint64_t mac) const;

    bool empty() const { return by_ip_.empty() && by_mac_.empty(); }
    std::size_t size() const { return by_ip_.size() + by_mac_.size(); }

    // Sorted distinct device ids with at least one address.
    std::vector<std::string> devices() const;
    // IPv4 addresses bound to a device, ascending.
    std::vector<Ipv4> addresses_of(std::string_view device_id) const;

    // Parses `address,device_id` CSV (header line required).
    static DeviceMap parse_csv(std::string_view text);
    std::string to_csv() const;

    // Builds a map from attributed records: each device is bound to the IPv4
    // address it shares with the largest number of its records.
    static DeviceMap infer(std::span<const PacketRecord> records);

private:
    std::unordered_map<std::uint32_t, std::string> by_ip_;
    std::unordered_map<std::uint64_t, std::string> by_mac_;
};

std::optional<std::uint64_t> parse_mac(std::string_view text);

// Device attribution for a packet: destination device first, then source,
// otherwise "unknown". Packets without IPv4 addresses are always "unknown".
std::string attribute_device(const DeviceMap& map, const PacketRecord& r);

}  // namespace rlids
