#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rlids/detector.hpp"
#include "rlids/packet.hpp"
#include "rlids/rng.hpp"

namespace rlids {

struct DeviceProfile {
    std::string device_id;
    std::string device_class = "default";
    Ipv4 ip;
    double benign_rate = 10.0;   // packets per second, Poisson arrivals
    double sent_fraction = 0.5;  // share of benign packets the device originates
    std::vector<std::pair<Protocol, double>> protocol_mix;
    std::vector<std::pair<Ipv4, double>> peers;           // remote hosts
    std::vector<std::pair<std::uint16_t, double>> ports;  // remote TCP/UDP service ports

    // Throws ConfigError when the mix does not sum to 1 or a pool is empty.
    void validate() const;
};

enum class AttackKind : std::uint8_t {
    ARP_SPOOF,
    TCP_SYN_FLOOD,
    UDP_FLOOD,
    PING_OF_DEATH,
    PORT_SCAN,
    REFLECTION_SYN,
    REFLECTION_SMURF,
    REFLECTION_SNMP,
    REFLECTION_SSDP,
};

inline constexpr std::array<AttackKind, 9> kAllAttackKinds = {
    AttackKind::ARP_SPOOF,       AttackKind::TCP_SYN_FLOOD,    AttackKind::UDP_FLOOD,
    AttackKind::PING_OF_DEATH,   AttackKind::PORT_SCAN,        AttackKind::REFLECTION_SYN,
    AttackKind::REFLECTION_SMURF, AttackKind::REFLECTION_SNMP, AttackKind::REFLECTION_SSDP};

std::string_view to_string(AttackKind k);
std::optional<AttackKind> parse_attack_kind(std::string_view text);

struct AttackSpec {
    AttackKind kind = AttackKind::UDP_FLOOD;
    double rate = 10.0;  // packets per second, > 0
    Micros start = 0;
    Micros duration = 600 * kMicrosPerSecond;
    std::string target;

    Micros end() const { return start + duration; }
    void validate() const;

    friend bool operator==(const AttackSpec&, const AttackSpec&) = default;
};

// Traffic-shape knobs shared by all attacks of a scenario.
struct AttackShape {
    std::size_t flood_sources = 3;
    std::size_t reflectors = 50;
    Ipv4 gateway = Ipv4::from_octets(192, 168, 1, 1);
};

struct Schedule {
    std::vector<AttackSpec> entries;  // sorted by start
    Micros span = 0;                  // total scenario length

    // Entries sorted, positive rates/durations, one active attack per device.
    void validate() const;
};

struct MutativeParams {
    std::size_t count = 20;
    std::vector<AttackKind> kinds{kAllAttackKinds.begin(), kAllAttackKinds.end()};
    std::vector<double> rates{1.0, 10.0, 100.0};
    Micros duration = 60 * kMicrosPerSecond;
    Micros gap_min = 60 * kMicrosPerSecond;
    Micros gap_max = 180 * kMicrosPerSecond;
    Micros lead_in = 120 * kMicrosPerSecond;  // benign time before the first attack
    Micros tail = 120 * kMicrosPerSecond;     // benign time after the last attack
    Micros align = 0;                         // round starts up to a multiple of this, 0 = off
    std::vector<std::string> targets;
};

// Attack with kind and rate redrawn per entry, never repeating the previous
// (kind, rate) pair; benign gaps uniform in [gap_min, gap_max].
Schedule mutative_schedule(const MutativeParams& params, Rng& rng);

// `count` identical attacks separated by a fixed gap (stationary scenarios).
Schedule periodic_schedule(AttackKind kind, double rate, std::size_t count, Micros duration, Micros gap,
                           Micros lead_in, Micros tail, std::string target);

// Poisson benign traffic for one device over [origin, origin + span).
std::vector<PacketRecord> generate_benign(const DeviceProfile& profile, Micros span, Rng& rng, Micros origin = 0);

// Attack packets for one spec. Throws Error(UnknownTarget) if the target has no profile.
std::vector<PacketRecord> inject_attack(const AttackSpec& spec, std::span<const DeviceProfile> profiles,
                                        Rng& rng, const AttackShape& shape = {});

// Labels per (device, window) under the any-overlap rule.
class GroundTruth {
public:
    GroundTruth() = default;
    GroundTruth(Micros origin, Micros window_len, std::size_t windows)
        : origin_(origin), window_len_(window_len), windows_(windows) {}

    static GroundTruth from_schedule(const Schedule& schedule, std::span<const std::string> devices,
                                     Micros origin, Micros window_len);
    // Parses `device_id,window_index,label` CSV; label is attack or benign.
    static GroundTruth parse_csv(std::string_view text, Micros origin, Micros window_len);
    std::string to_csv() const;

    // Unknown devices and windows past the end read as benign.
    Truth label(std::string_view device, std::size_t window) const;
    void set(const std::string& device, std::size_t window, Truth t);

    std::size_t windows() const { return windows_; }
    Micros origin() const { return origin_; }
    Micros window_len() const { return window_len_; }
    const std::map<std::string, std::vector<Truth>>& labels() const { return labels_; }

private:
    Micros origin_ = 0;
    Micros window_len_ = 300 * kMicrosPerSecond;
    std::size_t windows_ = 0;
    std::map<std::string, std::vector<Truth>> labels_;
};

struct Scenario {
    std::vector<DeviceProfile> profiles;
    Schedule schedule;
    AttackShape shape;
    std::uint64_t seed = 1;
    Micros window_len = 10 * kMicrosPerSecond;
    Micros origin = 0;
};

struct Simulation {
    std::vector<PacketRecord> records;  // benign and attack traffic in timestamp order
    GroundTruth truth;
    DeviceMap devices;
};

// Deterministic in the scenario seed: sub-streams are seeded per component.
Simulation simulate(const Scenario& scenario);

// Desk-scale benign profiles used by the bundled scenarios and tests.
DeviceProfile default_profile(std::string device_id, Ipv4 ip, std::string device_class = "default");

std::string schedule_to_csv(const Schedule& schedule);

}  // namespace rlids
