#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rlids/packet.hpp"

namespace rlids {

enum class FeatureType : std::uint8_t { PROTOCOL, SRC_IP, DST_IP, PORT };
enum class Side : std::uint8_t { SENT, RECEIVED };

// Feature whose per-window distribution is measured for a device. PROTOCOL
// ignores the side; it is stored canonically as SENT.
struct FeatureKind {
    FeatureType type = FeatureType::PROTOCOL;
    Side side = Side::SENT;

    constexpr FeatureKind() = default;
    constexpr FeatureKind(FeatureType t, Side s)
        : type(t), side(t == FeatureType::PROTOCOL ? Side::SENT : s) {}

    static constexpr FeatureKind protocol() { return {FeatureType::PROTOCOL, Side::SENT}; }

    friend constexpr bool operator==(const FeatureKind&, const FeatureKind&) = default;
    friend constexpr bool operator<(const FeatureKind& a, const FeatureKind& b) {
        return a.type != b.type ? a.type < b.type : a.side < b.side;
    }
};

// "PROTOCOL", "SRC_IP:RECEIVED", "PORT:SENT", ...
std::string to_string(FeatureKind f);
std::optional<FeatureKind> parse_feature(std::string_view text);

struct Window {
    std::size_t index = 0;
    Micros start = 0;
    Micros end = 0;
    std::span<const PacketRecord> records;  // views the stream passed to assign_windows
};

// Tumbling windows [t0 + i*len, t0 + (i+1)*len). Empty windows between occupied
// ones are materialized. Throws Error(UnsortedInput) when timestamps decrease
// and Error(InputError) for records before t0 or a non-positive window length.
std::vector<Window> assign_windows(std::span<const PacketRecord> records, Micros window_len, Micros t0);

// t0 used when none is configured: first timestamp floored to the window length.
Micros default_origin(std::span<const PacketRecord> records, Micros window_len);

// Empirical pmf over a feature's observed values; values absent from the
// window are not in the support.
struct FeatureDistribution {
    FeatureKind feature;
    std::vector<std::uint32_t> support;  // ascending feature values
    std::vector<double> probs;           // aligned with support, all > 0
    std::vector<std::size_t> counts;     // aligned with support
    std::size_t total_count = 0;

    std::size_t distinct_count() const { return support.size(); }

    // Builds from (value, count) pairs; zero counts are dropped.
    static FeatureDistribution from_counts(FeatureKind feature,
                                           std::span<const std::pair<std::uint32_t, std::size_t>> counts);
    // Pools several distributions' raw counts (used for trailing baselines).
    static std::optional<FeatureDistribution> pool(std::span<const FeatureDistribution> parts);
};

// Per-record device ordinals, resolved once against a device list so repeated
// distribution builds avoid address lookups. -1 means "not a listed device".
struct ResolvedRecords {
    std::vector<std::int32_t> src_device;
    std::vector<std::int32_t> dst_device;

    static ResolvedRecords resolve(std::span<const PacketRecord> records, const DeviceMap& map,
                                   std::span<const std::string> devices);
};

// Distribution of `feature` for `device` within `window`. SENT counts packets
// whose source is the device, RECEIVED those whose destination is, PROTOCOL
// counts both. PORT takes the remote port (dst_port when sent, src_port when
// received). Returns nullopt when nothing was measured; callers must treat that
// as "no measurement", never as entropy 0.
std::optional<FeatureDistribution> build_distribution(const Window& window, FeatureKind feature,
                                                      std::string_view device, const DeviceMap& map);

// Same, against pre-resolved ordinals. `first` is the stream index of the
// window's first record.
std::optional<FeatureDistribution> build_distribution(const Window& window, std::size_t first,
                                                      FeatureKind feature, std::int32_t device,
                                                      const ResolvedRecords& resolved);

}  // namespace rlids
