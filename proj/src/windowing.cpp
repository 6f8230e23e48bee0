#include "rlids/windowing.hpp"

#include <algorithm>
#include <map>

#include "rlids/error.hpp"

namespace rlids {

std::string to_string(FeatureKind f) {
    switch (f.type) {
        case FeatureType::PROTOCOL: return "PROTOCOL";
        case FeatureType::SRC_IP: return f.side == Side::SENT ? "SRC_IP:SENT" : "SRC_IP:RECEIVED";
        case FeatureType::DST_IP: return f.side == Side::SENT ? "DST_IP:SENT" : "DST_IP:RECEIVED";
        case FeatureType::PORT: return f.side == Side::SENT ? "PORT:SENT" : "PORT:RECEIVED";
    }
    return "PROTOCOL";
}

std::optional<FeatureKind> parse_feature(std::string_view text) {
    if (text == "PROTOCOL") return FeatureKind::protocol();
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) return std::nullopt;
    const auto type = text.substr(0, colon);
    const auto side_text = text.substr(colon + 1);
    Side side;
    if (side_text == "SENT") {
        side = Side::SENT;
    } else if (side_text == "RECEIVED") {
        side = Side::RECEIVED;
    } else {
        return std::nullopt;
    }
    if (type == "SRC_IP") return FeatureKind{FeatureType::SRC_IP, side};
    if (type == "DST_IP") return FeatureKind{FeatureType::DST_IP, side};
    if (type == "PORT") return FeatureKind{FeatureType::PORT, side};
    return std::nullopt;
}

std::vector<Window> assign_windows(std::span<const PacketRecord> records, Micros window_len, Micros t0) {
    if (window_len <= 0) throw Error(ErrorCode::InputError, "window length must be positive");
    std::vector<Window> windows;
    if (records.empty()) return windows;

    Micros prev = records.front().timestamp;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const Micros ts = records[i].timestamp;
        if (ts < prev) {
            throw Error(ErrorCode::UnsortedInput,
                        "timestamp decreases at record " + std::to_string(i));
        }
        if (ts < t0) throw Error(ErrorCode::InputError, "record before window origin");
        prev = ts;
    }

    const auto index_of = [&](Micros ts) { return static_cast<std::size_t>((ts - t0) / window_len); };
    const std::size_t last = index_of(records.back().timestamp);
    const std::size_t first = index_of(records.front().timestamp);
    windows.reserve(last + 1);

    // Windows before the first record are materialized too so index i always
    // covers [t0 + i*len, t0 + (i+1)*len).
    std::size_t pos = 0;
    for (std::size_t w = 0; w <= last; ++w) {
        Window win;
        win.index = w;
        win.start = t0 + static_cast<Micros>(w) * window_len;
        win.end = win.start + window_len;
        const std::size_t begin = pos;
        if (w >= first) {
            while (pos < records.size() && records[pos].timestamp < win.end) ++pos;
        }
        win.records = records.subspan(begin, pos - begin);
        windows.push_back(win);
    }
    return windows;
}

Micros default_origin(std::span<const PacketRecord> records, Micros window_len) {
    if (records.empty() || window_len <= 0) return 0;
    const Micros first = records.front().timestamp;
    return (first / window_len) * window_len;
}

FeatureDistribution FeatureDistribution::from_counts(
    FeatureKind feature, std::span<const std::pair<std::uint32_t, std::size_t>> counts) {
    std::map<std::uint32_t, std::size_t> merged;
    for (const auto& [v, n] : counts) {
        if (n > 0) merged[v] += n;
    }
    FeatureDistribution d;
    d.feature = feature;
    for (const auto& [_, n] : merged) d.total_count += n;
    d.support.reserve(merged.size());
    d.probs.reserve(merged.size());
    for (const auto& [v, n] : merged) {
        d.support.push_back(v);
        d.counts.push_back(n);
        d.probs.push_back(static_cast<double>(n) / static_cast<double>(d.total_count));
    }
    return d;
}

std::optional<FeatureDistribution> FeatureDistribution::pool(std::span<const FeatureDistribution> parts) {
    if (parts.empty()) return std::nullopt;
    std::vector<std::pair<std::uint32_t, std::size_t>> counts;
    for (const auto& p : parts) {
        for (std::size_t i = 0; i < p.support.size(); ++i) counts.emplace_back(p.support[i], p.counts[i]);
    }
    auto d = from_counts(parts.front().feature, counts);
    if (d.total_count == 0) return std::nullopt;
    return d;
}

ResolvedRecords ResolvedRecords::resolve(std::span<const PacketRecord> records, const DeviceMap& map,
                                         std::span<const std::string> devices) {
    ResolvedRecords out;
    out.src_device.assign(records.size(), -1);
    out.dst_device.assign(records.size(), -1);
    const auto ordinal = [&](const std::optional<Ipv4>& ip) -> std::int32_t {
        if (!ip) return -1;
        const std::string* d = map.lookup(*ip);
        if (!d) return -1;
        auto it = std::find(devices.begin(), devices.end(), *d);
        return it == devices.end() ? -1 : static_cast<std::int32_t>(it - devices.begin());
    };
    for (std::size_t i = 0; i < records.size(); ++i) {
        out.src_device[i] = ordinal(records[i].src_ip);
        out.dst_device[i] = ordinal(records[i].dst_ip);
    }
    return out;
}

namespace {

// Value of the feature for one packet from the device's point of view, or
// nullopt when the packet does not contribute.
std::optional<std::uint32_t> feature_value(const PacketRecord& r, FeatureKind f, bool is_src, bool is_dst) {
    switch (f.type) {
        case FeatureType::PROTOCOL:
            if (!is_src && !is_dst) return std::nullopt;
            return static_cast<std::uint32_t>(r.protocol);
        case FeatureType::SRC_IP:
        case FeatureType::DST_IP: {
            const bool on_side = f.side == Side::SENT ? is_src : is_dst;
            if (!on_side) return std::nullopt;
            const auto& ip = f.type == FeatureType::SRC_IP ? r.src_ip : r.dst_ip;
            if (!ip) return std::nullopt;
            return ip->value;
        }
        case FeatureType::PORT: {
            const bool on_side = f.side == Side::SENT ? is_src : is_dst;
            if (!on_side) return std::nullopt;
            const auto& port = f.side == Side::SENT ? r.dst_port : r.src_port;
            if (!port) return std::nullopt;
            return *port;
        }
    }
    return std::nullopt;
}

std::optional<FeatureDistribution> from_values(FeatureKind feature, std::vector<std::uint32_t>& values) {
    if (values.empty()) return std::nullopt;
    std::sort(values.begin(), values.end());
    FeatureDistribution d;
    d.feature = feature;
    d.total_count = values.size();
    const double total = static_cast<double>(values.size());
    std::size_t i = 0;
    while (i < values.size()) {
        std::size_t j = i;
        while (j < values.size() && values[j] == values[i]) ++j;
        d.support.push_back(values[i]);
        d.counts.push_back(j - i);
        d.probs.push_back(static_cast<double>(j - i) / total);
        i = j;
    }
    return d;
}

}  // namespace

std::optional<FeatureDistribution> build_distribution(const Window& window, FeatureKind feature,
                                                      std::string_view device, const DeviceMap& map) {
    std::vector<std::uint32_t> values;
    values.reserve(window.records.size());
    const auto is = [&](const std::optional<Ipv4>& ip) {
        if (!ip) return false;
        const std::string* d = map.lookup(*ip);
        return d != nullptr && *d == device;
    };
    for (const auto& r : window.records) {
        if (auto v = feature_value(r, feature, is(r.src_ip), is(r.dst_ip))) values.push_back(*v);
    }
    return from_values(feature, values);
}

std::optional<FeatureDistribution> build_distribution(const Window& window, std::size_t first,
                                                      FeatureKind feature, std::int32_t device,
                                                      const ResolvedRecords& resolved) {
    std::vector<std::uint32_t> values;
    values.reserve(window.records.size());
    for (std::size_t k = 0; k < window.records.size(); ++k) {
        const bool is_src = resolved.src_device[first + k] == device;
        const bool is_dst = resolved.dst_device[first + k] == device;
        if (auto v = feature_value(window.records[k], feature, is_src, is_dst)) values.push_back(*v);
    }
    return from_values(feature, values);
}

}  // namespace rlids
