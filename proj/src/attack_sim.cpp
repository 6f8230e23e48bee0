#include "rlids/attack_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "rlids/error.hpp"

namespace rlids {
namespace {

constexpr std::uint16_t kEphemeralLo = 49152;

template <class T>
const T& weighted_pick(const std::vector<std::pair<T, double>>& pool, Rng& rng) {
    double total = 0.0;
    for (const auto& [_, w] : pool) total += w;
    double u = rng.uniform() * total;
    for (const auto& [v, w] : pool) {
        if (u < w) return v;
        u -= w;
    }
    return pool.back().first;
}

std::uint16_t ephemeral_port(Rng& rng) {
    return static_cast<std::uint16_t>(kEphemeralLo + rng.below(65536 - kEphemeralLo));
}

std::uint16_t service_port(Protocol p, const DeviceProfile& profile, Rng& rng) {
    if (p == Protocol::DNS) return 53;
    if (p == Protocol::TLS) return 443;
    return weighted_pick(profile.ports, rng);
}

std::uint32_t benign_length(Protocol p, Rng& rng) {
    switch (p) {
        case Protocol::ARP: return 42;
        case Protocol::ICMP: return 98;
        case Protocol::DNS: return 70 + static_cast<std::uint32_t>(rng.below(200));
        default: return 60 + static_cast<std::uint32_t>(rng.below(1400));
    }
}

Micros ceil_to(Micros t, Micros q) { return q > 0 ? (t + q - 1) / q * q : t; }

std::vector<Ipv4> host_block(std::uint8_t a, std::uint8_t b, std::size_t n, Rng& rng) {
    std::set<std::uint32_t> seen;
    std::vector<Ipv4> out;
    while (out.size() < n) {
        const auto c = static_cast<std::uint8_t>(rng.below(256));
        const auto d = static_cast<std::uint8_t>(1 + rng.below(254));
        const Ipv4 ip = Ipv4::from_octets(a, b, c, d);
        if (seen.insert(ip.value).second) out.push_back(ip);
    }
    return out;
}

}  // namespace

void DeviceProfile::validate() const {
    const std::string path = "profiles." + device_id;
    if (device_id.empty()) throw ConfigError("profiles", "device_id must not be empty");
    if (!(benign_rate >= 0.0) || !std::isfinite(benign_rate)) throw ConfigError(path + ".benign_rate", "must be >= 0");
    if (!(sent_fraction >= 0.0 && sent_fraction <= 1.0)) throw ConfigError(path + ".sent_fraction", "must lie in [0, 1]");
    if (protocol_mix.empty()) throw ConfigError(path + ".protocol_mix", "must not be empty");
    double total = 0.0;
    bool needs_ports = false;
    for (const auto& [p, w] : protocol_mix) {
        if (!(w >= 0.0)) throw ConfigError(path + ".protocol_mix", "weights must be >= 0");
        total += w;
        needs_ports |= (p == Protocol::TCP || p == Protocol::UDP) && w > 0.0;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError(path + ".protocol_mix", "weights must sum to 1");
    if (peers.empty()) throw ConfigError(path + ".peers", "must not be empty");
    if (needs_ports && ports.empty()) throw ConfigError(path + ".ports", "TCP/UDP traffic needs a port pool");
}

std::string_view to_string(AttackKind k) {
    switch (k) {
        case AttackKind::ARP_SPOOF: return "ARP_SPOOF";
        case AttackKind::TCP_SYN_FLOOD: return "TCP_SYN_FLOOD";
        case AttackKind::UDP_FLOOD: return "UDP_FLOOD";
        case AttackKind::PING_OF_DEATH: return "PING_OF_DEATH";
        case AttackKind::PORT_SCAN: return "PORT_SCAN";
        case AttackKind::REFLECTION_SYN: return "REFLECTION_SYN";
        case AttackKind::REFLECTION_SMURF: return "REFLECTION_SMURF";
        case AttackKind::REFLECTION_SNMP: return "REFLECTION_SNMP";
        case AttackKind::REFLECTION_SSDP: return "REFLECTION_SSDP";
    }
    return "UNKNOWN";
}

std::optional<AttackKind> parse_attack_kind(std::string_view text) {
    for (AttackKind k : kAllAttackKinds) {
        if (to_string(k) == text) return k;
    }
    return std::nullopt;
}

void AttackSpec::validate() const {
    if (!(rate > 0.0) || !std::isfinite(rate)) throw ConfigError("schedule.rate", "must be positive");
    if (duration <= 0) throw ConfigError("schedule.duration", "must be positive");
    if (start < 0) throw ConfigError("schedule.start", "must be >= 0");
    if (target.empty()) throw ConfigError("schedule.target", "must not be empty");
}

void Schedule::validate() const {
    std::map<std::string, Micros> busy_until;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        e.validate();
        if (i > 0 && e.start < entries[i - 1].start) throw ConfigError("schedule", "entries must be sorted by start");
        if (e.end() > span) throw ConfigError("schedule", "attack runs past the scenario end");
        auto [it, fresh] = busy_until.try_emplace(e.target, e.end());
        if (!fresh) {
            if (e.start < it->second) throw ConfigError("schedule", "overlapping attacks on " + e.target);
            it->second = e.end();
        }
    }
}

Schedule mutative_schedule(const MutativeParams& p, Rng& rng) {
    if (p.kinds.empty()) throw ConfigError("schedule.kinds", "must not be empty");
    if (p.rates.empty()) throw ConfigError("schedule.rates", "must not be empty");
    if (p.targets.empty()) throw ConfigError("schedule.targets", "must not be empty");
    if (p.count > 1 && p.kinds.size() * p.rates.size() < 2) {
        throw ConfigError("schedule", "consecutive attacks must differ but only one (kind, rate) pair exists");
    }
    if (p.gap_min < 0 || p.gap_max < p.gap_min) throw ConfigError("schedule.gap", "need 0 <= gap_min <= gap_max");

    Schedule s;
    Micros t = p.lead_in;
    std::optional<std::pair<AttackKind, double>> prev;
    for (std::size_t i = 0; i < p.count; ++i) {
        t = ceil_to(t, p.align);
        std::pair<AttackKind, double> pick;
        do {
            pick = {p.kinds[rng.below(p.kinds.size())], p.rates[rng.below(p.rates.size())]};
        } while (prev && *prev == pick);
        prev = pick;
        AttackSpec a{pick.first, pick.second, t, p.duration, p.targets[rng.below(p.targets.size())]};
        a.validate();
        s.entries.push_back(a);
        t = a.end() + p.gap_min + static_cast<Micros>(rng.below(static_cast<std::size_t>(p.gap_max - p.gap_min) + 1));
    }
    s.span = (s.entries.empty() ? p.lead_in : s.entries.back().end()) + p.tail;
    s.span = ceil_to(s.span, p.align);
    return s;
}

Schedule periodic_schedule(AttackKind kind, double rate, std::size_t count, Micros duration, Micros gap,
                           Micros lead_in, Micros tail, std::string target) {
    Schedule s;
    Micros t = lead_in;
    for (std::size_t i = 0; i < count; ++i) {
        s.entries.push_back({kind, rate, t, duration, target});
        t += duration + gap;
    }
    s.span = (s.entries.empty() ? lead_in : s.entries.back().end()) + tail;
    s.validate();
    return s;
}

std::vector<PacketRecord> generate_benign(const DeviceProfile& profile, Micros span, Rng& rng, Micros origin) {
    profile.validate();
    std::vector<PacketRecord> out;
    if (profile.benign_rate == 0.0) return out;
    out.reserve(static_cast<std::size_t>(profile.benign_rate * to_seconds(span) * 1.1) + 16);
    double t = to_seconds(origin);
    const Micros end = origin + span;
    while (true) {
        t += rng.exponential(profile.benign_rate);
        const Micros ts = from_seconds(t);
        if (ts >= end) break;
        PacketRecord r;
        r.timestamp = ts;
        r.protocol = weighted_pick(profile.protocol_mix, rng);
        const bool sent = rng.uniform() < profile.sent_fraction;
        const Ipv4 peer = weighted_pick(profile.peers, rng);
        r.src_ip = sent ? profile.ip : peer;
        r.dst_ip = sent ? peer : profile.ip;
        if (carries_ports(r.protocol)) {
            const std::uint16_t local = ephemeral_port(rng);
            const std::uint16_t remote = service_port(r.protocol, profile, rng);
            r.src_port = sent ? local : remote;
            r.dst_port = sent ? remote : local;
        }
        r.length = benign_length(r.protocol, rng);
        r.device_id = profile.device_id;
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<PacketRecord> inject_attack(const AttackSpec& spec, std::span<const DeviceProfile> profiles, Rng& rng,
                                        const AttackShape& shape) {
    spec.validate();
    const auto it = std::find_if(profiles.begin(), profiles.end(),
                                 [&](const DeviceProfile& p) { return p.device_id == spec.target; });
    if (it == profiles.end()) throw Error(ErrorCode::UnknownTarget, "attack target '" + spec.target + "' has no profile");
    const Ipv4 victim = it->ip;

    std::vector<Ipv4> sources;
    switch (spec.kind) {
        case AttackKind::ARP_SPOOF: sources = {shape.gateway}; break;
        case AttackKind::PORT_SCAN: sources = host_block(203, 0, 1, rng); break;
        case AttackKind::TCP_SYN_FLOOD:
        case AttackKind::UDP_FLOOD:
        case AttackKind::PING_OF_DEATH: sources = host_block(203, 0, shape.flood_sources, rng); break;
        default: sources = host_block(198, 51, shape.reflectors, rng); break;
    }

    const double secs = to_seconds(spec.duration);
    const auto n = static_cast<std::size_t>(std::floor(spec.rate * secs));
    std::vector<PacketRecord> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        PacketRecord r;
        const double offset = (static_cast<double>(k) + rng.uniform()) / spec.rate;
        r.timestamp = std::min(spec.start + from_seconds(offset), spec.end() - 1);
        r.src_ip = sources[sources.size() == 1 ? 0 : rng.below(sources.size())];
        r.dst_ip = victim;
        r.device_id = spec.target;
        switch (spec.kind) {
            case AttackKind::ARP_SPOOF:
                r.protocol = Protocol::ARP;
                r.length = 42;
                break;
            case AttackKind::TCP_SYN_FLOOD:
                r.protocol = Protocol::TCP;
                r.src_port = ephemeral_port(rng);
                r.dst_port = 80;
                r.length = 60;
                break;
            case AttackKind::UDP_FLOOD:
                r.protocol = Protocol::UDP;
                r.src_port = ephemeral_port(rng);
                r.dst_port = 9;
                r.length = 512;
                break;
            case AttackKind::PING_OF_DEATH:
                r.protocol = Protocol::ICMP;
                r.length = 65000;
                break;
            case AttackKind::PORT_SCAN:
                r.protocol = Protocol::TCP;
                r.src_port = ephemeral_port(rng);
                r.dst_port = static_cast<std::uint16_t>(1 + rng.below(65535));
                r.length = 60;
                break;
            case AttackKind::REFLECTION_SYN:
                r.protocol = Protocol::TCP;
                r.src_port = 80;
                r.dst_port = ephemeral_port(rng);
                r.length = 60;
                break;
            case AttackKind::REFLECTION_SMURF:
                r.protocol = Protocol::ICMP;
                r.length = 98;
                break;
            case AttackKind::REFLECTION_SNMP:
                r.protocol = Protocol::UDP;
                r.src_port = 161;
                r.dst_port = ephemeral_port(rng);
                r.length = 1200;
                break;
            case AttackKind::REFLECTION_SSDP:
                r.protocol = Protocol::UDP;
                r.src_port = 1900;
                r.dst_port = ephemeral_port(rng);
                r.length = 320;
                break;
        }
        out.push_back(std::move(r));
    }
    return out;
}

GroundTruth GroundTruth::from_schedule(const Schedule& schedule, std::span<const std::string> devices, Micros origin,
                                       Micros window_len) {
    if (window_len <= 0) throw ConfigError("window_len", "must be positive");
    const Micros len = std::max<Micros>(schedule.span - origin, 0);
    GroundTruth gt(origin, window_len, static_cast<std::size_t>((len + window_len - 1) / window_len));
    for (const auto& d : devices) gt.labels_[d].assign(gt.windows_, Truth::Benign);
    for (const auto& e : schedule.entries) {
        const Micros lo = std::max<Micros>(e.start - origin, 0);
        const Micros hi = e.end() - origin;
        if (hi <= 0) continue;
        const auto first = static_cast<std::size_t>(lo / window_len);
        const auto last = static_cast<std::size_t>((hi + window_len - 1) / window_len);
        for (std::size_t w = first; w < last; ++w) gt.set(e.target, w, Truth::Attack);
    }
    return gt;
}

void GroundTruth::set(const std::string& device, std::size_t window, Truth t) {
    if (window >= windows_) windows_ = window + 1;
    auto& row = labels_[device];
    if (row.size() < windows_) row.resize(windows_, Truth::Benign);
    row[window] = t;
}

Truth GroundTruth::label(std::string_view device, std::size_t window) const {
    const auto it = labels_.find(std::string(device));
    if (it == labels_.end() || window >= it->second.size()) return Truth::Benign;
    return it->second[window];
}

GroundTruth GroundTruth::parse_csv(std::string_view text, Micros origin, Micros window_len) {
    GroundTruth gt(origin, window_len, 0);
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line) || (++lineno, line != "device_id,window_index,label")) {
        throw Error(ErrorCode::SchemaMismatch, "labels header must be 'device_id,window_index,label'");
    }
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
        if (c2 == std::string::npos) throw RowError(lineno, "expected 3 fields");
        const std::string device = line.substr(0, c1);
        const std::string idx = line.substr(c1 + 1, c2 - c1 - 1);
        const std::string label = line.substr(c2 + 1);
        std::size_t w = 0;
        try {
            std::size_t used = 0;
            w = std::stoul(idx, &used);
            if (used != idx.size()) throw std::invalid_argument(idx);
        } catch (const std::exception&) {
            throw RowError(lineno, "bad window_index '" + idx + "'");
        }
        if (label == "attack") {
            gt.set(device, w, Truth::Attack);
        } else if (label == "benign") {
            gt.set(device, w, Truth::Benign);
        } else {
            throw RowError(lineno, "label must be attack or benign");
        }
    }
    for (auto& [_, row] : gt.labels_) row.resize(gt.windows_, Truth::Benign);
    return gt;
}

std::string GroundTruth::to_csv() const {
    std::string out = "device_id,window_index,label\n";
    for (const auto& [device, row] : labels_) {
        for (std::size_t w = 0; w < row.size(); ++w) {
            out += device + "," + std::to_string(w) + "," + std::string(to_string(row[w])) + "\n";
        }
    }
    return out;
}

Simulation simulate(const Scenario& sc) {
    if (sc.profiles.empty()) throw ConfigError("profiles", "scenario needs at least one device");
    sc.schedule.validate();
    Simulation sim;
    std::vector<std::string> ids;
    for (const auto& p : sc.profiles) {
        p.validate();
        sim.devices.add(p.ip, p.device_id);
        ids.push_back(p.device_id);
    }
    const std::uint64_t benign_seed = derive_seed(sc.seed, 0);
    const std::uint64_t attack_seed = derive_seed(sc.seed, 1);
    for (std::size_t i = 0; i < sc.profiles.size(); ++i) {
        Rng rng(derive_seed(benign_seed, i));
        auto part = generate_benign(sc.profiles[i], sc.schedule.span - sc.origin, rng, sc.origin);
        sim.records.insert(sim.records.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    for (std::size_t j = 0; j < sc.schedule.entries.size(); ++j) {
        Rng rng(derive_seed(attack_seed, j));
        auto part = inject_attack(sc.schedule.entries[j], sc.profiles, rng, sc.shape);
        sim.records.insert(sim.records.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    std::stable_sort(sim.records.begin(), sim.records.end(),
                     [](const PacketRecord& a, const PacketRecord& b) { return a.timestamp < b.timestamp; });
    sim.truth = GroundTruth::from_schedule(sc.schedule, ids, sc.origin, sc.window_len);
    return sim;
}

DeviceProfile default_profile(std::string device_id, Ipv4 ip, std::string device_class) {
    DeviceProfile p;
    p.device_id = std::move(device_id);
    p.device_class = std::move(device_class);
    p.ip = ip;
    p.protocol_mix = {{Protocol::TLS, 0.30}, {Protocol::TCP, 0.25}, {Protocol::UDP, 0.15},
                      {Protocol::DNS, 0.15}, {Protocol::ICMP, 0.10}, {Protocol::ARP, 0.05}};
    p.peers = {{Ipv4::from_octets(192, 168, 1, 1), 0.30},   {Ipv4::from_octets(93, 184, 216, 34), 0.25},
               {Ipv4::from_octets(142, 250, 72, 14), 0.20}, {Ipv4::from_octets(151, 101, 1, 69), 0.15},
               {Ipv4::from_octets(104, 16, 132, 229), 0.10}};
    p.ports = {{443, 0.55}, {80, 0.25}, {8883, 0.10}, {123, 0.10}};
    return p;
}

std::string schedule_to_csv(const Schedule& schedule) {
    std::string out = "kind,rate,start,duration,target\n";
    char buf[160];
    for (const auto& e : schedule.entries) {
        std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,", std::string(to_string(e.kind)).c_str(), e.rate,
                      to_seconds(e.start), to_seconds(e.duration));
        out += buf + e.target + "\n";
    }
    return out;
}

}  // namespace rlids
