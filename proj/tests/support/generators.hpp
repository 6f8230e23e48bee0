#pragma once

#include <string>
#include <vector>

#include "rlids/packet.hpp"
#include "rlids/rng.hpp"

namespace rlids::testing {

// Random record satisfying the record invariants, sorted timestamps not implied.
inline PacketRecord random_record(Rng& rng) {
    PacketRecord r;
    r.timestamp = static_cast<Micros>(rng.below(4'000'000'000'000ULL));
    r.protocol = kAllProtocols[rng.below(kAllProtocols.size())];
    if (rng.uniform() < 0.9) r.src_ip = Ipv4{static_cast<std::uint32_t>(rng.next())};
    if (rng.uniform() < 0.9) r.dst_ip = Ipv4{static_cast<std::uint32_t>(rng.next())};
    if (carries_ports(r.protocol)) {
        r.src_port = static_cast<std::uint16_t>(rng.below(65536));
        r.dst_port = static_cast<std::uint16_t>(rng.below(65536));
    }
    r.length = static_cast<std::uint32_t>(rng.below(70000));
    static const char* const ids[] = {"unknown", "cam", "plug-2", "hub_a", "dev1"};
    r.device_id = ids[rng.below(5)];
    return r;
}

inline std::vector<PacketRecord> random_records(Rng& rng, std::size_t max_len) {
    std::vector<PacketRecord> out(rng.below(max_len + 1));
    for (auto& r : out) r = random_record(rng);
    return out;
}

}  // namespace rlids::testing
