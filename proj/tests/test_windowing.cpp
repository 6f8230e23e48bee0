#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>

#include "rlids/error.hpp"
#include "rlids/windowing.hpp"

using namespace rlids;

namespace {

PacketRecord at(double seconds) {
    PacketRecord r;
    r.timestamp = from_seconds(seconds);
    return r;
}

PacketRecord pkt(Protocol p, const char* src, const char* dst, std::optional<std::uint16_t> sport = {},
                 std::optional<std::uint16_t> dport = {}) {
    PacketRecord r;
    r.protocol = p;
    r.src_ip = Ipv4::parse(src);
    r.dst_ip = Ipv4::parse(dst);
    r.src_port = sport;
    r.dst_port = dport;
    return r;
}

Window whole(const std::vector<PacketRecord>& recs) { return Window{0, 0, 10 * kMicrosPerSecond, recs}; }

DeviceMap dev_map() {
    DeviceMap m;
    m.add("192.168.1.10", "cam");
    return m;
}

}  // namespace

TEST_CASE("half-open boundaries") {
    const std::vector recs{at(0), at(299), at(300)};
    const auto w = assign_windows(recs, 300 * kMicrosPerSecond, 0);
    REQUIRE(w.size() == 2);
    CHECK(w[0].records.size() == 2);
    CHECK(w[1].records.size() == 1);
    CHECK(w[1].start == 300 * kMicrosPerSecond);
    CHECK(w[1].end == 600 * kMicrosPerSecond);
}

TEST_CASE("empty stream") { CHECK(assign_windows({}, kMicrosPerSecond, 0).empty()); }

TEST_CASE("gaps are materialized") {
    const std::vector recs{at(10), at(910)};
    const auto w = assign_windows(recs, 300 * kMicrosPerSecond, 0);
    REQUIRE(w.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(w[i].index == i);
    CHECK(w[1].records.empty());
    CHECK(w[2].records.empty());
    CHECK(w[3].records.size() == 1);
}

TEST_CASE("window input errors") {
    const std::vector unsorted{at(5), at(4)};
    try {
        assign_windows(unsorted, kMicrosPerSecond, 0);
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnsortedInput);
    }
    const std::vector early{at(1)};
    CHECK_THROWS_AS(assign_windows(early, kMicrosPerSecond, 2 * kMicrosPerSecond), Error);
    CHECK_THROWS_AS(assign_windows(early, 0, 0), Error);
}

TEST_CASE("default origin floors to the window length") {
    const std::vector recs{at(1234.5), at(1300)};
    CHECK(default_origin(recs, 10 * kMicrosPerSecond) == 1230 * kMicrosPerSecond);
}

TEST_CASE("windows partition the stream") {
    std::vector<PacketRecord> recs;
    for (int i = 0; i < 1000; ++i) recs.push_back(at(i * 0.37));
    const auto w = assign_windows(recs, 7 * kMicrosPerSecond, 0);
    std::size_t total = 0;
    for (const auto& win : w) {
        total += win.records.size();
        for (const auto& r : win.records) {
            CHECK(r.timestamp >= win.start);
            CHECK(r.timestamp < win.end);
        }
    }
    CHECK(total == recs.size());
}

TEST_CASE("protocol distribution") {
    std::vector<PacketRecord> recs;
    for (int i = 0; i < 3; ++i) recs.push_back(pkt(Protocol::ARP, "192.168.1.1", "192.168.1.10"));
    recs.push_back(pkt(Protocol::TCP, "192.168.1.10", "8.8.8.8", 40000, 80));
    const auto d = build_distribution(whole(recs), FeatureKind::protocol(), "cam", dev_map());
    REQUIRE(d);
    CHECK(d->distinct_count() == 2);
    CHECK(d->support == std::vector<std::uint32_t>{static_cast<std::uint32_t>(Protocol::ARP),
                                                   static_cast<std::uint32_t>(Protocol::TCP)});
    CHECK(d->probs == std::vector{0.75, 0.25});
    CHECK(d->total_count == 4);
}

TEST_CASE("sent ports take the remote port") {
    std::vector<PacketRecord> recs;
    for (int i = 0; i < 10; ++i) {
        recs.push_back(pkt(Protocol::TCP, "192.168.1.10", "8.8.8.8", static_cast<std::uint16_t>(40000 + i), 80));
    }
    const auto d = build_distribution(whole(recs), FeatureKind{FeatureType::PORT, Side::SENT}, "cam", dev_map());
    REQUIRE(d);
    CHECK(d->support == std::vector<std::uint32_t>{80});
    CHECK(d->probs == std::vector{1.0});
    CHECK_FALSE(build_distribution(whole(recs), FeatureKind{FeatureType::PORT, Side::RECEIVED}, "cam", dev_map()));
}

TEST_CASE("received source addresses against a brute-force count") {
    const char* srcs[] = {"1.1.1.1", "1.1.1.1", "2.2.2.2", "1.1.1.1", "3.3.3.3", "2.2.2.2", "4.4.4.4", "1.1.1.1"};
    std::vector<PacketRecord> recs;
    for (const char* s : srcs) recs.push_back(pkt(Protocol::ICMP, s, "192.168.1.10"));
    recs.push_back(pkt(Protocol::ICMP, "192.168.1.10", "9.9.9.9"));  // sent, not counted

    std::map<std::uint32_t, int> oracle;
    for (const char* s : srcs) ++oracle[Ipv4::parse(s)->value];

    const auto d = build_distribution(whole(recs), FeatureKind{FeatureType::SRC_IP, Side::RECEIVED}, "cam", dev_map());
    REQUIRE(d);
    REQUIRE(d->support.size() == oracle.size());
    std::size_t i = 0;
    for (const auto& [v, n] : oracle) {
        CHECK(d->support[i] == v);
        CHECK(d->probs[i] == doctest::Approx(n / 8.0).epsilon(1e-15));
        ++i;
    }
    CHECK(d->probs == std::vector{0.5, 0.25, 0.125, 0.125});
}

TEST_CASE("unmeasured window is nullopt") {
    const std::vector<PacketRecord> recs{pkt(Protocol::ICMP, "5.5.5.5", "6.6.6.6")};
    CHECK_FALSE(build_distribution(whole(recs), FeatureKind::protocol(), "cam", dev_map()));
    CHECK_FALSE(build_distribution(whole({}), FeatureKind::protocol(), "cam", dev_map()));
}

TEST_CASE("resolved and mapped builds agree") {
    std::vector<PacketRecord> recs;
    for (int i = 0; i < 50; ++i) {
        recs.push_back(pkt(i % 3 ? Protocol::UDP : Protocol::TCP, i % 2 ? "192.168.1.10" : "10.0.0.7",
                           i % 2 ? "10.0.0.8" : "192.168.1.10", static_cast<std::uint16_t>(1000 + i % 7),
                           static_cast<std::uint16_t>(2000 + i % 5)));
        recs.back().timestamp = from_seconds(i);
    }
    const auto map = dev_map();
    const std::vector<std::string> devices{"cam"};
    const auto resolved = ResolvedRecords::resolve(recs, map, devices);
    const auto windows = assign_windows(recs, 10 * kMicrosPerSecond, 0);
    for (FeatureType t : {FeatureType::PROTOCOL, FeatureType::SRC_IP, FeatureType::DST_IP, FeatureType::PORT}) {
        for (Side s : {Side::SENT, Side::RECEIVED}) {
            const FeatureKind f{t, s};
            for (const auto& w : windows) {
                const std::size_t first = static_cast<std::size_t>(w.records.data() - recs.data());
                const auto a = build_distribution(w, f, "cam", map);
                const auto b = build_distribution(w, first, f, 0, resolved);
                REQUIRE(a.has_value() == b.has_value());
                if (a) {
                    CHECK(a->support == b->support);
                    CHECK(a->counts == b->counts);
                }
            }
        }
    }
}

TEST_CASE("distribution invariants") {
    const std::vector<std::pair<std::uint32_t, std::size_t>> counts{{7, 3}, {2, 0}, {9, 1}, {1, 6}};
    const auto d = FeatureDistribution::from_counts(FeatureKind::protocol(), counts);
    CHECK(d.support == std::vector<std::uint32_t>{1, 7, 9});
    CHECK(d.total_count == 10);
    double sum = 0.0;
    for (double p : d.probs) {
        CHECK(p > 0.0);
        sum += p;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);

    const auto pooled = FeatureDistribution::pool(std::vector{d, d});
    REQUIRE(pooled);
    CHECK(pooled->total_count == 20);
    CHECK(pooled->probs == d.probs);
    CHECK_FALSE(FeatureDistribution::pool({}));
}

TEST_CASE("feature names") {
    CHECK(to_string(FeatureKind::protocol()) == "PROTOCOL");
    CHECK(to_string(FeatureKind{FeatureType::PORT, Side::RECEIVED}) == "PORT:RECEIVED");
    CHECK(parse_feature("SRC_IP:SENT") == FeatureKind{FeatureType::SRC_IP, Side::SENT});
    CHECK_FALSE(parse_feature("PORT"));
    CHECK_FALSE(parse_feature("FLAGS:SENT"));
}
