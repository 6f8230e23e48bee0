#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "rlids/ingest.hpp"
#include "support/generators.hpp"

using namespace rlids;

namespace {

std::vector<std::byte> fixture(const std::string& name) { return read_binary_file(std::string(RLIDS_TEST_DATA) + "/" + name); }

Ipv4 ip(const char* s) { return *Ipv4::parse(s); }

}  // namespace

TEST_CASE("empty input is not a capture") {
    const auto cap = parse_pcap_stream({});
    REQUIRE(cap.error);
    CHECK(cap.error->code == ErrorCode::BadMagic);
    CHECK(cap.error->offset == 0);
    CHECK(cap.records.empty());
}

TEST_CASE("garbage magic") {
    const std::vector<std::byte> junk(24, std::byte{0x42});
    const auto cap = parse_pcap_stream(junk);
    REQUIRE(cap.error);
    CHECK(cap.error->code == ErrorCode::BadMagic);
}

TEST_CASE("single DNS frame") {
    const auto cap = parse_pcap_stream(fixture("dns_udp.pcap"));
    REQUIRE(cap.ok());
    REQUIRE(cap.records.size() == 1);
    const auto& r = cap.records[0];
    CHECK(r.protocol == Protocol::DNS);
    CHECK(r.length == 60);
    CHECK(r.src_ip == ip("10.0.0.2"));
    CHECK(r.dst_ip == ip("10.0.0.1"));
    CHECK(r.src_port == 5000);
    CHECK(r.dst_port == 53);
    CHECK(r.timestamp == 1'700'000'000'250'000);
    CHECK(r.device_id == "unknown");
}

TEST_CASE("device attribution from the map") {
    DeviceMap map;
    map.add("10.0.0.1", "resolver");
    const auto cap = parse_pcap_stream(fixture("dns_udp.pcap"), map);
    REQUIRE(cap.records.size() == 1);
    CHECK(cap.records[0].device_id == "resolver");
}

TEST_CASE("two frames in either byte order") {
    for (const char* name : {"two_packets.pcap", "two_packets_be.pcap"}) {
        CAPTURE(name);
        const auto cap = parse_pcap_stream(fixture(name));
        REQUIRE(cap.ok());
        REQUIRE(cap.records.size() == 2);
        CHECK(cap.frames_total == 2);
        const auto& tls = cap.records[0];
        CHECK(tls.protocol == Protocol::TLS);
        CHECK(tls.src_port == 50000);
        CHECK(tls.dst_port == 443);
        CHECK(tls.dst_ip == ip("93.184.216.34"));
        CHECK(tls.length == 60);
        const auto& arp = cap.records[1];
        CHECK(arp.protocol == Protocol::ARP);
        CHECK(arp.src_ip == ip("192.168.1.1"));
        CHECK(arp.dst_ip == ip("192.168.1.10"));
        CHECK_FALSE(arp.src_port);
        CHECK(arp.timestamp == 1'700'000'001'500'000);
    }
}

TEST_CASE("truncated second frame reports its header offset") {
    const auto cap = parse_pcap_stream(fixture("truncated.pcap"));
    REQUIRE(cap.error);
    CHECK(cap.error->code == ErrorCode::Truncated);
    // 24-byte global header + 16-byte record header + 60-byte frame.
    CHECK(cap.error->offset == 100);
    CHECK(cap.error->message.find("100") != std::string::npos);
    REQUIRE(cap.records.size() == 1);
    CHECK(cap.records[0].protocol == Protocol::TLS);
}

TEST_CASE("cut inside the record header") {
    auto bytes = fixture("two_packets.pcap");
    bytes.resize(100 + 7);
    const auto cap = parse_pcap_stream(bytes);
    REQUIRE(cap.error);
    CHECK(cap.error->code == ErrorCode::Truncated);
    CHECK(cap.error->offset == 100);
    CHECK(cap.records.size() == 1);
}

TEST_CASE("cut inside the global header") {
    auto bytes = fixture("two_packets.pcap");
    bytes.resize(10);
    const auto cap = parse_pcap_stream(bytes);
    REQUIRE(cap.error);
    CHECK(cap.error->code == ErrorCode::Truncated);
    CHECK(cap.error->offset == 0);
}

TEST_CASE("non-ethernet link type") {
    auto bytes = fixture("dns_udp.pcap");
    bytes[20] = std::byte{101};
    const auto cap = parse_pcap_stream(bytes);
    REQUIRE(cap.error);
    CHECK(cap.error->code == ErrorCode::InputError);
    CHECK(cap.error->offset == 20);
}

TEST_CASE("header-only csv") {
    CHECK(parse_summary_csv(std::string(kSummaryCsvHeader) + "\n").empty());
}

TEST_CASE("ARP row") {
    const auto recs = parse_summary_csv(std::string(kSummaryCsvHeader) + "\n1.000000,10.0.0.2,10.0.0.1,,,ARP,42,dev1\n");
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].timestamp == kMicrosPerSecond);
    CHECK(recs[0].protocol == Protocol::ARP);
    CHECK_FALSE(recs[0].src_port);
    CHECK_FALSE(recs[0].dst_port);
    CHECK(recs[0].length == 42);
    CHECK(recs[0].device_id == "dev1");
}

TEST_CASE("write one ARP record") {
    PacketRecord r;
    r.timestamp = kMicrosPerSecond;
    r.src_ip = ip("10.0.0.2");
    r.dst_ip = ip("10.0.0.1");
    r.protocol = Protocol::ARP;
    r.length = 42;
    r.device_id = "dev1";
    CHECK(write_summary_csv(std::vector{r}) ==
          std::string(kSummaryCsvHeader) + "\n1.000000,10.0.0.2,10.0.0.1,,,ARP,42,dev1\n");
    CHECK(write_summary_csv({}) == std::string(kSummaryCsvHeader) + "\n");
}

TEST_CASE("row errors name the line") {
    const std::string h = std::string(kSummaryCsvHeader) + "\n";
    auto line_of = [&](const std::string& body) -> std::size_t {
        try {
            parse_summary_csv(h + body);
        } catch (const RowError& e) {
            return e.line();
        }
        return 0;
    };
    CHECK(line_of("1.0,10.0.0.2,10.0.0.1,,,ARP,42,d\n2.0,10.0.0.2,10.0.0.1,,,TCP,60,d\n") == 3);
    CHECK(line_of("1.0,10.0.0.2,10.0.0.1,,,ARP,42\n") == 2);
    CHECK(line_of("x,10.0.0.2,10.0.0.1,,,ARP,42,d\n") == 2);
    CHECK(line_of("1.0,10.0.0.256,10.0.0.1,,,ARP,42,d\n") == 2);
    CHECK(line_of("1.0,10.0.0.2,10.0.0.1,1,70000,UDP,42,d\n") == 2);
    CHECK(line_of("1.0,10.0.0.2,10.0.0.1,,,SCTP,42,d\n") == 2);
    CHECK(line_of("1.0,10.0.0.2,10.0.0.1,,,ARP,-1,d\n") == 2);
    CHECK(line_of("1.0,10.0.0.2,10.0.0.1,,,ARP,42,\n") == 2);
    CHECK(line_of("1.0,10.0.0.2,10.0.0.1,5,6,ARP,42,d\n") == 2);
    CHECK(line_of("1.0000001,10.0.0.2,10.0.0.1,,,ARP,42,d\n") == 2);
}

TEST_CASE("wrong header") {
    try {
        parse_summary_csv("time,src\n");
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SchemaMismatch);
    }
    CHECK_THROWS_AS(parse_summary_csv(""), Error);
}

TEST_CASE("CRLF input is accepted") {
    const auto recs = parse_summary_csv(std::string(kSummaryCsvHeader) + "\r\n2.5,,,,,OTHER,10,x\r\n");
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].timestamp == 2'500'000);
}

TEST_CASE("csv round-trip on generated record sets") {
    Rng rng(20260914);
    for (int i = 0; i < 1000; ++i) {
        const auto recs = testing::random_records(rng, 40);
        const auto back = parse_summary_csv(write_summary_csv(recs));
        REQUIRE(back == recs);
    }
}

TEST_CASE("device map csv") {
    const auto map = DeviceMap::parse_csv("address,device_id\n192.168.1.10,cam\n02:00:00:00:00:02,cam\n192.168.1.11,plug\n");
    CHECK(map.size() == 3);
    REQUIRE(map.lookup(ip("192.168.1.11")));
    CHECK(*map.lookup(ip("192.168.1.11")) == "plug");
    CHECK(map.devices() == std::vector<std::string>{"cam", "plug"});
    CHECK_THROWS_AS(DeviceMap::parse_csv("address,device_id\n192.168.1.10,cam\n192.168.1.10,plug\n"), Error);
}

TEST_CASE("attribution prefers the destination") {
    DeviceMap map;
    map.add("192.168.1.10", "cam");
    map.add("192.168.1.11", "plug");
    PacketRecord r;
    r.src_ip = ip("192.168.1.10");
    r.dst_ip = ip("192.168.1.11");
    CHECK(attribute_device(map, r) == "plug");
    r.dst_ip = ip("8.8.8.8");
    CHECK(attribute_device(map, r) == "cam");
    r.src_ip.reset();
    r.dst_ip.reset();
    CHECK(attribute_device(map, r) == "unknown");
}
