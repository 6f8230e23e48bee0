"""Writes the pcap fixtures used by test_ingest. Run with --verify to decode
them back through scapy."""
import struct
import sys


def mac(s):
    return bytes(int(x, 16) for x in s.split(":"))


def ip(s):
    return bytes(int(x) for x in s.split("."))


def checksum(b):
    if len(b) % 2:
        b += b"\0"
    s = sum(struct.unpack("!%dH" % (len(b) // 2), b))
    while s >> 16:
        s = (s & 0xFFFF) + (s >> 16)
    return ~s & 0xFFFF


def ipv4(src, dst, proto, payload, frag=0):
    hdr = struct.pack("!BBHHHBBH4s4s", 0x45, 0, 20 + len(payload), 1, frag, 64, proto, 0, ip(src), ip(dst))
    hdr = hdr[:10] + struct.pack("!H", checksum(hdr)) + hdr[12:]
    return hdr + payload


def eth(dst, src, ethertype, payload):
    frame = mac(dst) + mac(src) + struct.pack("!H", ethertype) + payload
    return frame + b"\0" * max(0, 60 - len(frame))


def udp(sport, dport, data):
    return struct.pack("!HHHH", sport, dport, 8 + len(data), 0) + data


def tcp(sport, dport, flags=0x02):
    return struct.pack("!HHIIBBHHH", sport, dport, 0, 0, 5 << 4, flags, 65535, 0, 0)


def arp(sender_mac, sender_ip, target_ip):
    return struct.pack("!HHBBH6s4s6s4s", 1, 0x0800, 6, 4, 2, mac(sender_mac), ip(sender_ip), b"\0" * 6, ip(target_ip))


def pcap(frames, big_endian=False):
    e = ">" if big_endian else "<"
    out = struct.pack(e + "IHHiIII", 0xA1B2C3D4, 2, 4, 0, 0, 65535, 1)
    for ts_s, ts_us, f in frames:
        out += struct.pack(e + "IIII", ts_s, ts_us, len(f), len(f)) + f
    return out


A = "02:00:00:00:00:01"
B = "02:00:00:00:00:02"

dns = eth(A, B, 0x0800, ipv4("10.0.0.2", "10.0.0.1", 17, udp(5000, 53, b"\x12\x34" + b"\0" * 10)))
tls = eth(A, B, 0x0800, ipv4("192.168.1.10", "93.184.216.34", 6, tcp(50000, 443)))
arp_reply = eth("ff:ff:ff:ff:ff:ff", B, 0x0806, arp(B, "192.168.1.1", "192.168.1.10"))

fixtures = {
    "dns_udp.pcap": pcap([(1700000000, 250000, dns)]),
    "two_packets.pcap": pcap([(1700000000, 0, tls), (1700000001, 500000, arp_reply)]),
    "two_packets_be.pcap": pcap([(1700000000, 0, tls), (1700000001, 500000, arp_reply)], big_endian=True),
}
# Second frame cut short: 24-byte global header, 16 + len(tls) for frame 1.
full = fixtures["two_packets.pcap"]
fixtures["truncated.pcap"] = full[: 24 + 16 + len(tls) + 16 + 10]

if __name__ == "__main__":
    for name, data in fixtures.items():
        with open(name, "wb") as f:
            f.write(data)
        print(name, len(data), "bytes")
    print("truncated record header offset:", 24 + 16 + len(tls))
    if "--verify" in sys.argv:
        from scapy.all import rdpcap

        for name in ("dns_udp.pcap", "two_packets.pcap", "two_packets_be.pcap"):
            for p in rdpcap(name):
                print(name, float(p.time), p.summary(), len(p))
