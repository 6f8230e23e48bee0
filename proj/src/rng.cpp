#include "rlids/rng.hpp"

#include <cmath>

namespace rlids {
namespace {

std::uint64_t splitmix(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
    for (auto& w : s_) w = splitmix(seed);
}

std::uint64_t Rng::next() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::size_t Rng::below(std::size_t n) {
    // Lemire's multiply-shift with rejection.
    const std::uint64_t bound = n;
    const std::uint64_t threshold = (0 - bound) % bound;
    while (true) {
        __extension__ using u128 = unsigned __int128;
        const u128 m = static_cast<u128>(next()) * bound;
        if (static_cast<std::uint64_t>(m) >= threshold) return static_cast<std::size_t>(m >> 64);
    }
}

double Rng::exponential(double rate) { return -std::log1p(-uniform()) / rate; }

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t ordinal) {
    std::uint64_t x = seed ^ (ordinal * 0xd1b54a32d192ed03ULL);
    splitmix(x);
    return splitmix(x);
}

}  // namespace rlids
