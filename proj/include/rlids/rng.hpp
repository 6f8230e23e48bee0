#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace rlids {

// xoshiro256** seeded through splitmix64. Used instead of <random>
// distributions so streams are identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 1);

    std::uint64_t next();
    double uniform();                    // [0, 1)
    std::size_t below(std::size_t n);    // [0, n), unbiased
    double exponential(double rate);     // mean 1/rate

    std::array<std::uint64_t, 4> state() const { return s_; }
    void set_state(const std::array<std::uint64_t, 4>& s) { s_ = s; }

private:
    std::array<std::uint64_t, 4> s_{};
};

// Derives an independent sub-stream seed from a parent seed and an ordinal.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t ordinal);

}  // namespace rlids
