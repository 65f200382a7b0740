#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace habsim::rng {

/// Philox4x32-10 counter-based generator (Salmon et al., "Parallel random
/// numbers: as easy as 1, 2, 3"). One block is a pure function of
/// (counter, key), so any path/node/step can be sampled independently of
/// execution order or thread count.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t M0 = 0xD2511F53u;
    constexpr std::uint32_t M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u;
    constexpr std::uint32_t W1 = 0xBB67AE85u;
    for (int round = 0;; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * ctr[2];
        ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
               static_cast<std::uint32_t>(p1),
               static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
               static_cast<std::uint32_t>(p0)};
        if (round == 9) return ctr;
        key[0] += W0;
        key[1] += W1;
    }
}

/// Uniform in (0, 1], 53-bit mantissa from two 32-bit words.
inline double uniform_open_closed(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
    return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

/// Stream identifiers keep independent uses of the same seed disjoint.
enum class Stream : std::uint32_t {
    outer_paths = 1,
    inner_paths = 2,
    node_sampling = 3,
};

/// Standard normal draw addressed by (seed, stream, path, node, substream, step).
/// Box-Muller on one Philox block; deterministic and order-free.
inline double standard_normal(std::uint64_t seed, Stream stream, std::uint32_t path,
                              std::uint32_t node, std::uint32_t substream,
                              std::uint32_t step) {
    const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed),
                                              static_cast<std::uint32_t>(seed >> 32)};
    const std::array<std::uint32_t, 4> ctr = {
        step, substream, path,
        (static_cast<std::uint32_t>(stream) << 24) | (node & 0x00FFFFFFu)};
    const auto block = philox4x32(ctr, key);
    const double u1 = uniform_open_closed(block[0], block[1]);
    const double u2 = uniform_open_closed(block[2], block[3]);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

/// Uniform in [0, 1) addressed like standard_normal; used to pick random nodes.
inline double uniform01(std::uint64_t seed, Stream stream, std::uint32_t path,
                        std::uint32_t node, std::uint32_t substream, std::uint32_t step) {
    const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed),
                                              static_cast<std::uint32_t>(seed >> 32)};
    const std::array<std::uint32_t, 4> ctr = {
        step, substream, path,
        (static_cast<std::uint32_t>(stream) << 24) | (node & 0x00FFFFFFu)};
    const auto block = philox4x32(ctr, key);
    const std::uint64_t bits =
        (static_cast<std::uint64_t>(block[0]) << 32) | block[1];
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace habsim::rng
