#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace diffsym {

// Counter-based generator (Philox 4x32, 10 rounds). Output for a given
// (key, counter) pair is a pure function of its inputs, so draws can be
// addressed by (seed, path, step) and never depend on evaluation order.
namespace rng_detail {

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(0xD2511F53u, ctr[0], hi0, lo0);
        mulhilo(0xCD9E8D57u, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += 0x9E3779B9u;
        key[1] += 0xBB67AE85u;
    }
    return ctr;
}

inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
    std::uint64_t x = (static_cast<std::uint64_t>(hi) << 32) | lo;
    // strictly inside (0, 1); safe as a log argument
    return ((x >> 11) + 0.5) * 0x1p-53;
}

}  // namespace rng_detail

// Standard normal draws addressed by (seed, path, step, index). One Philox
// block yields two normals via Box-Muller.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t path)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          path_lo_(static_cast<std::uint32_t>(path)),
          path_hi_(static_cast<std::uint32_t>(path >> 32)) {}

    void fill(std::uint64_t step, double* out, std::size_t count) const {
        for (std::size_t i = 0; i < count; i += 2) {
            auto block = rng_detail::philox4x32(
                {static_cast<std::uint32_t>(step),
                 static_cast<std::uint32_t>(step >> 32) ^ path_hi_, path_lo_,
                 static_cast<std::uint32_t>(i / 2)},
                key_);
            double u1 = rng_detail::to_unit(block[0], block[1]);
            double u2 = rng_detail::to_unit(block[2], block[3]);
            double r = std::sqrt(-2.0 * std::log(u1));
            double a = 6.283185307179586476925287 * u2;
            out[i] = r * std::cos(a);
            if (i + 1 < count) out[i + 1] = r * std::sin(a);
        }
    }

    std::vector<double> draw(std::uint64_t step, std::size_t count) const {
        std::vector<double> v(count);
        fill(step, v.data(), count);
        return v;
    }

private:
    std::array<std::uint32_t, 2> key_;
    std::uint32_t path_lo_, path_hi_;
};

}  // namespace diffsym
