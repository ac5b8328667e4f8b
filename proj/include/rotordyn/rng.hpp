#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace rotordyn {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// A stream is fully determined by a 64-bit key and a 128-bit counter, so any
/// draw can be regenerated without replaying the ones before it.
class Philox {
public:
    using Counter = std::array<std::uint32_t, 4>;

    explicit Philox(std::uint64_t key) : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

    [[nodiscard]] Counter operator()(Counter ctr) const
    {
        auto k = key_;
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                k[0] += 0x9E3779B9u;
                k[1] += 0xBB67AE85u;
            }
            const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k[0], static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k[1], static_cast<std::uint32_t>(p0)};
        }
        return ctr;
    }

private:
    std::array<std::uint32_t, 2> key_;
};

/// Sequential draws from one Philox stream, addressed by (stream, block).
///
/// `stream` occupies the high counter words, so distinct streams never
/// overlap; each call to `next_uniform_pair` consumes one 128-bit block.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t start_block = 0)
        : philox_(seed), stream_(stream), block_(start_block)
    {
    }

    /// Two uniform doubles in (0, 1), 53 random bits each.
    std::array<double, 2> next_uniform_pair()
    {
        const auto r = philox_({static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                                static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)});
        ++block_;
        return {to_unit(r[0], r[1]), to_unit(r[2], r[3])};
    }

    double uniform()
    {
        if (!has_cached_uniform_) {
            cached_ = next_uniform_pair();
            has_cached_uniform_ = true;
            return cached_[0];
        }
        has_cached_uniform_ = false;
        return cached_[1];
    }

    /// Standard normal via Box-Muller on one block; both outputs are used.
    double normal()
    {
        if (has_spare_normal_) {
            has_spare_normal_ = false;
            return spare_normal_;
        }
        const auto [u1, u2] = next_uniform_pair();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_normal_ = r * std::sin(a);
        has_spare_normal_ = true;
        return r * std::cos(a);
    }

private:
    static double to_unit(std::uint32_t hi, std::uint32_t lo)
    {
        const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    Philox philox_;
    std::uint64_t stream_;
    std::uint64_t block_;
    std::array<double, 2> cached_{};
    bool has_cached_uniform_ = false;
    double spare_normal_ = 0.0;
    bool has_spare_normal_ = false;
};

/// Folds several integers into one stream id (splitmix64 finalizer chain).
inline std::uint64_t stream_id(std::initializer_list<std::uint64_t> parts)
{
    std::uint64_t h = 0x243F6A8885A308D3ull;
    for (auto p : parts) {
        h ^= p + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
        h = (h ^ (h >> 30)) * 0xBF58476D1CE4E5B9ull;
        h = (h ^ (h >> 27)) * 0x94D049BB133111EBull;
        h ^= h >> 31;
    }
    return h;
}

} // namespace rotordyn
