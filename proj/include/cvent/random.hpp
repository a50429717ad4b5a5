#pragma once

// Counter-based random numbers. Every draw is a pure function of
// (key, counter), so any record or sample can be generated independently and
// in any order.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace cvent {

/// Philox4x32 with 10 rounds (Salmon et al., "Parallel random numbers: as
/// easy as 1, 2, 3", SC 2011).
class Philox4x32 {
  public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    explicit constexpr Philox4x32(Key key) : key_(key) {}
    explicit constexpr Philox4x32(std::uint64_t seed)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)}
    {
    }

    constexpr Counter operator()(Counter ctr) const
    {
        Key k = key_;
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                k[0] += kWeyl0;
                k[1] += kWeyl1;
            }
            ctr = single_round(ctr, k);
        }
        return ctr;
    }

  private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static constexpr Counter single_round(const Counter& c, const Key& k)
    {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }

    Key key_;
};

/// SplitMix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Child seed for (parent, index) within a named stream.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index, std::uint64_t stream = 0)
{
    return mix64(mix64(parent ^ mix64(stream)) + index);
}

/// (0, 1) uniform from the top 52 bits; the half-step offset keeps both
/// endpoints out (52 bits so that 1 - 2^-53 stays representable).
constexpr double to_open_unit(std::uint64_t bits)
{
    return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

/// Random stream keyed by a seed, addressed by (record, sample, lane).
class CounterRng {
  public:
    explicit constexpr CounterRng(std::uint64_t seed) : engine_(seed) {}

    std::array<std::uint64_t, 2> bits(std::uint32_t record, std::uint32_t sample, std::uint32_t lane = 0) const
    {
        const auto out = engine_({sample, record, lane, 0u});
        return {static_cast<std::uint64_t>(out[0]) << 32 | out[1],
                static_cast<std::uint64_t>(out[2]) << 32 | out[3]};
    }

    /// Two independent standard normals (Box-Muller).
    std::pair<double, double> normal_pair(std::uint32_t record, std::uint32_t sample, std::uint32_t lane = 0) const
    {
        const auto b = bits(record, sample, lane);
        const double radius = std::sqrt(-2.0 * std::log(to_open_unit(b[0])));
        const double angle = 2.0 * std::numbers::pi * to_open_unit(b[1]);
        return {radius * std::cos(angle), radius * std::sin(angle)};
    }

  private:
    Philox4x32 engine_;
};

}  // namespace cvent
