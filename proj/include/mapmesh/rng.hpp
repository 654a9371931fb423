#pragma once

#include <cstdint>
#include <limits>

namespace mapmesh::rng {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Hash an ordered tuple of words into one key.
constexpr std::uint64_t key(std::uint64_t a) noexcept { return mix(a); }

template <typename... Rest>
constexpr std::uint64_t key(std::uint64_t a, std::uint64_t b, Rest... rest) noexcept
{
    return key(mix(a) ^ (b * 0xD6E8FEB86659FD93ull + 0x632BE59BD9B4E019ull), rest...);
}

/// Map a word to [0, 1) with 53 bits of resolution.
constexpr double to_unit(std::uint64_t x) noexcept
{
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

/// Stream tags. Each source of randomness draws from its own keyed stream so
/// that adding draws to one purpose never perturbs another.
enum class Purpose : std::uint64_t {
    placement = 1,
    link_rate = 2,
    packet_loss = 3,
    jitter = 4,
    location_error = 5,
    pairs = 6,
    representative = 7,
    synth = 8,
    test = 99,
};

/// Counter-based generator: output i is mix(key ^ mix(i)). Satisfies
/// UniformRandomBitGenerator so it plugs into <random> when needed.
class Stream {
public:
    using result_type = std::uint64_t;

    constexpr Stream() = default;
    constexpr explicit Stream(std::uint64_t k) : key_(k) {}

    template <typename... Ks>
    constexpr Stream(std::uint64_t seed, Purpose p, Ks... ks)
        : key_(key(seed, static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(ks)...))
    {
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept { return mix(key_ ^ mix(counter_++)); }

    constexpr double uniform() noexcept { return to_unit((*this)()); }
    constexpr double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    constexpr bool bernoulli(double p) noexcept { return uniform() < p; }

    /// Uniform integer in [0, n). Lemire's multiply-shift with rejection.
    std::uint64_t below(std::uint64_t n) noexcept
    {
        if (n <= 1) {
            return 0;
        }
        __extension__ using u128 = unsigned __int128;
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const u128 m = static_cast<u128>((*this)()) * n;
            if (static_cast<std::uint64_t>(m) >= threshold) {
                return static_cast<std::uint64_t>(m >> 64);
            }
        }
    }

    constexpr std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

/// One-shot uniform draw for a keyed event.
template <typename... Ks>
constexpr double draw(std::uint64_t seed, Purpose p, Ks... ks) noexcept
{
    return to_unit(mix(key(seed, static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(ks)...)));
}

} // namespace mapmesh::rng
