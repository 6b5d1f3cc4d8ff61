#pragma once

#include <cstdint>
#include <random>

namespace surf {

/// SplitMix64 finalizer (Steele, Lea, Flood 2014). Used for seed derivation
/// and as the counter-based generator behind i.i.d. leaf values.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Fixed stream-splitting constants. Changing these changes every trajectory.
inline constexpr std::uint64_t kDelayStream = 0x64656c6179730001ULL;  // "delays"
inline constexpr std::uint64_t kLeafStream = 0x6c65617665730002ULL;   // "leaves"
inline constexpr std::uint64_t kRunStream = 0x72756e7300000003ULL;    // "runs"

/// Derives an independent child seed from (parent, label).
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t label) noexcept {
    return mix64(mix64(parent) ^ label);
}

/// Per-run seed for run `index` of an experiment with `master` seed.
constexpr std::uint64_t run_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return derive_seed(derive_seed(master, kRunStream), index);
}

/// Maps 64 random bits to a double in (0, 1] with 53-bit resolution.
constexpr double bits_to_unit_open_closed(std::uint64_t bits) noexcept {
    return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

/// Maps 64 random bits to a double in [0, 1) with 53-bit resolution.
constexpr double bits_to_unit_closed_open(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Deterministic uniform stream for delay sampling. The conversion from raw
/// engine output is done by hand so results do not depend on the standard
/// library's distribution implementations.
class UniformStream {
public:
    explicit UniformStream(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on (0, 1].
    double next() { return bits_to_unit_open_closed(engine_()); }

    std::uint64_t next_bits() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace surf
