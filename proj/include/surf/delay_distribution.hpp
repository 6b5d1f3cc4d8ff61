#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "surf/rng.hpp"

namespace surf {

/// q_i = c / i^(1+alpha) with c = 1 / zeta(1+alpha).
struct ZetaPareto {
    double alpha;
};

/// P(Z >= i) = i^(-alpha). Same tail order as ZetaPareto, exact O(1) inversion.
struct InversePower {
    double alpha;
};

/// P(Z = i) = p (1-p)^(i-1), i >= 1.
struct Geometric {
    double success_prob;
};

/// Finite pmf on {1, ..., m}: pmf[0] is P(Z = 1).
struct Table {
    std::vector<double> pmf;
};

using DistributionSpec = std::variant<ZetaPareto, InversePower, Geometric, Table>;

std::string to_string(const DistributionSpec& spec);

/// Largest delay ever returned by a sampler. Draws beyond it saturate; the
/// probability of that is below 2^-53 * 2^(62 alpha) for every supported law.
inline constexpr std::int64_t kMaxDelay = std::int64_t{1} << 62;

enum class RegimeLabel { Light, Moderate, Heavy };

std::string to_string(RegimeLabel label);

/// Tail regime of a delay law for the k-choice model.
struct Regime {
    RegimeLabel label;
    int k;
    double mean_z;      ///< +inf when E Z diverges
    double mean_min_k;  ///< +inf when E min of k copies diverges
    bool aperiodic;     ///< false flags a periodic Table law
};

/// Immutable discrete law on {1, 2, 3, ...}. Copies share state and are safe
/// to use from several threads at once.
class DelayDistribution {
public:
    static constexpr std::int64_t kDefaultCacheHorizon = std::int64_t{1} << 20;

    /// Throws std::invalid_argument when a parameter is out of range or the
    /// table is malformed.
    explicit DelayDistribution(const DistributionSpec& spec,
                               std::int64_t cache_horizon = kDefaultCacheHorizon);

    /// P(Z >= i); equals 1 for i <= 1.
    double tail(std::int64_t i) const;

    /// P(Z = i); 0 for i < 1.
    double pmf(std::int64_t i) const;

    /// E Z = sum of tail(i); +inf when the series diverges. Finiteness is
    /// decided analytically for the Pareto kinds.
    double mean() const;

    /// Law of the minimum of k independent copies: tail(i)^k.
    DelayDistribution min_of(int k) const;

    /// P(max(Z, W) >= i) = 2 p_i - p_i^2.
    double max_pair_tail(std::int64_t i) const;

    /// Inverse-tail transform: the largest i with tail(i) >= u, for u in (0, 1].
    std::int64_t invert(double u) const;

    std::int64_t sample(UniformStream& stream) const { return invert(stream.next()); }

    /// Regime of this law for the k-choice model (k >= 2).
    Regime classify(int k) const;

    /// Pareto tail index (tail(i) = Theta(i^-a)); nullopt for laws with
    /// geometric or finite tails.
    std::optional<double> tail_exponent() const;

    /// gcd of the first 64 support points with mass above 1e-15.
    std::int64_t support_gcd() const;
    bool aperiodic() const { return support_gcd() == 1; }

    /// Largest i with pmf(i) > 0, or nullopt for unbounded support.
    std::optional<std::int64_t> support_max() const;

    /// The spec this law was built from. min_of() of a ZetaPareto law has no
    /// closed-form spec of its own: spec() is the base law and min_k() the
    /// number of copies. Every other kind reports min_k() == 1.
    const DistributionSpec& spec() const;
    int min_k() const;

    std::int64_t cache_horizon() const;
    std::string describe() const;

    /// q_0 .. q_n with q_0 = 0.
    std::vector<double> pmf_prefix(std::int64_t n) const;

    struct Impl;

private:
    explicit DelayDistribution(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<const Impl> impl_;
};

/// Free-function forms used throughout the toolkit.
inline double tail(const DelayDistribution& d, std::int64_t i) { return d.tail(i); }
inline double mean(const DelayDistribution& d) { return d.mean(); }
inline DelayDistribution min_of_k(const DelayDistribution& d, int k) { return d.min_of(k); }
inline double max_pair_tail(const DelayDistribution& d, std::int64_t i) { return d.max_pair_tail(i); }
inline Regime classify_regime(const DelayDistribution& d, int k) { return d.classify(k); }

/// Hurwitz-type tail sum sum_{j >= x} j^-s for s > 1 and x >= 64, by
/// Euler-Maclaurin with three correction terms.
double power_tail_sum(double s, double x);

/// Riemann zeta(s) for s > 1 to ~1e-15 relative accuracy.
double riemann_zeta(double s);

}  // namespace surf
