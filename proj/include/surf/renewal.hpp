#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "surf/delay_distribution.hpp"

namespace surf {

/// r_0 .. r_N of the renewal recursion r_n = sum_{i=1}^n q_i r_{n-i}, r_0 = 1.
/// For the min-of-k law this is v_n = P(0 in S_n).
struct RenewalSequence {
    std::vector<double> values;
    std::vector<double> partial_square_sums;  ///< sum_{i <= n} r_i^2
    double limit_prediction = 0.0;            ///< 1 / E Z, or 0 when E Z = inf
    bool aperiodic = true;
    std::string source;                       ///< describe() of the law

    std::int64_t n_max() const { return static_cast<std::int64_t>(values.size()) - 1; }
    double operator[](std::int64_t n) const { return values[static_cast<std::size_t>(n)]; }
};

enum class RenewalMethod {
    Auto,    ///< Direct below kFastPathThreshold, divide-and-conquer above.
    Direct,  ///< O(N^2) reference.
    Fast,    ///< O(N log^2 N) divide-and-conquer with FFT block products.
};

inline constexpr std::int64_t kFastPathThreshold = 4096;

RenewalSequence renewal_sequence(const DelayDistribution& dist, std::int64_t n_max,
                                 RenewalMethod method = RenewalMethod::Auto);

/// Raw recursion on an explicit pmf q_0..q_N (q_0 ignored).
std::vector<double> renewal_direct(std::span<const double> q);
std::vector<double> renewal_fast(std::span<const double> q);

/// max_n |r_n - sum_{i=1}^n q_i r_{n-i}| over n in [1, last] (last < 0: all).
double reconstruction_error(std::span<const double> r, std::span<const double> q, std::int64_t last = -1);

struct RenewalLimit {
    double value;    ///< 1 / E Z when finite, else 0
    bool aperiodic;  ///< false: the limit statement does not apply
};

RenewalLimit renewal_limit(const DelayDistribution& dist);

/// Least-squares slope of log r_n against log n over [first, last].
/// Throws std::invalid_argument if the window leaves the sequence or holds a
/// nonpositive value.
double decay_exponent_fit(const RenewalSequence& seq, std::int64_t first, std::int64_t last);

enum class SeriesVerdict { Converged, Diverged, Inconclusive };

std::string to_string(SeriesVerdict v);

struct SquaredSumReport {
    SeriesVerdict verdict;
    double partial;        ///< sum_{n <= n_max} r_n^2
    double growth_rate;    ///< fitted exponent of r_n^2 over the last decade
    double fit_residual;   ///< RMS residual of the log-log fit
};

/// Margin below -1 the fitted exponent of r_n^2 must clear for "converged".
inline constexpr double kSquaredSumMargin = 0.05;
/// RMS log-residual above which the fit is considered unreliable.
inline constexpr double kSquaredSumMaxResidual = 0.1;

/// Convergence verdict for sum r_n^2 from the decay of r_n over
/// [n_max / 10, n_max]. Requires n_max >= 100.
SquaredSumReport squared_sum_diagnostic(const RenewalSequence& seq);

}  // namespace surf
