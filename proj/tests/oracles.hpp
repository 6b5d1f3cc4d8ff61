#pragma once

// Reference computations that share no code with the library. They favour
// plain loops over speed and use Boost only for special functions.

#include <boost/math/special_functions/zeta.hpp>
#include <cmath>
#include <cstdint>
#include <vector>

namespace surf::testing {

/// tail[i] = P(Z >= i) for i in [0, n + 1] under q_i proportional to
/// i^-(1 + alpha), from zeta(1 + alpha) minus a running head sum.
inline std::vector<double> zeta_tail_table(double alpha, std::int64_t n) {
    const double s = 1.0 + alpha;
    const double z = boost::math::zeta(s);
    std::vector<double> tail(static_cast<std::size_t>(n) + 2, 1.0);
    long double head = 0.0L;
    for (std::int64_t i = 2; i <= n + 1; ++i) {
        head += std::pow(static_cast<long double>(i - 1), -static_cast<long double>(s));
        tail[static_cast<std::size_t>(i)] = static_cast<double>((static_cast<long double>(z) - head) / z);
    }
    return tail;
}

inline std::vector<double> geometric_tail_table(double p, std::int64_t n) {
    std::vector<double> tail(static_cast<std::size_t>(n) + 2, 1.0);
    for (std::int64_t i = 2; i <= n + 1; ++i) tail[static_cast<std::size_t>(i)] = std::pow(1.0 - p, static_cast<double>(i - 1));
    return tail;
}

/// r_0 = 1, r_n = sum_{i=1}^n q_i r_{n-i}; quadratic time.
inline std::vector<double> renewal_oracle(const std::vector<double>& q) {
    std::vector<double> r(q.size(), 0.0);
    r[0] = 1.0;
    for (std::size_t n = 1; n < q.size(); ++n) {
        long double acc = 0.0L;
        for (std::size_t i = 1; i <= n; ++i) acc += static_cast<long double>(q[i]) * r[n - i];
        r[n] = static_cast<double>(acc);
    }
    return r;
}

/// E J_n = sum_{m=1}^n v_{n-m} P(max of k delays >= m), with v the renewal
/// sequence of the minimum of k delays. `tail` must cover [0, n + 1].
inline double expected_j_oracle(const std::vector<double>& tail, int k, std::int64_t n) {
    std::vector<double> q_min(static_cast<std::size_t>(n) + 1, 0.0);
    for (std::int64_t i = 1; i <= n; ++i)
        q_min[static_cast<std::size_t>(i)] =
            std::pow(tail[static_cast<std::size_t>(i)], k) - std::pow(tail[static_cast<std::size_t>(i + 1)], k);
    const auto v = renewal_oracle(q_min);
    long double total = 0.0L;
    for (std::int64_t m = 1; m <= n; ++m) {
        const double p_max = 1.0 - std::pow(1.0 - tail[static_cast<std::size_t>(m)], k);
        total += static_cast<long double>(v[static_cast<std::size_t>(n - m)]) * p_max;
    }
    return static_cast<double>(total);
}

}  // namespace surf::testing
