#include "surf/delay_distribution.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "compensated_sum.hpp"

namespace surf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::int64_t kGuideBuckets = std::int64_t{1} << 16;
constexpr int kGcdSupportPoints = 64;
constexpr double kGcdMassFloor = 1e-15;

enum class Kind { Zeta, InversePower, Geometric, Table, MinOfZeta };

std::int64_t saturate(double x) {
    if (!(x < static_cast<double>(kMaxDelay))) return kMaxDelay;
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(x));
}

}  // namespace

struct DelayDistribution::Impl {
    Kind kind{};
    DistributionSpec spec;
    int k = 1;  // copies for MinOfZeta
    double alpha = 0.0;
    double geo_fail = 0.0;  // 1 - p
    double geo_p = 0.0;
    double zeta_norm = 0.0;     // c = 1 / zeta(1 + alpha)
    std::int64_t horizon = 0;
    // tail_cache[i] = P(Z >= i) for 1 <= i <= horizon + 1 (index 0 unused).
    std::vector<double> tail_cache;
    // For u in bucket b, the first index with tail < u lies in
    // [guide_lo[b], guide_hi[b]].
    std::vector<std::int32_t> guide_lo, guide_hi;
    std::vector<double> table_pmf;
    std::shared_ptr<const Impl> base;  // MinOfZeta
    double mean = kInf;
    std::int64_t gcd = 1;

    double zeta_tail(std::int64_t i) const {
        if (i <= horizon + 1) return tail_cache[static_cast<std::size_t>(i)];
        return zeta_norm * power_tail_sum(1.0 + alpha, static_cast<double>(i));
    }

    double tail(std::int64_t i) const {
        if (i <= 1) return 1.0;
        switch (kind) {
            case Kind::Zeta:
                return zeta_tail(i);
            case Kind::InversePower:
                return std::pow(static_cast<double>(i), -alpha);
            case Kind::Geometric:
                return std::pow(geo_fail, static_cast<double>(i - 1));
            case Kind::Table:
                return i < static_cast<std::int64_t>(tail_cache.size()) ? tail_cache[static_cast<std::size_t>(i)]
                                                                        : 0.0;
            case Kind::MinOfZeta:
                return std::pow(base->zeta_tail(i), k);
        }
        return 0.0;
    }

    double pmf(std::int64_t i) const {
        if (i < 1) return 0.0;
        switch (kind) {
            case Kind::Zeta:
                return zeta_norm * std::pow(static_cast<double>(i), -(1.0 + alpha));
            case Kind::InversePower: {
                const double x = static_cast<double>(i);
                return -std::pow(x, -alpha) * std::expm1(-alpha * std::log1p(1.0 / x));
            }
            case Kind::Geometric:
                return geo_p * std::pow(geo_fail, static_cast<double>(i - 1));
            case Kind::Table:
                return i <= static_cast<std::int64_t>(table_pmf.size()) ? table_pmf[static_cast<std::size_t>(i - 1)]
                                                                        : 0.0;
            case Kind::MinOfZeta:
                return tail(i) - tail(i + 1);
        }
        return 0.0;
    }

    // Largest i with tail(i) >= u, searching the cache through the guide table.
    // Returns horizon + 1 + 1 (one past the cache) when the answer lies beyond it.
    std::int64_t invert_cached(double u) const {
        const auto b = std::min<std::int64_t>(kGuideBuckets - 1, static_cast<std::int64_t>(u * kGuideBuckets));
        const auto first = tail_cache.begin() + guide_lo[static_cast<std::size_t>(b)];
        const auto last = tail_cache.begin() + guide_hi[static_cast<std::size_t>(b)] + 1;
        const auto it = std::partition_point(first, last, [u](double t) { return t >= u; });
        return static_cast<std::int64_t>(it - tail_cache.begin()) - 1;
    }

    std::int64_t invert_zeta(double u) const {
        const std::int64_t cached = invert_cached(u);
        if (cached <= horizon) return cached;
        // Beyond the cache: invert the asymptotic tail, then step to the exact
        // boundary using the Euler-Maclaurin tail.
        const double s = 1.0 + alpha;
        double x = std::pow(alpha * u / zeta_norm, -1.0 / alpha);
        for (int it = 0; it < 2 && x < 0x1.0p52; ++it) {
            const double f = zeta_norm * power_tail_sum(s, x) - u;
            const double df = -zeta_norm * std::pow(x, -s);
            x = std::max(x - f / df, static_cast<double>(horizon + 1));
        }
        if (!(x < 0x1.0p52)) return saturate(x);
        auto i = std::max<std::int64_t>(horizon + 1, static_cast<std::int64_t>(x));
        while (zeta_tail(i + 1) >= u) ++i;
        while (i > horizon + 1 && zeta_tail(i) < u) --i;
        return i;
    }

    std::int64_t invert(double u) const {
        switch (kind) {
            case Kind::Zeta:
                return invert_zeta(u);
            case Kind::InversePower:
                return saturate(std::floor(std::pow(u, -1.0 / alpha)));
            case Kind::Geometric:
                return saturate(1.0 + std::floor(std::log(u) / std::log(geo_fail)));
            case Kind::Table:
                return invert_cached(u);
            case Kind::MinOfZeta:
                return base->invert_zeta(std::pow(u, 1.0 / k));
        }
        return 1;
    }

    void build_guide() {
        const auto last_index = static_cast<std::int64_t>(tail_cache.size()) - 1;
        // first_below(v): first index i >= 1 with tail_cache[i] < v, or
        // last_index + 1 if none.
        auto first_below = [&](double v, std::int64_t from) {
            std::int64_t i = from;
            while (i <= last_index && tail_cache[static_cast<std::size_t>(i)] >= v) ++i;
            return i;
        };
        guide_lo.assign(static_cast<std::size_t>(kGuideBuckets), 0);
        guide_hi.assign(static_cast<std::size_t>(kGuideBuckets), 0);
        // Walk buckets from the top (u near 1) down; first_below is
        // nonincreasing in v so the scan is linear overall.
        std::int64_t at_upper = first_below(1.0, 1);
        for (std::int64_t b = kGuideBuckets - 1; b >= 0; --b) {
            const double lower = static_cast<double>(b) / static_cast<double>(kGuideBuckets);
            const std::int64_t at_lower = b == 0 ? last_index + 1 : first_below(lower, at_upper);
            guide_lo[static_cast<std::size_t>(b)] = static_cast<std::int32_t>(at_upper);
            guide_hi[static_cast<std::size_t>(b)] = static_cast<std::int32_t>(std::min(at_lower, last_index));
            at_upper = at_lower;
        }
    }
};

double power_tail_sum(double s, double x) {
    const double xs = std::pow(x, -s);
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    return x * xs / (s - 1.0) + 0.5 * xs + s * xs * inv / 12.0 -
           s * (s + 1.0) * (s + 2.0) * xs * inv * inv2 / 720.0 +
           s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * xs * inv * inv2 * inv2 / 30240.0;
}

double riemann_zeta(double s) {
    if (!(s > 1.0)) throw std::invalid_argument("riemann_zeta: s must exceed 1");
    constexpr int kDirectTerms = 256;
    detail::CompensatedSum acc;
    acc.add(power_tail_sum(s, kDirectTerms + 1));
    for (int j = kDirectTerms; j >= 1; --j) acc.add(std::pow(static_cast<double>(j), -s));
    return acc.value();
}

namespace {

std::string shortest(double x) {
    std::array<char, 32> buf;
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), res.ptr);
}

}  // namespace

std::string to_string(const DistributionSpec& spec) {
    return std::visit(
        [](const auto& s) -> std::string {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, ZetaPareto>) {
                return "zeta_pareto(alpha=" + shortest(s.alpha) + ")";
            } else if constexpr (std::is_same_v<T, InversePower>) {
                return "inverse_power(alpha=" + shortest(s.alpha) + ")";
            } else if constexpr (std::is_same_v<T, Geometric>) {
                return "geometric(p=" + shortest(s.success_prob) + ")";
            } else {
                std::string out = "table(";
                for (std::size_t i = 0; i < s.pmf.size(); ++i) out += (i ? "," : "") + shortest(s.pmf[i]);
                return out + ")";
            }
        },
        spec);
}

std::string to_string(RegimeLabel label) {
    switch (label) {
        case RegimeLabel::Light:
            return "light";
        case RegimeLabel::Moderate:
            return "moderate";
        case RegimeLabel::Heavy:
            return "heavy";
    }
    return "?";
}

namespace {

std::shared_ptr<DelayDistribution::Impl> build_zeta(double alpha, std::int64_t horizon) {
    auto impl = std::make_shared<DelayDistribution::Impl>();
    impl->kind = Kind::Zeta;
    impl->spec = ZetaPareto{alpha};
    impl->alpha = alpha;
    impl->horizon = horizon;
    const double s = 1.0 + alpha;
    // Sum from the far end so the small terms accumulate first.
    std::vector<double> raw(static_cast<std::size_t>(horizon + 2));
    detail::CompensatedSum acc;
    acc.add(power_tail_sum(s, static_cast<double>(horizon + 2)));
    for (std::int64_t i = horizon + 1; i >= 1; --i) {
        acc.add(std::pow(static_cast<double>(i), -s));
        raw[static_cast<std::size_t>(i)] = acc.value();
    }
    const double zeta = raw[1];
    impl->zeta_norm = 1.0 / zeta;
    impl->tail_cache.resize(raw.size());
    for (std::size_t i = 1; i < raw.size(); ++i) impl->tail_cache[i] = raw[i] / zeta;
    impl->tail_cache[1] = 1.0;
    impl->build_guide();
    impl->mean = alpha > 1.0 ? riemann_zeta(alpha) / zeta : kInf;
    return impl;
}

std::shared_ptr<DelayDistribution::Impl> build_table(std::vector<double> pmf, const DistributionSpec& spec) {
    if (pmf.empty()) throw std::invalid_argument("table pmf is empty");
    detail::CompensatedSum total;
    for (double q : pmf) {
        if (!(q >= 0.0) || !std::isfinite(q)) throw std::invalid_argument("table pmf has a negative or non-finite entry");
        total.add(q);
    }
    if (std::abs(total.value() - 1.0) > 1e-9) throw std::invalid_argument("table pmf does not sum to 1 within 1e-9");
    while (pmf.size() > 1 && pmf.back() == 0.0) pmf.pop_back();
    for (double& q : pmf) q /= total.value();

    auto impl = std::make_shared<DelayDistribution::Impl>();
    impl->kind = Kind::Table;
    impl->spec = spec;
    impl->table_pmf = pmf;
    const auto m = static_cast<std::int64_t>(pmf.size());
    impl->horizon = m;
    impl->tail_cache.assign(static_cast<std::size_t>(m + 2), 0.0);
    detail::CompensatedSum acc;
    detail::CompensatedSum first_moment;
    for (std::int64_t i = m; i >= 1; --i) {
        acc.add(pmf[static_cast<std::size_t>(i - 1)]);
        impl->tail_cache[static_cast<std::size_t>(i)] = acc.value();
        first_moment.add(static_cast<double>(i) * pmf[static_cast<std::size_t>(i - 1)]);
    }
    impl->tail_cache[1] = 1.0;
    impl->build_guide();
    impl->mean = first_moment.value();

    std::int64_t g = 0;
    int seen = 0;
    for (std::int64_t i = 1; i <= m && seen < kGcdSupportPoints; ++i) {
        if (pmf[static_cast<std::size_t>(i - 1)] > kGcdMassFloor) {
            g = std::gcd(g, i);
            ++seen;
        }
    }
    impl->gcd = g == 0 ? 1 : g;
    return impl;
}

}  // namespace

DelayDistribution::DelayDistribution(const DistributionSpec& spec, std::int64_t cache_horizon) {
    if (cache_horizon < 1 || cache_horizon > (std::int64_t{1} << 30))
        throw std::invalid_argument("cache_horizon must lie in [1, 2^30]");
    impl_ = std::visit(
        [&](const auto& s) -> std::shared_ptr<const Impl> {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, ZetaPareto>) {
                if (!(s.alpha > 0.0) || !std::isfinite(s.alpha)) throw std::invalid_argument("alpha must be > 0");
                return build_zeta(s.alpha, cache_horizon);
            } else if constexpr (std::is_same_v<T, InversePower>) {
                if (!(s.alpha > 0.0) || !std::isfinite(s.alpha)) throw std::invalid_argument("alpha must be > 0");
                auto impl = std::make_shared<Impl>();
                impl->kind = Kind::InversePower;
                impl->spec = s;
                impl->alpha = s.alpha;
                impl->mean = s.alpha > 1.0 ? riemann_zeta(s.alpha) : kInf;
                return impl;
            } else if constexpr (std::is_same_v<T, Geometric>) {
                if (!(s.success_prob > 0.0 && s.success_prob < 1.0))
                    throw std::invalid_argument("geometric success probability must lie in (0, 1)");
                auto impl = std::make_shared<Impl>();
                impl->kind = Kind::Geometric;
                impl->spec = s;
                impl->geo_p = s.success_prob;
                impl->geo_fail = 1.0 - s.success_prob;
                impl->mean = 1.0 / s.success_prob;
                return impl;
            } else {
                return build_table(s.pmf, s);
            }
        },
        spec);
}

double DelayDistribution::tail(std::int64_t i) const { return impl_->tail(i); }
double DelayDistribution::pmf(std::int64_t i) const { return impl_->pmf(i); }
double DelayDistribution::mean() const { return impl_->mean; }
std::int64_t DelayDistribution::invert(double u) const { return impl_->invert(u); }
std::int64_t DelayDistribution::support_gcd() const { return impl_->gcd; }
const DistributionSpec& DelayDistribution::spec() const { return impl_->spec; }
int DelayDistribution::min_k() const { return impl_->k; }
std::int64_t DelayDistribution::cache_horizon() const { return impl_->horizon; }

double DelayDistribution::max_pair_tail(std::int64_t i) const {
    const double p = tail(i);
    return 2.0 * p - p * p;
}

std::optional<double> DelayDistribution::tail_exponent() const {
    switch (impl_->kind) {
        case Kind::Zeta:
        case Kind::InversePower:
            return impl_->alpha;
        case Kind::MinOfZeta:
            return impl_->alpha * impl_->k;
        default:
            return std::nullopt;
    }
}

std::optional<std::int64_t> DelayDistribution::support_max() const {
    if (impl_->kind == Kind::Table) return static_cast<std::int64_t>(impl_->table_pmf.size());
    return std::nullopt;
}

std::string DelayDistribution::describe() const {
    if (impl_->kind == Kind::MinOfZeta)
        return "min_of_" + std::to_string(impl_->k) + "(" + to_string(impl_->spec) + ")";
    return to_string(impl_->spec);
}

std::vector<double> DelayDistribution::pmf_prefix(std::int64_t n) const {
    std::vector<double> q(static_cast<std::size_t>(n + 1), 0.0);
    for (std::int64_t i = 1; i <= n; ++i) q[static_cast<std::size_t>(i)] = pmf(i);
    return q;
}

DelayDistribution DelayDistribution::min_of(int k) const {
    if (k < 1) throw std::invalid_argument("min_of: k must be >= 1");
    if (k == 1) return *this;
    const Impl& self = *impl_;
    switch (self.kind) {
        case Kind::InversePower:
            return DelayDistribution(InversePower{self.alpha * k});
        case Kind::Geometric:
            return DelayDistribution(Geometric{1.0 - std::pow(self.geo_fail, k)});
        case Kind::Table: {
            std::vector<double> pmf(self.table_pmf.size());
            for (std::size_t i = 0; i < pmf.size(); ++i) {
                const auto idx = static_cast<std::int64_t>(i) + 1;
                pmf[i] = std::pow(self.tail(idx), k) - std::pow(self.tail(idx + 1), k);
            }
            auto impl = build_table(pmf, Table{pmf});
            return DelayDistribution(std::shared_ptr<const Impl>(std::move(impl)));
        }
        case Kind::Zeta:
        case Kind::MinOfZeta: {
            const auto& base = self.kind == Kind::Zeta ? impl_ : self.base;
            const int copies = self.k * k;
            auto impl = std::make_shared<Impl>();
            impl->kind = Kind::MinOfZeta;
            impl->spec = base->spec;
            impl->base = base;
            impl->k = copies;
            impl->alpha = base->alpha;
            impl->horizon = base->horizon;
            const double e = base->alpha * copies;
            if (e > 1.0) {
                // Cached part exactly, the rest from the expansion
                // (c T(x))^k = (c/a)^k x^-e (1 + b/x + g/x^2 + ...).
                detail::CompensatedSum acc;
                const std::int64_t m = base->horizon + 1;
                for (std::int64_t i = m - 1; i >= 1; --i) acc.add(std::pow(base->zeta_tail(i), copies));
                const double a = base->alpha;
                const double a1 = a / 2.0;
                const double a2 = a * (a + 1.0) / 12.0;
                const double beta = copies * a1;
                const double gamma = copies * a2 + copies * (copies - 1.0) * a1 * a1 / 2.0;
                const double amp = std::pow(base->zeta_norm / a, copies);
                const double x = static_cast<double>(m);
                const double xe = std::pow(x, -e);
                const double integral = amp * (x * xe / (e - 1.0) + beta * xe / e + gamma * xe / (x * (e + 1.0)));
                const double f_at_m = std::pow(base->zeta_tail(m), copies);
                const double df_at_m = -e * f_at_m / x;
                acc.add(integral + 0.5 * f_at_m - df_at_m / 12.0);
                impl->mean = acc.value();
            }
            return DelayDistribution(std::shared_ptr<const Impl>(std::move(impl)));
        }
    }
    return *this;
}

Regime DelayDistribution::classify(int k) const {
    if (k < 2) throw std::invalid_argument("classify_regime: k must be >= 2");
    Regime r{};
    r.k = k;
    r.mean_z = mean();
    r.mean_min_k = min_of(k).mean();
    r.aperiodic = aperiodic();
    if (std::isfinite(r.mean_z)) {
        r.label = RegimeLabel::Light;
    } else if (std::isfinite(r.mean_min_k)) {
        r.label = RegimeLabel::Moderate;
    } else {
        r.label = RegimeLabel::Heavy;
    }
    return r;
}

}  // namespace surf
