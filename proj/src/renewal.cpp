#include "surf/renewal.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>

#include "compensated_sum.hpp"

namespace surf {

namespace {

// Block size below which the divide-and-conquer falls back to the direct sum.
constexpr std::int64_t kLeafBlock = 128;

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

// Linear convolution of real sequences through r2c/c2r transforms of a fixed
// power-of-two size. Plans are created once per size; FFTW's planner is not
// thread-safe, execution with new-array functions is.
class Convolver {
public:
    explicit Convolver(std::size_t size)
        : size_(size),
          spectrum_len_(size / 2 + 1),
          a_(static_cast<double*>(fftw_malloc(sizeof(double) * size))),
          b_(static_cast<double*>(fftw_malloc(sizeof(double) * size))),
          fa_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * spectrum_len_))),
          fb_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * spectrum_len_))) {
        std::lock_guard lock(planner_mutex());
        forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(size), a_.get(), fa_.get(), FFTW_ESTIMATE);
        backward_ = fftw_plan_dft_c2r_1d(static_cast<int>(size), fa_.get(), a_.get(), FFTW_ESTIMATE);
    }

    ~Convolver() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(backward_);
    }

    Convolver(const Convolver&) = delete;
    Convolver& operator=(const Convolver&) = delete;

    // out[t] = sum_{i} x[i] y[t - i] for t < out.size(); requires
    // x.size() + y.size() - 1 <= size.
    void convolve(std::span<const double> x, std::span<const double> y, std::span<double> out) {
        std::fill_n(a_.get(), size_, 0.0);
        std::fill_n(b_.get(), size_, 0.0);
        std::copy(x.begin(), x.end(), a_.get());
        std::copy(y.begin(), y.end(), b_.get());
        fftw_execute_dft_r2c(forward_, a_.get(), fa_.get());
        fftw_execute_dft_r2c(forward_, b_.get(), fb_.get());
        for (std::size_t i = 0; i < spectrum_len_; ++i) {
            const double re = fa_.get()[i][0] * fb_.get()[i][0] - fa_.get()[i][1] * fb_.get()[i][1];
            const double im = fa_.get()[i][0] * fb_.get()[i][1] + fa_.get()[i][1] * fb_.get()[i][0];
            fa_.get()[i][0] = re;
            fa_.get()[i][1] = im;
        }
        fftw_execute_dft_c2r(backward_, fa_.get(), a_.get());
        const double scale = 1.0 / static_cast<double>(size_);
        for (std::size_t t = 0; t < out.size(); ++t) out[t] = a_.get()[t] * scale;
    }

private:
    std::size_t size_;
    std::size_t spectrum_len_;
    std::unique_ptr<double, FftwFree> a_, b_;
    std::unique_ptr<fftw_complex, FftwFree> fa_, fb_;
    fftw_plan forward_{};
    fftw_plan backward_{};
};

class RenewalSolver {
public:
    explicit RenewalSolver(std::span<const double> q) : q_(q), r_(q.size(), 0.0), acc_(q.size(), 0.0) {}

    std::vector<double> run() {
        if (!r_.empty()) solve(0, static_cast<std::int64_t>(r_.size()));
        return std::move(r_);
    }

private:
    void solve(std::int64_t lo, std::int64_t hi) {
        if (hi - lo <= kLeafBlock) {
            for (std::int64_t n = lo; n < hi; ++n) {
                if (n == 0) {
                    r_[0] = 1.0;
                    continue;
                }
                double s = acc_[static_cast<std::size_t>(n)];
                for (std::int64_t m = lo; m < n; ++m) s += q_[static_cast<std::size_t>(n - m)] * r_[static_cast<std::size_t>(m)];
                r_[static_cast<std::size_t>(n)] = s;
            }
            return;
        }
        const std::int64_t mid = lo + (hi - lo) / 2;
        solve(lo, mid);
        // acc[n] += sum_{m in [lo, mid)} r[m] q[n - m] for n in [mid, hi).
        const auto left = std::span<const double>(r_).subspan(static_cast<std::size_t>(lo), static_cast<std::size_t>(mid - lo));
        const auto kernel = q_.subspan(0, static_cast<std::size_t>(hi - lo));
        std::size_t size = 1;
        while (size < left.size() + kernel.size() - 1) size <<= 1;
        auto& conv = convolver(size);
        buffer_.resize(static_cast<std::size_t>(hi - lo));
        conv.convolve(left, kernel, buffer_);
        for (std::int64_t n = mid; n < hi; ++n) acc_[static_cast<std::size_t>(n)] += buffer_[static_cast<std::size_t>(n - lo)];
        solve(mid, hi);
    }

    Convolver& convolver(std::size_t size) {
        auto it = cache_.find(size);
        if (it == cache_.end()) it = cache_.emplace(size, std::make_unique<Convolver>(size)).first;
        return *it->second;
    }

    std::span<const double> q_;
    std::vector<double> r_;
    std::vector<double> acc_;
    std::vector<double> buffer_;
    std::map<std::size_t, std::unique_ptr<Convolver>> cache_;
};

}  // namespace

std::vector<double> renewal_direct(std::span<const double> q) {
    std::vector<double> r(q.size(), 0.0);
    if (r.empty()) return r;
    r[0] = 1.0;
    for (std::size_t n = 1; n < r.size(); ++n) {
        double s = 0.0;
        for (std::size_t i = 1; i <= n; ++i) s += q[i] * r[n - i];
        r[n] = s;
    }
    return r;
}

std::vector<double> renewal_fast(std::span<const double> q) { return RenewalSolver(q).run(); }

double reconstruction_error(std::span<const double> r, std::span<const double> q, std::int64_t last) {
    const auto end = last < 0 ? static_cast<std::int64_t>(r.size()) - 1 : std::min<std::int64_t>(last, static_cast<std::int64_t>(r.size()) - 1);
    double worst = 0.0;
    for (std::int64_t n = 1; n <= end; ++n) {
        detail::CompensatedSum s;
        for (std::int64_t i = 1; i <= n; ++i) s.add(q[static_cast<std::size_t>(i)] * r[static_cast<std::size_t>(n - i)]);
        worst = std::max(worst, std::abs(r[static_cast<std::size_t>(n)] - s.value()));
    }
    return worst;
}

RenewalSequence renewal_sequence(const DelayDistribution& dist, std::int64_t n_max, RenewalMethod method) {
    if (n_max < 1) throw std::invalid_argument("renewal_sequence: n_max must be >= 1");
    const auto q = dist.pmf_prefix(n_max);
    const bool fast = method == RenewalMethod::Fast || (method == RenewalMethod::Auto && n_max >= kFastPathThreshold);

    RenewalSequence seq;
    seq.values = fast ? renewal_fast(q) : renewal_direct(q);
    // Round-off in the FFT path can leave values a hair outside [0, 1].
    for (double& v : seq.values) v = std::clamp(v, 0.0, 1.0);
    seq.partial_square_sums.resize(seq.values.size());
    detail::CompensatedSum acc;
    for (std::size_t n = 0; n < seq.values.size(); ++n) {
        acc.add(seq.values[n] * seq.values[n]);
        seq.partial_square_sums[n] = acc.value();
    }
    const auto limit = renewal_limit(dist);
    seq.limit_prediction = limit.value;
    seq.aperiodic = limit.aperiodic;
    seq.source = dist.describe();
    return seq;
}

RenewalLimit renewal_limit(const DelayDistribution& dist) {
    const double m = dist.mean();
    return {std::isfinite(m) ? 1.0 / m : 0.0, dist.aperiodic()};
}

double decay_exponent_fit(const RenewalSequence& seq, std::int64_t first, std::int64_t last) {
    if (first < 1 || last > seq.n_max() || last <= first)
        throw std::invalid_argument("decay_exponent_fit: window outside the sequence");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double count = static_cast<double>(last - first + 1);
    for (std::int64_t n = first; n <= last; ++n) {
        const double r = seq[n];
        if (!(r > 0.0)) throw std::invalid_argument("decay_exponent_fit: window contains a zero");
        const double x = std::log(static_cast<double>(n));
        const double y = std::log(r);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double cov = sxy - sx * sy / count;
    const double var = sxx - sx * sx / count;
    return cov / var;
}

std::string to_string(SeriesVerdict v) {
    switch (v) {
        case SeriesVerdict::Converged:
            return "converged";
        case SeriesVerdict::Diverged:
            return "diverged";
        case SeriesVerdict::Inconclusive:
            return "inconclusive";
    }
    return "?";
}

SquaredSumReport squared_sum_diagnostic(const RenewalSequence& seq) {
    const auto n_max = seq.n_max();
    if (n_max < 100) throw std::invalid_argument("squared_sum_diagnostic: need at least 100 terms");
    SquaredSumReport report{SeriesVerdict::Inconclusive, seq.partial_square_sums.back(), 0.0, 0.0};
    const std::int64_t first = n_max / 10;
    for (std::int64_t n = first; n <= n_max; ++n)
        if (!(seq[n] > 0.0)) return report;

    const double slope = decay_exponent_fit(seq, first, n_max);
    double intercept_sum = 0.0;
    for (std::int64_t n = first; n <= n_max; ++n) intercept_sum += std::log(seq[n]) - slope * std::log(static_cast<double>(n));
    const double count = static_cast<double>(n_max - first + 1);
    const double intercept = intercept_sum / count;
    double rss = 0.0;
    for (std::int64_t n = first; n <= n_max; ++n) {
        const double e = std::log(seq[n]) - intercept - slope * std::log(static_cast<double>(n));
        rss += e * e;
    }
    report.growth_rate = 2.0 * slope;
    report.fit_residual = std::sqrt(rss / count);
    if (report.fit_residual > kSquaredSumMaxResidual) return report;
    report.verdict = report.growth_rate < -1.0 - kSquaredSumMargin ? SeriesVerdict::Converged : SeriesVerdict::Diverged;
    return report;
}

}  // namespace surf
