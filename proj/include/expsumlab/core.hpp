#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <exception>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

namespace esl {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Error taxonomy. Every public operation throws one of these.
struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};
struct RangeError : std::out_of_range {
    using std::out_of_range::out_of_range;
};
struct UnsupportedOrder : ArgumentError {
    using ArgumentError::ArgumentError;
};
struct DegenerateInput : ArgumentError {
    using ArgumentError::ArgumentError;
};
struct AliasingError : ArgumentError {
    using ArgumentError::ArgumentError;
};
struct EvaluationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct PrecisionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ResourceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// x - round(x), in [-1/2, 1/2].
inline double frac_centered(double x) { return x - std::nearbyint(x); }

/// e(theta) = exp(2 pi i theta), with theta reduced mod 1 first.
inline cplx unit_phase(double theta) {
    const double r = kTwoPi * frac_centered(theta);
    return {std::cos(r), std::sin(r)};
}

/// k * x mod 1 for integer k (|k| < 2^53). x is reduced first and the product
/// is split exactly with an fma, so the result is accurate to a few ulps of 1.
inline double int_phase(std::int64_t k, double x) {
    const double fx = x - std::floor(x);
    const double kd = static_cast<double>(k);
    const double p = kd * fx;
    const double err = std::fma(kd, fx, -p);
    return frac_centered(frac_centered(p) + err);
}

/// Neumaier-compensated accumulator.
template <class T>
class CompensatedSum {
public:
    void add(T v) {
        const T t = sum_ + v;
        if constexpr (std::is_same_v<T, cplx>) {
            comp_ += cplx(fix(sum_.real(), v.real(), t.real()), fix(sum_.imag(), v.imag(), t.imag()));
        } else {
            comp_ += fix(sum_, v, t);
        }
        sum_ = t;
    }
    CompensatedSum& operator+=(T v) {
        add(v);
        return *this;
    }
    T value() const { return sum_ + comp_; }

private:
    static double fix(double s, double v, double t) {
        return std::abs(s) >= std::abs(v) ? (s - t) + v : (v - t) + s;
    }
    T sum_{};
    T comp_{};
};

/// splitmix64 step; also used as a stateless hash for counter-based streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Counter-based generator: the stream (seed, stream) is fixed regardless of
/// how work is split across threads.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_(splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL))) {}

    std::uint64_t next_u64() { return splitmix64(key_ + 0x9e3779b97f4a7c15ULL * (++ctr_)); }
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [lo, hi].
    std::int64_t integer(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(next_u64() % span);
    }
    int sign() { return (next_u64() >> 63) ? 1 : -1; }

private:
    std::uint64_t key_;
    std::uint64_t ctr_ = 0;
};

struct LineFit {
    double slope = 0;
    double intercept = 0;
};

/// Least-squares fit of log y against log x.
inline LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw ArgumentError("fit_loglog: need >= 2 paired points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0) || !(y[i] > 0)) throw DomainError("fit_loglog: non-positive value");
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double den = n * sxx - sx * sx;
    if (den == 0) throw DegenerateInput("fit_loglog: all x equal");
    LineFit f;
    f.slope = (n * sxy - sx * sy) / den;
    f.intercept = (sy - f.slope * sx) / n;
    return f;
}

/// Runs body(i) for i in [0, n) on up to `workers` threads. Callers must make
/// each index's work independent; results are then identical for any
/// worker count.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& body) {
    const std::size_t w = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
    if (w <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(w);
    pool.reserve(w);
    for (std::size_t t = 0; t < w; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += w) body(i);
            } catch (...) {
                errs[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

/// Splits [0, n) into fixed-size tiles. Tile boundaries depend only on n
/// and tile, never on the worker count.
struct Tiling {
    std::size_t n;
    std::size_t tile;
    std::size_t count() const { return tile == 0 ? 0 : (n + tile - 1) / tile; }
    std::size_t begin(std::size_t t) const { return t * tile; }
    std::size_t end(std::size_t t) const { return std::min(n, (t + 1) * tile); }
};

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

/// floor(log2(v)) for v >= 1.
inline int floor_log2(std::uint64_t v) {
    int j = -1;
    while (v) {
        v >>= 1;
        ++j;
    }
    return j;
}

struct Point4 {
    double x1 = 0, x2 = 0, x3 = 0, x4 = 0;
};

/// Closed real interval.
struct Interval {
    double lo = 0, hi = 0;
    double width() const { return hi - lo; }
    bool contains(double t, double tol = 0) const { return t >= lo - tol && t <= hi + tol; }
};

/// Integer interval [lo, hi]. An empty interval is built with IntervalZ::empty().
class IntervalZ {
public:
    IntervalZ(std::int64_t lo, std::int64_t hi) : lo_(lo), hi_(hi) {
        if (lo > hi) throw ArgumentError("IntervalZ: lo > hi");
    }
    static IntervalZ empty(std::int64_t at = 0) {
        IntervalZ z(at, at);
        z.hi_ = at - 1;
        return z;
    }
    std::int64_t lo() const { return lo_; }
    std::int64_t hi() const { return hi_; }
    std::int64_t size() const { return hi_ - lo_ + 1; }
    bool is_empty() const { return hi_ < lo_; }
    bool contains(std::int64_t n) const { return n >= lo_ && n <= hi_; }
    std::int64_t span() const { return is_empty() ? 0 : hi_ - lo_; }

private:
    std::int64_t lo_, hi_;
};

/// The integers of [N/2, N].
inline IntervalZ upper_half(std::int64_t N) { return IntervalZ((N + 1) / 2, N); }

}  // namespace esl
