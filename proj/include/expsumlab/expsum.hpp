#pragma once

#include <functional>
#include <string>
#include <vector>

#include "core.hpp"
#include "curve.hpp"
#include "fft.hpp"
#include "surface.hpp"

namespace esl {

/// Phase convention. Conjecture: n x1 + n^2 x2 + phi3(n/N) x3 + phi4(n/N) x4.
/// Renormalized: n x1 + (n^2/N) x2 + N phi3(n/N) x3 + N phi4(n/N) x4.
enum class Coords { Conjecture, Renormalized };

inline const char* to_string(Coords c) { return c == Coords::Conjecture ? "conjecture" : "renormalized"; }

namespace detail {

inline void check_in_range(std::int64_t N, const IntervalZ& I) {
    if (N < 1) throw ArgumentError("N must be >= 1");
    if (!I.is_empty() && (I.lo() < 1 || I.hi() > N)) throw RangeError("interval must lie inside [1, N]");
}

/// Reduced phase of n for the x2, x3, x4 part.
inline double tail_phase(const Curve& c, std::int64_t N, std::int64_t n, double x2, double x3, double x4, Coords co) {
    const double t = static_cast<double>(n) / static_cast<double>(N);
    const double p3 = c.derivative(3, 0, t), p4 = c.derivative(4, 0, t);
    if (co == Coords::Conjecture) {
        return int_phase(n * n, x2) + frac_centered(p3 * x3) + frac_centered(p4 * x4);
    }
    const double Nd = static_cast<double>(N);
    const double q2 = static_cast<double>(n) * static_cast<double>(n) / Nd;
    return frac_centered(q2 * x2) + frac_centered(Nd * p3 * x3) + frac_centered(Nd * p4 * x4);
}

}  // namespace detail

/// E_{I,N}(x) by direct compensated summation.
inline cplx eval_curve_sum(const Curve& curve, std::int64_t N, const IntervalZ& I, const Point4& x,
                           Coords coords = Coords::Conjecture) {
    detail::check_in_range(N, I);
    CompensatedSum<cplx> acc;
    for (std::int64_t n = I.lo(); n <= I.hi(); ++n) {
        const double ph = int_phase(n, x.x1) + detail::tail_phase(curve, N, n, x.x2, x.x3, x.x4, coords);
        acc += unit_phase(ph);
    }
    return acc.value();
}

/// Optional weight w(m) for quadratic Weyl sums; empty means the sharp cutoff.
using WeylWeight = std::function<double(std::int64_t)>;

/// sum_{m=1}^{M} w(m) e(m u + m^2 w + m^3 v).
inline cplx eval_quadratic_weyl(std::int64_t M, double u, double w, double v = 0, const WeylWeight& weight = {}) {
    if (M < 1) throw ArgumentError("eval_quadratic_weyl: M must be >= 1");
    if (!std::isfinite(u) || !std::isfinite(w) || !std::isfinite(v))
        throw ArgumentError("eval_quadratic_weyl: non-finite input");
    CompensatedSum<cplx> acc;
    for (std::int64_t m = 1; m <= M; ++m) {
        const double ph = int_phase(m, u) + int_phase(m * m, w) + int_phase(m * m * m, v);
        const cplx z = unit_phase(ph);
        acc += weight ? weight(m) * z : z;
    }
    return acc.value();
}

/// E_{I,N}(j/L, x2, x3, x4) for j = 0..L-1 via one length-L DFT.
inline std::vector<cplx> eval_grid_x1(const Curve& curve, std::int64_t N, const IntervalZ& I, double x2, double x3,
                                      double x4, std::int64_t L, Coords coords = Coords::Conjecture) {
    detail::check_in_range(N, I);
    if (L <= I.span()) throw AliasingError("eval_grid_x1: L must exceed the frequency span of I");
    std::vector<cplx> in(static_cast<std::size_t>(L), cplx{}), out;
    for (std::int64_t n = I.lo(); n <= I.hi(); ++n)
        in[static_cast<std::size_t>(n - I.lo())] = unit_phase(detail::tail_phase(curve, N, n, x2, x3, x4, coords));
    dft_synthesis(in, out);
    if (I.lo() != 0) {
        for (std::int64_t j = 0; j < L; ++j) {
            // e(lo j / L) with exact integer reduction of lo*j mod L.
            const std::int64_t r = ((I.lo() % L) * j) % L;
            out[static_cast<std::size_t>(j)] *= unit_phase(static_cast<double>(r) / static_cast<double>(L));
        }
    }
    return out;
}

/// sum c(m1-1, m2-1) e(x . Psi(m1/Mgrid, m2/Mgrid)) over 1 <= m1, m2 <= Mgrid.
inline cplx eval_surface_sum(const SurfacePsi& psi, std::int64_t Mgrid, const ComplexMatrix& coeffs, const Point4& x) {
    if (Mgrid < 1) throw ArgumentError("eval_surface_sum: Mgrid must be >= 1");
    const auto n = static_cast<std::size_t>(Mgrid);
    if (coeffs.rows != n || coeffs.cols != n) throw ArgumentError("eval_surface_sum: coefficient matrix must be Mgrid x Mgrid");
    CompensatedSum<cplx> acc;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = static_cast<double>(i + 1) / static_cast<double>(Mgrid);
        const double pa = frac_centered(x.x1 * a) + frac_centered(x.x3 * psi.eval(1, 0, a)) +
                          frac_centered(x.x4 * psi.eval(3, 0, a));
        for (std::size_t j = 0; j < n; ++j) {
            const double b = static_cast<double>(j + 1) / static_cast<double>(Mgrid);
            const double pb = frac_centered(x.x2 * b) + frac_centered(x.x3 * psi.eval(2, 0, b)) +
                              frac_centered(x.x4 * psi.eval(4, 0, b));
            acc += coeffs(i, j) * unit_phase(pa + pb);
        }
    }
    return acc.value();
}

struct RescaleTrial {
    std::int64_t N0 = 0, M = 0, lo = 0, hi = 0;  // block N0 + [lo, hi] inside N0 + [M, 2M]
    Point4 x;
    double lhs = 0, rhs = 0, rel_err = 0;
};

struct RescaleReport {
    std::string curve_id;
    std::int64_t N = 0;
    std::uint64_t seed = 0;
    double max_rel_err = 0;
    std::vector<RescaleTrial> rows;
};

/// |E_{N0+I,N}(x)| against the rescaled sum at map(x) for random blocks and
/// points; rel_err is measured against max(1, lhs).
inline RescaleReport rescale_identity_check(const Curve& curve, std::int64_t N, int trials, std::uint64_t seed,
                                            double x34_max = 512) {
    if (trials < 1) throw ArgumentError("rescale_identity_check: trials must be >= 1");
    if (N < 16) throw ArgumentError("rescale_identity_check: N must be >= 16");
    RescaleReport rep;
    rep.curve_id = curve.id();
    rep.N = N;
    rep.seed = seed;
    for (int k = 0; k < trials; ++k) {
        CounterRng rng(seed, static_cast<std::uint64_t>(k));
        RescaleTrial t;
        t.M = rng.integer(4, N / 4);
        t.N0 = rng.integer((N + 1) / 2 - t.M, N - 2 * t.M);
        t.lo = rng.integer(t.M, 2 * t.M);
        t.hi = rng.integer(t.lo, 2 * t.M);
        t.x = {rng.uniform(), rng.uniform(), rng.uniform(0, x34_max), rng.uniform(0, x34_max)};
        const auto br = rescale_block(curve, N, t.N0, t.M);
        t.lhs = std::abs(eval_curve_sum(curve, N, IntervalZ(t.N0 + t.lo, t.N0 + t.hi), t.x));
        t.rhs = std::abs(br.rescaled_sum(IntervalZ(t.lo, t.hi), br.map(t.x)));
        t.rel_err = std::abs(t.lhs - t.rhs) / std::max(1.0, t.lhs);
        rep.max_rel_err = std::max(rep.max_rel_err, t.rel_err);
        rep.rows.push_back(t);
    }
    return rep;
}

}  // namespace esl
