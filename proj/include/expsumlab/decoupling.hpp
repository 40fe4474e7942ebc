#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "core.hpp"
#include "curve.hpp"
#include "fft.hpp"
#include "qmc.hpp"
#include "surface.hpp"

namespace esl {

enum class CoeffKind { OneHot, Constant, RandomSigns, SingleBump, Custom };

inline const char* to_string(CoeffKind k) {
    switch (k) {
        case CoeffKind::OneHot: return "one-hot";
        case CoeffKind::Constant: return "constant";
        case CoeffKind::RandomSigns: return "random-signs";
        case CoeffKind::SingleBump: return "single-bump";
        case CoeffKind::Custom: return "custom";
    }
    return "?";
}

inline CoeffKind coeff_kind_from(const std::string& s) {
    for (auto k : {CoeffKind::OneHot, CoeffKind::Constant, CoeffKind::RandomSigns, CoeffKind::SingleBump, CoeffKind::Custom})
        if (s == to_string(k)) return k;
    throw ArgumentError("unknown coefficient family: " + s);
}

/// Deterministic coefficient generator.
struct CoeffFamily {
    CoeffKind kind = CoeffKind::Constant;
    std::uint64_t seed = 0;
    std::vector<cplx> custom{};  // cycled to the requested length
    cplx phase{1, 0};          // global unimodular factor

    /// Coefficients for `n` slots; `stream` separates independent factors.
    std::vector<cplx> vector(std::size_t n, std::uint64_t stream = 0) const {
        std::vector<cplx> c(n, cplx{});
        if (n == 0) return c;
        CounterRng rng(seed, (static_cast<std::uint64_t>(n) << 8) ^ stream);
        switch (kind) {
            case CoeffKind::OneHot: c[n / 2] = 1; break;
            case CoeffKind::Constant: std::fill(c.begin(), c.end(), cplx(1, 0)); break;
            case CoeffKind::RandomSigns:
                for (auto& v : c) v = static_cast<double>(rng.sign());
                break;
            case CoeffKind::SingleBump: {
                const double mid = 0.5 * static_cast<double>(n - 1), w = std::max(1.0, 0.125 * static_cast<double>(n));
                for (std::size_t i = 0; i < n; ++i) {
                    const double z = (static_cast<double>(i) - mid) / w;
                    c[i] = std::exp(-z * z);
                }
                break;
            }
            case CoeffKind::Custom:
                if (custom.empty()) throw ArgumentError("CoeffFamily: custom family needs values");
                for (std::size_t i = 0; i < n; ++i) c[i] = custom[i % custom.size()];
                break;
        }
        for (auto& v : c) v *= phase;
        return c;
    }

    ComplexMatrix matrix(std::size_t rows, std::size_t cols, std::uint64_t stream = 0) const {
        ComplexMatrix m(rows, cols);
        if (kind == CoeffKind::OneHot) {
            m(rows / 2, cols / 2) = phase;
            return m;
        }
        m.data = vector(rows * cols, stream);
        return m;
    }
};

struct RatioResult {
    double ratio = 0;
    double error = 0;  // quadrature or sampling error of the ratio
    double lhs = 0, rhs = 0;
    std::int64_t samples = 0;
    int terms = 0;
};

inline double norm_l(const std::vector<cplx>& c, double q) {
    double s = 0;
    for (const auto& v : c) s += std::pow(std::abs(v), q);
    return std::pow(s, 1 / q);
}

// ---------------------------------------------------------------- parabola

struct ParabolaOptions {
    double center_u = 0, center_w = 0;
    double rho = 4;
    double tol = 1e-6;  // relative agreement between the two w rules
};

using UnivariatePhase = std::function<double(double)>;

namespace detail {

inline double sinpi_over(double x) {
    if (x == 0) return 1;
    const double n = std::nearbyint(x);
    double s = std::sin(kPi * (x - n));
    if (std::fmod(n, 2.0) != 0) s = -s;
    return s / (kPi * x);
}

/// int over the disk of radius R about (cu, cw) of |sum_n b_n e(u n/s + w phi_n)|^6,
/// exact in u row by row and Gauss-Legendre in theta with w = cw + R sin(theta).
inline double parabola_l6(const std::vector<cplx>& c, const std::vector<double>& phi, std::int64_t s, double R,
                          double cu, double cw, std::int64_t panels) {
    const std::size_t n = c.size();
    const std::int64_t L = 6 * s;
    using GL = boost::math::quadrature::gauss<double, 8>;
    std::vector<std::pair<double, double>> gl;
    for (std::size_t i = 0; i < GL::abscissa().size(); ++i) {
        gl.push_back({GL::abscissa()[i], GL::weights()[i]});
        if (GL::abscissa()[i] != 0) gl.push_back({-GL::abscissa()[i], GL::weights()[i]});
    }
    CompensatedSum<double> total;
    std::vector<cplx> in(static_cast<std::size_t>(L)), vals, pw(static_cast<std::size_t>(L)), coef;
    for (std::int64_t p = 0; p < panels; ++p) {
        const double a = -kPi / 2 + kPi * static_cast<double>(p) / static_cast<double>(panels);
        const double hpan = 0.5 * kPi / static_cast<double>(panels);
        for (const auto& [x, wt] : gl) {
            const double th = a + hpan * (1 + x);
            const double w = cw + R * std::sin(th), half = R * std::cos(th);
            const double jac = hpan * wt * R * std::cos(th);
            std::fill(in.begin(), in.end(), cplx{});
            for (std::size_t k = 0; k < n; ++k) in[k + 1] = c[k] * unit_phase(frac_centered(w * phi[k]));
            dft_synthesis(in, vals);  // F(u_j), u_j = j s / L
            for (std::int64_t j = 0; j < L; ++j) pw[static_cast<std::size_t>(j)] = std::pow(std::norm(vals[static_cast<std::size_t>(j)]), 3);
            dft_analysis(pw, coef);  // L * a_d, d taken mod L
            CompensatedSum<double> row;
            const std::int64_t dmax = 3 * (static_cast<std::int64_t>(n) - 1);
            for (std::int64_t d = -dmax; d <= dmax; ++d) {
                const cplx ad = coef[static_cast<std::size_t>((d % L + L) % L)] / static_cast<double>(L);
                const double fd = static_cast<double>(d) / static_cast<double>(s);
                const cplx e = unit_phase(frac_centered(fd * cu));
                row += (ad * e).real() * 2 * half * sinpi_over(2 * half * fd);
            }
            total += jac * row.value();
        }
    }
    return total.value();
}

}  // namespace detail

/// ||sum_n c_n e(x1 t_n + x2 phi(t_n))||_{L^6(B_N)} / (|B_N|^{1/6} ||c||_2) with
/// t_n = n / sqrt(N), n = 1..sqrt(N), B_N the disk of radius N.
inline RatioResult parabola_ratio(std::int64_t N, const UnivariatePhase& phi, const CoeffFamily& coeffs,
                                  const ParabolaOptions& opt = {}) {
    const auto s = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(N))));
    if (N < 4 || s * s != N) throw ArgumentError("parabola_ratio: N must be a perfect square >= 4");
    const auto c = coeffs.vector(static_cast<std::size_t>(s));
    std::vector<double> ph;
    double lo = INFINITY, hi = -INFINITY;
    for (std::int64_t k = 1; k <= s; ++k) {
        ph.push_back(phi(static_cast<double>(k) / static_cast<double>(s)));
        lo = std::min(lo, ph.back());
        hi = std::max(hi, ph.back());
    }
    const double R = static_cast<double>(N);
    const double Bw = 3 * (hi - lo);
    auto panels = static_cast<std::int64_t>(std::ceil(opt.rho * kPi * Bw * R / 4)) * 2;
    panels = std::max<std::int64_t>(panels, 16);
    const double fine = detail::parabola_l6(c, ph, s, R, opt.center_u, opt.center_w, panels);
    const double coarse = detail::parabola_l6(c, ph, s, R, opt.center_u, opt.center_w, panels / 2);
    if (std::abs(fine - coarse) > opt.tol * std::abs(fine))
        throw PrecisionError("parabola_ratio: w quadrature did not converge");
    const double vol = kPi * R * R;
    RatioResult r;
    r.lhs = std::pow(fine, 1.0 / 6);
    r.rhs = std::pow(vol, 1.0 / 6) * norm_l(c, 2);
    r.ratio = r.lhs / r.rhs;
    r.error = r.ratio * std::abs(fine - coarse) / std::abs(fine) / 6;
    r.samples = panels * 15;
    r.terms = static_cast<int>(s);
    return r;
}

// ---------------------------------------------------------------- 4-D ball sampling

struct BallOptions {
    std::int64_t samples = std::int64_t{1} << 22;
    int batches = 16;
    std::uint64_t seed = 1;
    int workers = 1;
    Point4 center{};
};

/// Measure-preserving map from [0,1)^4 onto the 4-ball of radius R (uniform
/// direction on S^3 via the Hopf coordinates).
inline Point4 ball_point(const double* u, double R, const Point4& c) {
    const double r = R * std::pow(u[0], 0.25);
    const double a = std::sqrt(u[1]), b = std::sqrt(1 - u[1]);
    const double t1 = kTwoPi * u[2], t2 = kTwoPi * u[3];
    return {c.x1 + r * a * std::cos(t1), c.x2 + r * a * std::sin(t1), c.x3 + r * b * std::cos(t2),
            c.x4 + r * b * std::sin(t2)};
}

inline double ball_volume(double R) { return kPi * kPi * std::pow(R, 4) / 2; }

/// Frequencies Phi(t) = (t, t^2, phi3(t), phi4(t)) recentred to their mean.
struct CurveWaves {
    std::vector<std::array<double, 4>> freq;
    std::vector<cplx> coef;

    CurveWaves(const Curve& curve, const std::vector<double>& ts, std::vector<cplx> c) : coef(std::move(c)) {
        std::array<double, 4> mean{0, 0, 0, 0};
        for (double t : ts) {
            freq.push_back({t, t * t, curve.derivative(3, 0, t), curve.derivative(4, 0, t)});
            for (int k = 0; k < 4; ++k) mean[static_cast<std::size_t>(k)] += freq.back()[static_cast<std::size_t>(k)];
        }
        for (auto& f : freq)
            for (int k = 0; k < 4; ++k) f[static_cast<std::size_t>(k)] -= mean[static_cast<std::size_t>(k)] / static_cast<double>(ts.size());
    }
    double abs6(const Point4& x) const {
        cplx s{};
        for (std::size_t i = 0; i < freq.size(); ++i) {
            const auto& f = freq[i];
            s += coef[i] * unit_phase(frac_centered(f[0] * x.x1 + f[1] * x.x2 + f[2] * x.x3 + f[3] * x.x4));
        }
        return std::pow(std::norm(s), 3);
    }
};

/// t_n = n / sqrt(N) inside [lo, hi].
inline std::vector<double> arc_frequencies(std::int64_t N, const Interval& I) {
    const double s = std::sqrt(static_cast<double>(N));
    std::vector<double> t;
    for (auto n = static_cast<std::int64_t>(std::ceil(I.lo * s - 1e-12)); static_cast<double>(n) <= I.hi * s + 1e-12; ++n)
        t.push_back(static_cast<double>(n) / s);
    return t;
}

enum class BilinearRhs { L2, L6 };

/// ||E1 E2||_{L^6(B_N)} against |B_N|^{1/6} ||c1|| ||c2|| in l^2 or l^6, one
/// frequency per arc of length N^{-1/2}.
inline RatioResult bilinear_curve_ratio(std::int64_t N, const Curve& curve, const Interval& I1, const Interval& I2,
                                        const CoeffFamily& c1, const CoeffFamily& c2, BilinearRhs rhs,
                                        const BallOptions& opt = {}, double min_sep = 0.125) {
    if (N < 4) throw ArgumentError("bilinear_curve_ratio: N must be >= 4");
    for (const auto* I : {&I1, &I2})
        if (I->lo < 0.5 || I->hi > 1 || I->hi < I->lo) throw ArgumentError("bilinear_curve_ratio: arcs must lie in [1/2, 1]");
    if (std::max(I2.lo - I1.hi, I1.lo - I2.hi) < min_sep) throw ArgumentError("bilinear_curve_ratio: arcs not separated");
    const auto t1 = arc_frequencies(N, I1), t2 = arc_frequencies(N, I2);
    if (t1.empty() || t2.empty()) throw ArgumentError("bilinear_curve_ratio: an arc holds no frequency");
    const CurveWaves w1(curve, t1, c1.vector(t1.size(), 1)), w2(curve, t2, c2.vector(t2.size(), 2));
    const double R = static_cast<double>(N), vol = ball_volume(R);
    const auto b = qmc_batches(4, 1, opt.samples, opt.batches, opt.seed, opt.workers, [&](const double* u, double* out) {
        const Point4 x = ball_point(u, R, opt.center);
        out[0] = w1.abs6(x) * w2.abs6(x);
    });
    const double q = rhs == BilinearRhs::L2 ? 2 : 6;
    RatioResult r;
    r.rhs = std::pow(vol, 1.0 / 6) * norm_l(w1.coef, q) * norm_l(w2.coef, q);
    auto ratio_of = [&](const std::vector<double>& m) { return std::pow(vol * m[0], 1.0 / 6) / r.rhs; };
    r.lhs = std::pow(vol * b.mean(0), 1.0 / 6);
    r.ratio = r.lhs / r.rhs;
    r.error = b.spread(ratio_of);
    r.samples = b.samples;
    r.terms = static_cast<int>(t1.size() + t2.size());
    return r;
}

// ---------------------------------------------------------------- surface

enum class SurfaceMode { PointMass, Blocks };

struct SurfaceOptions {
    BallOptions ball{std::int64_t{1} << 20};
    std::int64_t block_length = 0;  // 0 means round(M / sqrt(N))
};

/// Surface sums sum c(m1,m2) e(x . Psi(m1/M, m2/M)) on B_N. PointMass takes
/// M = sqrt(N) and compares with ||c||_2 |B_N|^{1/6}; Blocks compares with the
/// l^2 sum of the L^6 norms of the block pieces.
inline RatioResult surface_ratio(std::int64_t N, const SurfacePsi& psi, const CoeffFamily& coeffs, SurfaceMode mode,
                                 std::int64_t M, const SurfaceOptions& opt = {}) {
    const double sN = std::sqrt(static_cast<double>(N));
    std::int64_t blk = 1;
    if (mode == SurfaceMode::PointMass) {
        if (M * M != N) throw ArgumentError("surface_ratio: pointmass mode needs M = sqrt(N)");
    } else {
        if (static_cast<double>(M) < sN - 1e-9) throw ArgumentError("surface_ratio: blocks mode needs M >= sqrt(N)");
        blk = opt.block_length > 0 ? opt.block_length : std::max<std::int64_t>(1, std::llround(static_cast<double>(M) / sN));
    }
    const auto n = static_cast<std::size_t>(M);
    const ComplexMatrix C = coeffs.matrix(n, n);
    const std::size_t nb = (n + static_cast<std::size_t>(blk) - 1) / static_cast<std::size_t>(blk);
    const int ncomp = mode == SurfaceMode::PointMass ? 1 : 1 + static_cast<int>(nb * nb);
    std::vector<double> xi(n), p1(n), p2(n), p3(n), p4(n);
    for (std::size_t i = 0; i < n; ++i) {
        xi[i] = static_cast<double>(i + 1) / static_cast<double>(M);
        p1[i] = psi.eval(1, 0, xi[i]);
        p2[i] = psi.eval(2, 0, xi[i]);
        p3[i] = psi.eval(3, 0, xi[i]);
        p4[i] = psi.eval(4, 0, xi[i]);
    }
    const double R = static_cast<double>(N), vol = ball_volume(R);
    const auto b = qmc_batches(4, ncomp, opt.ball.samples, opt.ball.batches, opt.ball.seed, opt.ball.workers,
                               [&](const double* u, double* out) {
                                   const Point4 x = ball_point(u, R, opt.ball.center);
                                   std::vector<cplx> A(n), B(n);
                                   for (std::size_t i = 0; i < n; ++i) {
                                       A[i] = unit_phase(frac_centered(x.x1 * xi[i] + x.x3 * p1[i] + x.x4 * p3[i]));
                                       B[i] = unit_phase(frac_centered(x.x2 * xi[i] + x.x3 * p2[i] + x.x4 * p4[i]));
                                   }
                                   cplx total{};
                                   for (std::size_t I = 0; I < nb; ++I)
                                       for (std::size_t J = 0; J < nb; ++J) {
                                           cplx s{};
                                           for (std::size_t i = I * blk; i < std::min(n, (I + 1) * blk); ++i) {
                                               cplx row{};
                                               for (std::size_t j = J * blk; j < std::min(n, (J + 1) * blk); ++j)
                                                   row += C(i, j) * B[j];
                                               s += A[i] * row;
                                           }
                                           total += s;
                                           if (ncomp > 1) out[1 + I * nb + J] = std::pow(std::norm(s), 3);
                                       }
                                   out[0] = std::pow(std::norm(total), 3);
                               });
    auto rhs_of = [&](const std::vector<double>& m) {
        if (mode == SurfaceMode::PointMass) return std::pow(vol, 1.0 / 6) * norm_l(C.data, 2);
        double s = 0;
        for (int k = 1; k < ncomp; ++k) s += std::pow(vol * m[static_cast<std::size_t>(k)], 1.0 / 3);
        return std::sqrt(s);
    };
    std::vector<double> means(static_cast<std::size_t>(ncomp));
    for (int k = 0; k < ncomp; ++k) means[static_cast<std::size_t>(k)] = b.mean(static_cast<std::size_t>(k));
    RatioResult r;
    r.lhs = std::pow(vol * means[0], 1.0 / 6);
    r.rhs = rhs_of(means);
    r.ratio = r.lhs / r.rhs;
    r.error = b.spread([&](const std::vector<double>& m) { return std::pow(vol * m[0], 1.0 / 6) / rhs_of(m); });
    r.samples = b.samples;
    r.terms = static_cast<int>(n * n);
    return r;
}

// ---------------------------------------------------------------- transversality

struct TransversalityReport {
    double ratio = 0, error = 0;            // mean|E1 E2|^6 / (mean|E1|^6 mean|E2|^6), arcs at l1, l2
    double raw = 0;                         // N^4 int|E1 E2|^6 / (int|E1|^6 int|E2|^6) = ratio N^4 / |B_N|
    double same_ratio = 0, same_error = 0;  // both factors on the arc at l1
    double same_raw = 0;
    int waves = 0;
    std::int64_t samples = 0;
};

/// ||E1 E2||_6^6 against N^-4 ||E1||_6^6 ||E2||_6^6 on B_N for arcs
/// [l_i, l_i + N^{-1/2}], each carrying `waves` frequencies spaced N^{-1/2}/waves.
inline TransversalityReport transversality_check(std::int64_t N, const Curve& curve, double l1, double l2,
                                                 const CoeffFamily& c1, const CoeffFamily& c2, int waves = 0,
                                                 const BallOptions& opt = {}) {
    if (N < 4) throw ArgumentError("transversality_check: N must be >= 4");
    const double len = 1 / std::sqrt(static_cast<double>(N));
    if (waves <= 0) waves = static_cast<int>(std::llround(std::sqrt(static_cast<double>(N))));
    auto arc = [&](double l) {
        std::vector<double> t;
        for (int k = 0; k < waves; ++k) t.push_back(l + len * k / waves);
        return t;
    };
    const auto n = static_cast<std::size_t>(waves);
    const CurveWaves a(curve, arc(l1), c1.vector(n, 1)), b(curve, arc(l2), c2.vector(n, 2)),
        a2(curve, arc(l1), c2.vector(n, 2));
    const double R = static_cast<double>(N), scale = std::pow(R, 4) / ball_volume(R);
    const auto q = qmc_batches(4, 5, opt.samples, opt.batches, opt.seed, opt.workers, [&](const double* u, double* out) {
        const Point4 x = ball_point(u, R, opt.center);
        const double ea = a.abs6(x), eb = b.abs6(x), ea2 = a2.abs6(x);
        out[0] = ea * eb;
        out[1] = ea;
        out[2] = eb;
        out[3] = ea * ea2;
        out[4] = ea2;
    });
    auto sep = [](const std::vector<double>& m) { return m[0] / (m[1] * m[2]); };
    auto same = [](const std::vector<double>& m) { return m[3] / (m[1] * m[4]); };
    std::vector<double> m(5);
    for (std::size_t k = 0; k < 5; ++k) m[k] = q.mean(k);
    TransversalityReport r;
    r.waves = waves;
    r.samples = q.samples;
    r.ratio = sep(m);
    r.error = q.spread(sep);
    r.raw = scale * r.ratio;
    r.same_ratio = same(m);
    r.same_error = q.spread(same);
    r.same_raw = scale * r.same_ratio;
    return r;
}

}  // namespace esl
