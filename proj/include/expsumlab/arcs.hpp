#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "core.hpp"
#include "quadrature.hpp"

namespace esl {

/// Bump gamma(y) = exp(1 - 1/(1 - (y/2)^2)) on |y| < 2, zero outside.
struct SmoothCutoff {
    double operator()(double y) const {
        const double s = 0.5 * y;
        if (std::abs(s) >= 1) return 0;
        return std::exp(1.0 - 1.0 / (1.0 - s * s));
    }
    static constexpr double support() { return 2.0; }

    /// Integral of gamma over R.
    double integral() const {
        static const double v = [] {
            SmoothCutoff g;
            const auto r = integrate_adaptive<double>(g, -2.0, 2.0, 1e-15, 16);
            return r.value;
        }();
        return v;
    }
};

/// Farey data for w: the arc dist(w - b/q, Z) <= 1/(qM) with least q.
struct ArcClassification {
    std::int64_t q = 1, b = 1;
    double phi = 0;         // dist(w - b/q, Z)
    double phi_signed = 0;  // w - b/q reduced to [-1/2, 1/2]
    bool major_arc = false;
    double bound = 0;       // M^eps q^-1/2 min(M, phi^-1/2)
    double eps = 0.05;
};

inline double major_arc_bound(std::int64_t M, std::int64_t q, double phi, double eps) {
    const double Md = static_cast<double>(M);
    const double m = phi > 0 ? std::min(Md, 1.0 / std::sqrt(phi)) : Md;
    return std::pow(Md, eps) * m / std::sqrt(static_cast<double>(q));
}

inline ArcClassification classify_w(double w, std::int64_t M, double eps = 0.05) {
    if (M < 2) throw ArgumentError("classify_w: M must be >= 2");
    if (!std::isfinite(w)) throw ArgumentError("classify_w: non-finite w");
    const double wr = w - std::floor(w);
    const double Md = static_cast<double>(M);
    ArcClassification best;
    best.eps = eps;
    double best_phi = 2;
    for (std::int64_t q = 1; q <= M; ++q) {
        const double qd = static_cast<double>(q);
        // Nearest numerators; ties resolved towards the smaller b.
        const double x = wr * qd;
        const std::int64_t b0 = static_cast<std::int64_t>(std::floor(x));
        std::int64_t cand[2] = {b0, b0 + 1};
        if (x - static_cast<double>(b0) > 0.5) std::swap(cand[0], cand[1]);
        for (std::int64_t bb : cand) {
            const double off = frac_centered(wr - static_cast<double>(bb) / qd);
            const double phi = std::abs(off);
            std::int64_t b = ((bb % q) + q) % q;
            if (b == 0) b = q;
            if (phi <= 1.0 / (qd * Md)) {
                ArcClassification a;
                a.q = q / std::gcd(b, q);
                a.b = b / std::gcd(b, q);
                a.phi = phi;
                a.phi_signed = off;
                a.major_arc = true;
                a.eps = eps;
                a.bound = major_arc_bound(M, a.q, phi, eps);
                return a;
            }
            if (phi < best_phi) {
                best_phi = phi;
                best.q = q / std::gcd(b, q);
                best.b = b / std::gcd(b, q);
                best.phi = phi;
                best.phi_signed = off;
            }
        }
    }
    // Only reachable through rounding at an arc edge.
    best.major_arc = best.phi <= 1.0 / (static_cast<double>(best.q) * Md);
    best.bound = major_arc_bound(M, best.q, best.phi, eps);
    return best;
}

/// S(b, m, q) = (1/q) sum_{k<q} e(k^2 b/q - k m/q), phases reduced exactly mod q.
inline cplx gauss_sum(std::int64_t b, std::int64_t m, std::int64_t q) {
    if (q < 1) throw ArgumentError("gauss_sum: q must be >= 1");
    if (std::gcd(b, q) != 1) throw ArgumentError("gauss_sum: gcd(b, q) must be 1");
    const std::int64_t bq = ((b % q) + q) % q, mq = ((m % q) + q) % q;
    CompensatedSum<cplx> acc;
    for (std::int64_t k = 0; k < q; ++k) {
        const auto k2 = static_cast<__int128>(k) * k % q;
        const auto r = ((k2 * bq - static_cast<__int128>(k) * mq) % q + q) % q;
        acc += unit_phase(static_cast<double>(r) / static_cast<double>(q));
    }
    return acc.value() / static_cast<double>(q);
}

struct OscillatoryOptions {
    double v_scale = 1.0;   // admissible |v| <= v_scale / M^3
    double rel_tol = 1e-10;  // absolute tolerance is rel_tol * M
};

/// J = int gamma(y/M) e((u + m/q) y + phi y^2 + v y^3) dy, computed as
/// M int_{-2}^{2} gamma(z) e(A z + B z^2 + C z^3) dz.
inline cplx oscillatory_J(std::int64_t M, double u, double v, double phi, std::int64_t m, std::int64_t q,
                          const SmoothCutoff& gamma = {}, const OscillatoryOptions& opt = {}) {
    if (M < 1 || q < 1) throw ArgumentError("oscillatory_J: M and q must be >= 1");
    const double Md = static_cast<double>(M);
    if (std::abs(v) > opt.v_scale / (Md * Md * Md) * (1 + 1e-12))
        throw ArgumentError("oscillatory_J: |v| exceeds the admissible c/M^3");
    const double A = (u + static_cast<double>(m) / static_cast<double>(q)) * Md;
    const double B = phi * Md * Md;
    const double C = v * Md * Md * Md;
    // Fastest local frequency |A + 2Bz + 3Cz^2| on [-2, 2].
    auto freq = [&](double z) { return std::abs(A + 2 * B * z + 3 * C * z * z); };
    double fmax = std::max(freq(-2), freq(2));
    if (C != 0) {
        const double zs = -B / (3 * C);
        if (std::abs(zs) < 2) fmax = std::max(fmax, freq(zs));
    }
    const long panels = std::max<long>(1, static_cast<long>(std::ceil(4.0 * 4.0 * fmax)));
    auto f = [&](double z) {
        const double g = gamma(z);
        if (g == 0) return cplx{};
        return g * unit_phase(A * z + B * z * z + C * z * z * z);
    };
    const auto r = integrate_adaptive<cplx>(f, -2.0, 2.0, opt.rel_tol, panels);
    if (!r.converged) throw PrecisionError("oscillatory_J: quadrature did not converge");
    return Md * r.value;
}

/// G(u, w, v) = sum_{|k| <= 2M} gamma(k/M) e(k u + k^2 w + k^3 v).
inline cplx smooth_weyl(std::int64_t M, double u, double w, double v, const SmoothCutoff& gamma = {}) {
    if (M < 4) throw ArgumentError("smooth_weyl: M must be >= 4");
    CompensatedSum<cplx> acc;
    const double Md = static_cast<double>(M);
    for (std::int64_t k = -2 * M; k <= 2 * M; ++k) {
        const double g = gamma(static_cast<double>(k) / Md);
        if (g == 0) continue;
        acc += g * unit_phase(int_phase(k, u) + int_phase(k * k, w) + int_phase(k * k * k, v));
    }
    return acc.value();
}

struct PoissonTerm {
    std::int64_t m = 0;
    cplx S, J;
};

/// Truncated sum_m S(b, m, q) J(u, v, phi, m, q) with w = b/q + phi.
struct PoissonDecomposition {
    std::vector<PoissonTerm> terms;
    std::int64_t radius = 0;  // max |m - m_center| kept
    double term_tol = 0;
    cplx value;
};

inline PoissonDecomposition poisson_decomposition(std::int64_t M, std::int64_t b, std::int64_t q, double phi, double u,
                                                  double v, const SmoothCutoff& gamma = {},
                                                  const OscillatoryOptions& opt = {}) {
    if (M < 1 || q < 1) throw ArgumentError("poisson_decomposition: M and q must be >= 1");
    const double Md = static_cast<double>(M);
    PoissonDecomposition pd;
    pd.term_tol = 1e-12 * Md;
    const double qd = static_cast<double>(q);
    // Centre where u + m/q = 0; beyond the stationary band terms decay fast.
    const std::int64_t mc = static_cast<std::int64_t>(std::llround(-u * qd));
    const double Bz = std::abs(phi) * Md * Md, Cz = std::abs(v) * Md * Md * Md;
    const double band = 4 * Bz + 12 * Cz + 1;
    auto term = [&](std::int64_t m) {
        PoissonTerm t;
        t.m = m;
        t.S = gauss_sum(b, m, q);
        t.J = oscillatory_J(M, u, v, phi, m, q, gamma, opt);
        return t;
    };
    std::vector<PoissonTerm> terms;
    terms.push_back(term(mc));
    for (int dir : {-1, 1}) {
        int small = 0;
        for (std::int64_t k = 1;; ++k) {
            const std::int64_t m = mc + dir * k;
            const auto t = term(m);
            terms.push_back(t);
            pd.radius = std::max(pd.radius, k);
            const double A = std::abs((u + static_cast<double>(m) / qd) * Md);
            small = (std::abs(t.S * t.J) < pd.term_tol && A > band) ? small + 1 : 0;
            if (small >= 3) break;
            if (k > 1000000) throw PrecisionError("poisson_decomposition: truncation radius did not close");
        }
    }
    std::sort(terms.begin(), terms.end(), [](const PoissonTerm& a, const PoissonTerm& c) { return a.m < c.m; });
    CompensatedSum<cplx> acc;
    for (const auto& t : terms) acc += t.S * t.J;
    pd.terms = std::move(terms);
    pd.value = acc.value();
    return pd;
}

struct MajorArcOptions {
    int workers = 1;
    double v_scale = 1.0;        // |v| <= v_scale / M^3
    double off_min_phiM2 = 2.0;  // off-arc trials need phi M^2 >= this
    double off_cubic_ratio = 0.05;  // off-arc trials need |v| M^3 <= this * phi M^2
    bool check_poisson = true;
};

struct MajorArcTrial {
    std::int64_t q = 1, b = 1;
    double phi = 0, v = 0, u = 0;
    double G_abs = 0, on_ratio = 0, poisson_err = 0;
    bool off_tested = false;
    std::int64_t off_q = 0, off_b = 0;
    double off_phi = 0, off_u = 0, off_distance = 0, off_G_abs = 0, off_fraction = 0;
};

struct MajorArcReport {
    std::int64_t M = 0;
    double eps = 0.05;
    int trials = 0;
    std::uint64_t seed = 0;
    double max_on_ratio = 0;   // max |G| q^1/2 / min(M, phi^-1/2)
    double c_fit = 0;          // max_on_ratio / M^eps
    double max_off_fraction = 0;
    int off_trials = 0;
    double max_poisson_err = 0;  // max |G - sum S J| / M
    std::vector<MajorArcTrial> rows;
};

namespace detail {
inline std::int64_t coprime_numerator(CounterRng& rng, std::int64_t q) {
    for (;;) {
        const std::int64_t b = rng.integer(1, q);
        if (std::gcd(b, q) == 1) return b;
    }
}
inline double log_uniform(CounterRng& rng, double lo, double hi) {
    if (hi <= lo) return lo;
    return std::exp(rng.uniform(std::log(lo), std::log(hi)));
}
}  // namespace detail

/// Samples admissible (b, q, phi, v) and u on and off the major set, measuring
/// the smooth Weyl sum against the major-arc bound. Trial 0 is the degenerate
/// configuration q = 1, phi = 0, u = 0, v = 0.
inline MajorArcReport verify_major_arcs(std::int64_t M, int trials, std::uint64_t seed, double eps = 0.05,
                                    const MajorArcOptions& opt = {}) {
    if (trials < 1) throw ArgumentError("verify_major_arcs: trials must be >= 1");
    if (M < 4) throw ArgumentError("verify_major_arcs: M must be >= 4");
    const double Md = static_cast<double>(M);
    const double Me = std::pow(Md, eps);
    const double vmax = opt.v_scale / (Md * Md * Md);
    // Largest q for which [off_min_phiM2 / M^2, 1/(8 q M^(1+eps))] is non-empty.
    const auto q_off_max = static_cast<std::int64_t>(std::floor(Md * Md / (8.0 * opt.off_min_phiM2 * Md * Me)));

    MajorArcReport rep;
    rep.M = M;
    rep.eps = eps;
    rep.trials = trials;
    rep.seed = seed;
    rep.rows.resize(static_cast<std::size_t>(trials));
    const SmoothCutoff gamma;
    OscillatoryOptions oo;
    oo.v_scale = opt.v_scale;

    parallel_for(static_cast<std::size_t>(trials), opt.workers, [&](std::size_t i) {
        CounterRng rng(seed, i);
        MajorArcTrial t;
        double phis = 0;
        if (i == 0) {
            t.q = 1;
            t.b = 1;
        } else {
            t.q = rng.integer(1, M);
            t.b = detail::coprime_numerator(rng, t.q);
            const double hi = 1.0 / (static_cast<double>(t.q) * Md);
            const double lo = std::min(hi, 1.0 / (Md * Md));
            t.phi = rng.uniform() < 0.25 ? rng.uniform(0, lo) : detail::log_uniform(rng, lo, hi);
            phis = rng.sign() * t.phi;
            t.v = rng.uniform(-vmax, vmax);
            const std::int64_t m0 = rng.integer(0, t.q - 1);
            const double width = t.phi * Md * Me;
            t.u = static_cast<double>(m0) / static_cast<double>(t.q) + rng.uniform(-width, width);
        }
        const double w = static_cast<double>(t.b) / static_cast<double>(t.q) + phis;
        const cplx G = smooth_weyl(M, t.u, w, t.v, gamma);
        t.G_abs = std::abs(G);
        const double mm = t.phi > 0 ? std::min(Md, 1.0 / std::sqrt(t.phi)) : Md;
        t.on_ratio = t.G_abs * std::sqrt(static_cast<double>(t.q)) / mm;
        if (opt.check_poisson) {
            const auto pd = poisson_decomposition(M, t.b, t.q, phis, t.u, t.v, gamma, oo);
            t.poisson_err = std::abs(pd.value - G) / Md;
        }
        if (q_off_max >= 1 && i > 0) {
            t.off_tested = true;
            t.off_q = rng.integer(1, q_off_max);
            t.off_b = detail::coprime_numerator(rng, t.off_q);
            const double qd = static_cast<double>(t.off_q);
            t.off_phi = detail::log_uniform(rng, opt.off_min_phiM2 / (Md * Md), 1.0 / (8.0 * qd * Md * Me));
            const double ovmax = std::min(opt.v_scale, opt.off_cubic_ratio * t.off_phi * Md * Md) / (Md * Md * Md);
            const double ov = rng.uniform(-ovmax, ovmax);
            const double dmin = 4.0 * t.off_phi * Md * Me, dmax = 0.5 / qd;
            t.off_distance = rng.uniform(dmin, dmax);
            const std::int64_t m0 = rng.integer(0, t.off_q - 1);
            t.off_u = static_cast<double>(m0) / qd + rng.sign() * t.off_distance;
            const double ow = static_cast<double>(t.off_b) / qd + rng.sign() * t.off_phi;
            t.off_G_abs = std::abs(smooth_weyl(M, t.off_u, ow, ov, gamma));
            t.off_fraction = t.off_G_abs / major_arc_bound(M, t.off_q, t.off_phi, eps);
        }
        rep.rows[i] = t;
    });

    for (const auto& t : rep.rows) {
        rep.max_on_ratio = std::max(rep.max_on_ratio, t.on_ratio);
        rep.max_poisson_err = std::max(rep.max_poisson_err, t.poisson_err);
        if (t.off_tested) {
            ++rep.off_trials;
            rep.max_off_fraction = std::max(rep.max_off_fraction, t.off_fraction);
        }
    }
    rep.c_fit = rep.max_on_ratio / Me;
    return rep;
}

}  // namespace esl
