#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "core.hpp"
#include "curve.hpp"
#include "expsum.hpp"
#include "qmc.hpp"

namespace esl {

/// Integration box for the moment integrals. x1 and x2 are periodic axes
/// and must span a whole number of periods; x3 or x4 may have zero width,
/// in which case that axis is a point evaluation.
struct Domain4 {
    Interval x1{0, 1}, x2{0, 1}, x3{0, 1}, x4{0, 1};
    double alpha = std::numeric_limits<double>::quiet_NaN();
    double beta = std::numeric_limits<double>::quiet_NaN();
    Coords coords = Coords::Conjecture;

    /// [0,1]^2 x [0,N^alpha] x [0,N^beta].
    static Domain4 conjecture(std::int64_t N, double alpha, double beta) {
        Domain4 d;
        d.alpha = alpha;
        d.beta = beta;
        d.x3 = {0, std::pow(static_cast<double>(N), alpha)};
        d.x4 = {0, std::pow(static_cast<double>(N), beta)};
        d.validate();
        return d;
    }
    /// [0,1]^2 with x3 = x4 = 0.
    static Domain4 slice() {
        Domain4 d;
        d.x3 = {0, 0};
        d.x4 = {0, 0};
        return d;
    }

    void validate() const {
        for (const Interval* iv : {&x1, &x2, &x3, &x4})
            if (!std::isfinite(iv->lo) || !std::isfinite(iv->hi) || iv->hi < iv->lo)
                throw ArgumentError("Domain4: intervals must be finite with lo <= hi");
        if (!(x1.width() > 0) || !(x2.width() > 0)) throw ArgumentError("Domain4: x1 and x2 intervals must be nonempty");
        if (!std::isnan(alpha) || !std::isnan(beta))
            if (!(alpha >= beta && beta >= 0)) throw ArgumentError("Domain4: need alpha >= beta >= 0");
    }

    /// The same box in conjecture coordinates and the Jacobian factor
    /// (integral here = integral there / jacobian).
    Domain4 in_conjecture(std::int64_t N, double* jacobian) const {
        if (coords == Coords::Conjecture) {
            if (jacobian) *jacobian = 1;
            return *this;
        }
        const double n = static_cast<double>(N);
        Domain4 d = *this;
        d.coords = Coords::Conjecture;
        d.x2 = {x2.lo / n, x2.hi / n};
        d.x3 = {x3.lo * n, x3.hi * n};
        d.x4 = {x4.lo * n, x4.hi * n};
        if (jacobian) *jacobian = n;
        return d;
    }

    double volume() const {
        auto w = [](const Interval& i) { return i.width() == 0 ? 1.0 : i.width(); };
        return x1.width() * x2.width() * w(x3) * w(x4);
    }
};

/// One factor E_I^k of a product of curve sums.
struct SumFactor {
    IntervalZ I;
    int k;
};

enum class MomentEngine { Spectral, Direct };

inline const char* to_string(MomentEngine e) { return e == MomentEngine::Spectral ? "spectral" : "direct"; }

/// Tensor grid: uniform sampling of the periodic axes above their
/// trigonometric degree, trapezoid on x3/x4 at rho times the bandwidth.
struct SamplingPlan {
    std::int64_t n_x1 = 0, n_x2 = 0;  // samples per period; 0 means design automatically
    std::int64_t K3 = 0, K4 = 0;      // trapezoid panels on x3, x4
    std::int64_t degree1 = 0, degree2 = 0;
    double bandwidth3 = 0, bandwidth4 = 0;
    double rho = 4;
    MomentEngine engine = MomentEngine::Spectral;
    double halving_tol = 1e-3;
    int max_refinements = 12;
    double max_pairs = 5e8;   // spectral budget: multiset pairs
    double max_points = 2e8;  // direct budget: integrand samples
    int workers = 1;
};

struct MomentReport {
    std::string curve_id;
    std::int64_t N = 0;
    double p = 0;
    Domain4 domain;
    SamplingPlan plan;
    double value = 0;
    double error = 0;
    double exact = std::numeric_limits<double>::quiet_NaN();  // closed-form integral when available
    double floor = 0;                                         // constructive lower bound
    std::string method;                                       // grid | quasi-random
    std::string engine;
    double wall_ms = 0;
    bool converged = false;
    bool certified = false;
    int refinements = 0;
    double work = 0;  // pairs or samples
};

namespace detail {

inline double sin_pi(double x) {
    const double n = std::nearbyint(x);
    const double s = std::sin(kPi * (x - n));
    return std::fmod(n, 2.0) == 0 ? s : -s;
}

/// Axis quadrature of e(lam x): trapezoid with K panels on [a, a+L], or the
/// exact integral when K < 0. A zero-width axis is the point value e(lam a).
inline cplx axis_exp(double lam, double a, double L, std::int64_t K) {
    if (L == 0) return unit_phase(frac_centered(lam * a));
    if (K < 0) {
        const double x = lam * L;
        const double sinc = x == 0 ? 1.0 : sin_pi(x) / (kPi * x);
        return L * sinc * unit_phase(frac_centered(lam * (a + 0.5 * L)));
    }
    const double h = L / static_cast<double>(K);
    const double th = frac_centered(lam * h);
    const double kd = static_cast<double>(K);
    cplx geo;
    if (th == 0)
        geo = kd + 1;
    else
        geo = unit_phase(frac_centered(th * kd * 0.5)) * (sin_pi(th * (kd + 1)) / sin_pi(th));
    const cplx trap = geo - 0.5 * (1.0 + unit_phase(frac_centered(th * kd)));
    return h * unit_phase(frac_centered(lam * a)) * trap;
}

struct SpectralTerm {
    std::int64_t s1, s2;
    double f3, f4, w;
};

/// E_{I1}^{k1} E_{I2}^{k2} ... as a weighted sum of exponentials, grouped by
/// (sum n, sum n^2). class_start holds the boundaries.
struct Spectrum {
    std::vector<SpectralTerm> terms;
    std::vector<std::size_t> class_start;
    double pairs = 0;
};

inline void multisets(const IntervalZ& I, int k, const std::vector<double>& p3, const std::vector<double>& p4,
                      std::vector<SpectralTerm>& out) {
    std::vector<std::int64_t> idx(static_cast<std::size_t>(k), 0);
    const std::int64_t n = I.size();
    double kfact = 1;
    for (int i = 2; i <= k; ++i) kfact *= i;
    while (true) {
        SpectralTerm t{0, 0, 0, 0, kfact};
        int run = 1;
        for (int i = 0; i < k; ++i) {
            const std::int64_t v = I.lo() + idx[static_cast<std::size_t>(i)];
            t.s1 += v;
            t.s2 += v * v;
            t.f3 += p3[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
            t.f4 += p4[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
            if (i > 0 && idx[static_cast<std::size_t>(i)] == idx[static_cast<std::size_t>(i - 1)]) {
                ++run;
                t.w /= run;
            } else {
                run = 1;
            }
        }
        out.push_back(t);
        int i = k - 1;
        while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - 1) --i;
        if (i < 0) break;
        const std::int64_t nv = idx[static_cast<std::size_t>(i)] + 1;
        for (int j = i; j < k; ++j) idx[static_cast<std::size_t>(j)] = nv;
    }
}

inline double multiset_count(std::int64_t n, int k) {
    double c = 1;
    for (int i = 1; i <= k; ++i) c = c * static_cast<double>(n + i - 1) / i;
    return c;
}

inline Spectrum build_spectrum(const Curve& curve, std::int64_t N, const std::vector<SumFactor>& factors,
                               double max_terms) {
    double count = 1;
    for (const auto& f : factors) count *= multiset_count(f.I.size(), f.k);
    if (count > max_terms) throw ResourceError("moment: spectral term count exceeds budget; use the quasi-random method");
    std::vector<SpectralTerm> acc{{0, 0, 0, 0, 1}};
    for (const auto& f : factors) {
        std::vector<double> p3, p4;
        for (std::int64_t n = f.I.lo(); n <= f.I.hi(); ++n) {
            const double t = static_cast<double>(n) / static_cast<double>(N);
            p3.push_back(curve.derivative(3, 0, t));
            p4.push_back(curve.derivative(4, 0, t));
        }
        std::vector<SpectralTerm> ms, next;
        multisets(f.I, f.k, p3, p4, ms);
        next.reserve(acc.size() * ms.size());
        for (const auto& a : acc)
            for (const auto& b : ms) next.push_back({a.s1 + b.s1, a.s2 + b.s2, a.f3 + b.f3, a.f4 + b.f4, a.w * b.w});
        acc.swap(next);
    }
    std::sort(acc.begin(), acc.end(), [](const SpectralTerm& a, const SpectralTerm& b) {
        if (a.s1 != b.s1) return a.s1 < b.s1;
        if (a.s2 != b.s2) return a.s2 < b.s2;
        if (a.f3 != b.f3) return a.f3 < b.f3;
        return a.f4 < b.f4;
    });
    Spectrum S;
    S.terms = std::move(acc);
    for (std::size_t i = 0; i < S.terms.size(); ++i)
        if (i == 0 || S.terms[i].s1 != S.terms[i - 1].s1 || S.terms[i].s2 != S.terms[i - 1].s2) S.class_start.push_back(i);
    S.class_start.push_back(S.terms.size());
    for (std::size_t c = 0; c + 1 < S.class_start.size(); ++c) {
        const double m = static_cast<double>(S.class_start[c + 1] - S.class_start[c]);
        S.pairs += m * m;
    }
    return S;
}

/// Sum over classes of the x3/x4 quadrature of |class sum|^2; K < 0 on an
/// axis selects the exact integral there.
inline double spectral_value(const Spectrum& S, const Domain4& d, std::int64_t K3, std::int64_t K4, int workers) {
    const std::size_t nc = S.class_start.size() - 1;
    const Tiling tiles{nc, 256};
    std::vector<double> part(tiles.count(), 0.0);
    const double a3 = d.x3.lo, L3 = d.x3.width(), a4 = d.x4.lo, L4 = d.x4.width();
    const double t30 = L3 == 0 ? 1.0 : L3, t40 = L4 == 0 ? 1.0 : L4;
    parallel_for(tiles.count(), workers, [&](std::size_t t) {
        CompensatedSum<double> acc;
        for (std::size_t c = tiles.begin(t); c < tiles.end(t); ++c) {
            const std::size_t b = S.class_start[c], e = S.class_start[c + 1];
            CompensatedSum<double> cls;
            for (std::size_t i = b; i < e; ++i) {
                const auto& u = S.terms[i];
                cls += u.w * u.w * t30 * t40;
                for (std::size_t j = i + 1; j < e; ++j) {
                    const auto& v = S.terms[j];
                    const cplx z = axis_exp(u.f3 - v.f3, a3, L3, K3) * axis_exp(u.f4 - v.f4, a4, L4, K4);
                    cls += 2 * u.w * v.w * z.real();
                }
            }
            acc += cls.value();
        }
        part[t] = acc.value();
    });
    CompensatedSum<double> total;
    for (double v : part) total += v;
    return total.value() * d.x1.width() * d.x2.width();
}

inline bool whole_periods(double w) { return w >= 1 && std::abs(w - std::nearbyint(w)) <= 1e-12 * w; }

/// Direct tensor-grid sum at K panels (fine) and on the even nodes (coarse).
inline std::pair<double, double> direct_value(const Curve& curve, std::int64_t N,
                                              const std::vector<SumFactor>& factors, const Domain4& d,
                                              const SamplingPlan& plan, std::int64_t K3, std::int64_t K4) {
    const std::int64_t n3 = d.x3.width() == 0 ? 1 : K3 + 1, n4 = d.x4.width() == 0 ? 1 : K4 + 1;
    const double h3 = d.x3.width() == 0 ? 0 : d.x3.width() / static_cast<double>(K3);
    const double h4 = d.x4.width() == 0 ? 0 : d.x4.width() / static_cast<double>(K4);
    auto weights = [](std::int64_t i, std::int64_t n, double h, bool point) -> std::pair<double, double> {
        if (point) return {1.0, 1.0};
        const bool end = i == 0 || i == n - 1;
        const double fine = h * (end ? 0.5 : 1.0);
        const double coarse = (i % 2) ? 0.0 : 2 * h * (end ? 0.5 : 1.0);
        return {fine, coarse};
    };
    const std::size_t nodes = static_cast<std::size_t>(n3 * n4);
    const Tiling tiles{nodes, 16};
    std::vector<double> pf(tiles.count(), 0.0), pc(tiles.count(), 0.0);
    parallel_for(tiles.count(), plan.workers, [&](std::size_t t) {
        CompensatedSum<double> af, ac;
        for (std::size_t node = tiles.begin(t); node < tiles.end(t); ++node) {
            const std::int64_t i3 = static_cast<std::int64_t>(node) / n4, i4 = static_cast<std::int64_t>(node) % n4;
            const auto w3 = weights(i3, n3, h3, d.x3.width() == 0);
            const auto w4 = weights(i4, n4, h4, d.x4.width() == 0);
            const double x3 = d.x3.lo + static_cast<double>(i3) * h3, x4 = d.x4.lo + static_cast<double>(i4) * h4;
            CompensatedSum<double> inner;
            for (std::int64_t j2 = 0; j2 < plan.n_x2; ++j2) {
                const double x2 = static_cast<double>(j2) / static_cast<double>(plan.n_x2);
                std::vector<double> prod(static_cast<std::size_t>(plan.n_x1), 1.0);
                for (const auto& f : factors) {
                    const auto g = eval_grid_x1(curve, N, f.I, x2, x3, x4, plan.n_x1);
                    for (std::size_t j = 0; j < g.size(); ++j) prod[j] *= std::pow(std::norm(g[j]), f.k);
                }
                for (double v : prod) inner += v;
            }
            const double mean = inner.value() / static_cast<double>(plan.n_x1 * plan.n_x2);
            af += w3.first * w4.first * mean;
            ac += w3.second * w4.second * mean;
        }
        pf[t] = af.value();
        pc[t] = ac.value();
    });
    CompensatedSum<double> fine, coarse;
    for (std::size_t t = 0; t < pf.size(); ++t) {
        fine += pf[t];
        coarse += pc[t];
    }
    const double per = d.x1.width() * d.x2.width();
    return {fine.value() * per, coarse.value() * per};
}

}  // namespace detail

/// Fills the automatic parts of a plan from the degree and bandwidth bounds
/// of the integrand prod |E_{I_f}|^{2 k_f}.
inline SamplingPlan design_plan(const Curve& curve, std::int64_t N, const std::vector<SumFactor>& factors,
                                const Domain4& conj, SamplingPlan plan = {}) {
    std::int64_t d1 = 0, d2 = 0;
    double b3 = 0, b4 = 0;
    for (const auto& f : factors) {
        if (f.I.is_empty()) continue;
        d1 += f.k * (f.I.hi() - f.I.lo());
        d2 += f.k * (f.I.hi() * f.I.hi() - f.I.lo() * f.I.lo());
        double lo3 = INFINITY, hi3 = -INFINITY, lo4 = INFINITY, hi4 = -INFINITY;
        for (std::int64_t n = f.I.lo(); n <= f.I.hi(); ++n) {
            const double t = static_cast<double>(n) / static_cast<double>(N);
            const double v3 = curve.derivative(3, 0, t), v4 = curve.derivative(4, 0, t);
            lo3 = std::min(lo3, v3);
            hi3 = std::max(hi3, v3);
            lo4 = std::min(lo4, v4);
            hi4 = std::max(hi4, v4);
        }
        b3 += f.k * (hi3 - lo3);
        b4 += f.k * (hi4 - lo4);
    }
    plan.degree1 = d1;
    plan.degree2 = d2;
    plan.bandwidth3 = b3;
    plan.bandwidth4 = b4;
    if (plan.n_x1 == 0) plan.n_x1 = d1 + 2;
    if (plan.n_x2 == 0) plan.n_x2 = d2 + 2;
    auto panels = [&](double L, double B) -> std::int64_t {
        if (L == 0) return 0;
        const auto k = static_cast<std::int64_t>(std::ceil(L * plan.rho * std::max(B, 1.0 / L) / 2));
        return 2 * std::max<std::int64_t>(k, 1);
    };
    if (plan.K3 == 0) plan.K3 = panels(conj.x3.width(), b3);
    if (plan.K4 == 0) plan.K4 = panels(conj.x4.width(), b4);
    return plan;
}

/// vol(box) (|I| cos(pi/4))^p for the box around the origin on which every
/// phase of every term stays in [0, 1/16] per axis.
inline double constructive_floor(const Curve& curve, std::int64_t N, const IntervalZ& I, double p, const Domain4& conj) {
    if (I.is_empty()) return 0;
    double m3 = 0, m4 = 0;
    for (std::int64_t n = I.lo(); n <= I.hi(); ++n) {
        const double t = static_cast<double>(n) / static_cast<double>(N);
        m3 = std::max(m3, std::abs(curve.derivative(3, 0, t)));
        m4 = std::max(m4, std::abs(curve.derivative(4, 0, t)));
    }
    const double hi = static_cast<double>(I.hi());
    auto overlap = [](const Interval& iv, double b) {
        if (iv.width() == 0) return (iv.lo >= 0 && iv.lo <= b) ? 1.0 : 0.0;
        return std::max(0.0, std::min(iv.hi, b) - std::max(iv.lo, 0.0));
    };
    const double vol = overlap(conj.x1, 1 / (16 * hi)) * overlap(conj.x2, 1 / (16 * hi * hi)) *
                       overlap(conj.x3, m3 > 0 ? 1 / (16 * m3) : INFINITY) *
                       overlap(conj.x4, m4 > 0 ? 1 / (16 * m4) : INFINITY);
    return vol * std::pow(static_cast<double>(I.size()) * std::cos(kPi / 4), p);
}

/// Integral of prod_f |E_{I_f,N}|^{2 k_f} over the domain on a tensor grid.
inline MomentReport moment_product(const Curve& curve, std::int64_t N, const std::vector<SumFactor>& factors,
                                   const Domain4& domain, SamplingPlan plan = {}) {
    const auto start = std::chrono::steady_clock::now();
    domain.validate();
    double jac = 1;
    const Domain4 d = domain.in_conjecture(N, &jac);
    for (const auto& f : factors) detail::check_in_range(N, f.I);
    if (!detail::whole_periods(d.x1.width()) || !detail::whole_periods(d.x2.width()))
        throw ArgumentError("moment: x1 and x2 ranges must cover whole periods for exact sampling");
    plan = design_plan(curve, N, factors, d, plan);
    if (plan.n_x1 <= plan.degree1 || plan.n_x2 <= plan.degree2)
        throw ArgumentError("moment: plan samples x1/x2 below the trigonometric degree");
    if ((d.x3.width() > 0 && (plan.K3 < 2 || plan.K3 % 2)) || (d.x4.width() > 0 && (plan.K4 < 2 || plan.K4 % 2)))
        throw ArgumentError("moment: trapezoid panel counts must be even and >= 2");

    MomentReport r;
    r.curve_id = curve.id();
    r.N = N;
    r.domain = domain;
    r.method = "grid";
    r.engine = to_string(plan.engine);
    r.certified = true;
    for (const auto& f : factors)
        if (f.I.is_empty()) {
            r.plan = plan;
            r.converged = true;
            return r;
        }

    double fine = 0, coarse = 0;
    if (plan.engine == MomentEngine::Spectral) {
        const auto S = detail::build_spectrum(curve, N, factors, plan.max_pairs);
        if (S.pairs > plan.max_pairs)
            throw ResourceError("moment: spectral pair count exceeds budget; use the quasi-random method");
        r.work = S.pairs;
        coarse = detail::spectral_value(S, d, plan.K3 / 2, plan.K4 / 2, plan.workers);
        fine = detail::spectral_value(S, d, plan.K3, plan.K4, plan.workers);
        while (std::abs(fine - coarse) > plan.halving_tol * std::abs(fine) && r.refinements < plan.max_refinements) {
            plan.K3 *= 2;
            plan.K4 *= 2;
            ++r.refinements;
            coarse = fine;
            fine = detail::spectral_value(S, d, plan.K3, plan.K4, plan.workers);
        }
        r.exact = detail::spectral_value(S, d, -1, -1, plan.workers) / jac;
    } else {
        while (true) {
            const double pts = static_cast<double>(plan.n_x1) * static_cast<double>(plan.n_x2) *
                               static_cast<double>(plan.K3 + 1) * static_cast<double>(plan.K4 + 1);
            if (pts > plan.max_points)
                throw ResourceError("moment: direct grid exceeds the point budget; use the quasi-random method");
            r.work = pts;
            std::tie(fine, coarse) = detail::direct_value(curve, N, factors, d, plan, plan.K3, plan.K4);
            if (std::abs(fine - coarse) <= plan.halving_tol * std::abs(fine) || r.refinements >= plan.max_refinements)
                break;
            plan.K3 *= 2;
            plan.K4 *= 2;
            ++r.refinements;
        }
    }
    r.plan = plan;
    r.value = fine / jac;
    r.error = std::abs(fine - coarse) / jac;
    r.converged = r.error <= plan.halving_tol * std::abs(r.value);
    r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return r;
}

inline void check_even_p(double p) {
    if (!(p >= 2 && p <= 12) || std::fmod(p, 2.0) != 0) throw ArgumentError("moment: p must be an even integer in [2, 12]");
}

/// Integral of |E_{I,N}|^p over the domain.
inline MomentReport moment_lp(const Curve& curve, std::int64_t N, const IntervalZ& I, int p, const Domain4& domain,
                              const SamplingPlan& plan = {}) {
    check_even_p(p);
    auto r = moment_product(curve, N, {{I, p / 2}}, domain, plan);
    r.p = p;
    double jac = 1;
    r.floor = constructive_floor(curve, N, I, p, domain.in_conjecture(N, &jac)) / jac;
    return r;
}

inline std::int64_t interval_gap(const IntervalZ& a, const IntervalZ& b) {
    return std::max(b.lo() - a.hi(), a.lo() - b.hi());
}

inline void check_bilinear(std::int64_t N, const IntervalZ& I1, const IntervalZ& I2, double min_sep) {
    for (const auto* I : {&I1, &I2})
        if (!I->is_empty() && (2 * I->lo() < N || I->hi() > N))
            throw ArgumentError("moment_bilinear: intervals must lie in [N/2, N]");
    if (!I1.is_empty() && !I2.is_empty() && static_cast<double>(interval_gap(I1, I2)) < min_sep * static_cast<double>(N))
        throw ArgumentError("moment_bilinear: intervals closer than the required separation");
}

/// Integral of |E_{I1,N} E_{I2,N}|^6 over the domain.
inline MomentReport moment_bilinear(const Curve& curve, std::int64_t N, const IntervalZ& I1, const IntervalZ& I2,
                                    const Domain4& domain, const SamplingPlan& plan = {}, double min_sep = 0.125) {
    check_bilinear(N, I1, I2, min_sep);
    auto r = moment_product(curve, N, {{I1, 3}, {I2, 3}}, domain, plan);
    r.p = 12;
    return r;
}

namespace detail {

template <class F>
MomentReport quasirandom(const Curve& curve, std::int64_t N, const Domain4& domain, double p, std::int64_t samples,
                         std::uint64_t seed, int workers, int batches, const F& integrand) {
    const auto start = std::chrono::steady_clock::now();
    domain.validate();
    if (samples < (std::int64_t{1} << 16)) throw ArgumentError("moment_quasirandom: samples must be >= 2^16");
    double jac = 1;
    const Domain4 d = domain.in_conjecture(N, &jac);
    const auto est = qmc_mean(4, samples, batches, seed, workers, [&](const double* u) {
        const Point4 x{d.x1.lo + u[0] * d.x1.width(), d.x2.lo + u[1] * d.x2.width(), d.x3.lo + u[2] * d.x3.width(),
                       d.x4.lo + u[3] * d.x4.width()};
        return integrand(x);
    });
    MomentReport r;
    r.curve_id = curve.id();
    r.N = N;
    r.p = p;
    r.domain = domain;
    r.method = "quasi-random";
    r.engine = "sobol";
    r.value = est.mean * d.volume() / jac;
    r.error = est.error * d.volume() / jac;
    r.work = static_cast<double>(est.samples);
    r.converged = true;
    r.certified = false;
    r.plan.workers = workers;
    r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return r;
}

}  // namespace detail

/// Randomized Sobol estimate of the moment_lp integral. Not certified: the
/// integrand is heavy tailed near the constructive points.
inline MomentReport moment_quasirandom(const Curve& curve, std::int64_t N, const IntervalZ& I, int p,
                                       const Domain4& domain, std::int64_t samples, std::uint64_t seed, int workers = 1,
                                       int batches = 16) {
    check_even_p(p);
    detail::check_in_range(N, I);
    auto r = detail::quasirandom(curve, N, domain, p, samples, seed, workers, batches, [&](const Point4& x) {
        return std::pow(std::norm(eval_curve_sum(curve, N, I, x)), p / 2);
    });
    double jac = 1;
    r.floor = constructive_floor(curve, N, I, p, domain.in_conjecture(N, &jac)) / jac;
    return r;
}

inline MomentReport moment_bilinear_quasirandom(const Curve& curve, std::int64_t N, const IntervalZ& I1,
                                                const IntervalZ& I2, const Domain4& domain, std::int64_t samples,
                                                std::uint64_t seed, int workers = 1, int batches = 16,
                                                double min_sep = 0.125) {
    check_bilinear(N, I1, I2, min_sep);
    detail::check_in_range(N, I1);
    detail::check_in_range(N, I2);
    return detail::quasirandom(curve, N, domain, 12, samples, seed, workers, batches, [&](const Point4& x) {
        if (I1.is_empty() || I2.is_empty()) return 0.0;
        return std::pow(std::norm(eval_curve_sum(curve, N, I1, x)) * std::norm(eval_curve_sum(curve, N, I2, x)), 3);
    });
}

/// Number of 2k-tuples from I with equal sums and equal sums of squares,
/// by meet in the middle over ordered k-tuples.
inline std::uint64_t tuple_count_oracle(std::int64_t N, const IntervalZ& I, int k) {
    if (k < 1) throw ArgumentError("tuple_count_oracle: k must be >= 1");
    detail::check_in_range(N, I);
    if (I.is_empty()) return 0;
    if (std::pow(static_cast<double>(I.size()), k) > 1e8) throw ResourceError("tuple_count_oracle: |I|^k exceeds 1e8");
    std::map<std::pair<std::int64_t, std::int64_t>, std::uint64_t> hist;
    std::vector<std::int64_t> t(static_cast<std::size_t>(k), I.lo());
    while (true) {
        std::int64_t s1 = 0, s2 = 0;
        for (auto v : t) {
            s1 += v;
            s2 += v * v;
        }
        ++hist[{s1, s2}];
        int i = k - 1;
        while (i >= 0 && t[static_cast<std::size_t>(i)] == I.hi()) t[static_cast<std::size_t>(i--)] = I.lo();
        if (i < 0) break;
        ++t[static_cast<std::size_t>(i)];
    }
    std::uint64_t total = 0;
    for (const auto& [key, c] : hist) total += c * c;
    return total;
}

}  // namespace esl
