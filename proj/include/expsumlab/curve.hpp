#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"

namespace esl {

enum class CurveFamily { Power, Moment, Custom };

inline const char* to_string(CurveFamily f) {
    switch (f) {
        case CurveFamily::Power: return "power";
        case CurveFamily::Moment: return "moment";
        case CurveFamily::Custom: return "custom";
    }
    return "?";
}

/// A planar-curve pair (phi3, phi4) on a working interval, usually [1/2, 1].
///
/// Power and moment curves are phi3 = t^a, phi4 = t^b. Custom curves are
/// power series about a center. derivative() works at any order on the
/// analytic domain; eval_phi() is the checked public entry point.
class Curve {
public:
    static Curve moment() {
        Curve c;
        c.family_ = CurveFamily::Moment;
        c.a_ = 3;
        c.b_ = 4;
        return c;
    }

    static Curve power(double a, double b) {
        if (!std::isfinite(a) || !std::isfinite(b)) throw ArgumentError("power curve: non-finite exponent");
        Curve c;
        c.family_ = CurveFamily::Power;
        c.a_ = a;
        c.b_ = b;
        return c;
    }

    /// phi_k(t) = sum_i coeff_k[i] (t - center)^i.
    static Curve custom(double center, std::vector<double> c3, std::vector<double> c4,
                        Interval domain = {0.5, 1.0}) {
        if (c3.empty() || c4.empty()) throw ArgumentError("custom curve: empty coefficient list");
        for (double v : c3)
            if (!std::isfinite(v)) throw ArgumentError("custom curve: non-finite coefficient");
        for (double v : c4)
            if (!std::isfinite(v)) throw ArgumentError("custom curve: non-finite coefficient");
        if (!(domain.lo < domain.hi)) throw ArgumentError("custom curve: empty domain");
        Curve c;
        c.family_ = CurveFamily::Custom;
        c.center_ = center;
        c.c3_ = std::move(c3);
        c.c4_ = std::move(c4);
        c.domain_ = domain;
        return c;
    }

    CurveFamily family() const { return family_; }
    double a() const { return a_; }
    double b() const { return b_; }
    double center() const { return center_; }
    const std::vector<double>& coefficients(int k) const { return k == 3 ? c3_ : c4_; }
    Interval domain() const { return domain_; }

    std::string id() const {
        std::ostringstream os;
        os.precision(17);
        switch (family_) {
            case CurveFamily::Moment: os << "moment"; break;
            case CurveFamily::Power: os << "power(" << a_ << "," << b_ << ")"; break;
            case CurveFamily::Custom: os << "custom@" << center_ << "[" << c3_.size() << "," << c4_.size() << "]"; break;
        }
        return os.str();
    }

    /// Degree of phi_k when it is a polynomial.
    std::optional<int> polynomial_degree(int k) const {
        check_index(k);
        if (family_ == CurveFamily::Custom) return static_cast<int>(coefficients(k).size()) - 1;
        const double e = k == 3 ? a_ : b_;
        if (e >= 0 && e == std::floor(e)) return static_cast<int>(e);
        return std::nullopt;
    }

    /// order-th derivative of phi_k at t, for any order >= 0.
    double derivative(int k, int order, double t) const {
        check_index(k);
        if (order < 0) throw UnsupportedOrder("derivative: negative order");
        double v;
        if (family_ == CurveFamily::Custom) {
            v = series_derivative(coefficients(k), order, t - center_);
        } else {
            v = power_derivative(k == 3 ? a_ : b_, order, t);
        }
        if (!std::isfinite(v)) throw EvaluationError("derivative: non-finite value");
        return v;
    }

    /// Checked evaluation: order in [0, 4], t in the working domain.
    double eval_phi(int k, int order, double t) const {
        check_index(k);
        if (order < 0 || order > 4) throw UnsupportedOrder("eval_phi: order must be in [0, 4]");
        if (!domain_.contains(t, 1e-12)) throw DomainError("eval_phi: t outside the curve domain");
        return derivative(k, order, t);
    }

private:
    static void check_index(int k) {
        if (k != 3 && k != 4) throw ArgumentError("curve component must be 3 or 4");
    }

    static double power_derivative(double e, int order, double t) {
        const bool integral = e == std::floor(e);
        if (t <= 0 && !integral) throw DomainError("power curve: t <= 0 outside the analytic domain");
        double coef = 1;
        for (int i = 0; i < order; ++i) {
            coef *= e - i;
            if (coef == 0) return 0;
        }
        const double ex = e - order;
        if (integral) return coef * std::pow(t, static_cast<int>(ex));
        return coef * std::pow(t, ex);
    }

    static double series_derivative(const std::vector<double>& c, int order, double x) {
        double acc = 0;
        for (int i = static_cast<int>(c.size()) - 1; i >= order; --i) {
            double f = 1;
            for (int r = 0; r < order; ++r) f *= i - r;
            acc = acc * x + c[i] * f;
        }
        return acc;
    }

    CurveFamily family_ = CurveFamily::Moment;
    double a_ = 3, b_ = 4;
    double center_ = 0.75;
    std::vector<double> c3_, c4_;
    Interval domain_{0.5, 1.0};
};

// ---------------------------------------------------------------- conditions

struct ConditionThresholds {
    double a1_max = std::numeric_limits<double>::infinity();
    double a2_min = 0;
    double a3_max = std::numeric_limits<double>::infinity();
    double a4_min = 0;
};

/// Grid estimates of the non-degeneracy constants.
///
/// A1 is the derivative bound for orders 1..4. A2 and A3 are min and max of
/// |phi3'''(t) phi4''''(s) - phi4'''(t) phi3''''(s)| over grid pairs (t, s);
/// the *_diag fields restrict to t = s. A4 is min |phi3'''|.
struct CurveConditionReport {
    std::string curve_id;
    int grid_size = 0;
    double A1 = 0, A2 = 0, A3 = 0, A4 = 0;
    double A2_diag = 0, A3_diag = 0;
    bool pass1 = false, pass2 = false, pass3 = false;
    bool pass2_diag = false;
    bool all_pass() const { return pass1 && pass2 && pass3; }
};

/// Grid of grid_size + 1 equispaced points including both endpoints, so that
/// doubling grid_size refines the previous grid.
inline std::vector<double> condition_grid(Interval d, int grid_size) {
    std::vector<double> g(static_cast<std::size_t>(grid_size) + 1);
    for (int i = 0; i <= grid_size; ++i) g[i] = d.lo + (d.hi - d.lo) * i / grid_size;
    g.back() = d.hi;
    return g;
}

inline CurveConditionReport verify_conditions(const Curve& curve, int grid_size = 4096,
                                              const ConditionThresholds& thr = {}) {
    if (grid_size < 1) throw ArgumentError("verify_conditions: grid_size must be >= 1");
    const auto grid = condition_grid(curve.domain(), grid_size);
    const std::size_t n = grid.size();
    std::array<std::vector<double>, 5> d3, d4;
    for (int r = 1; r <= 4; ++r) {
        d3[r].resize(n);
        d4[r].resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            d3[r][i] = curve.derivative(3, r, grid[i]);
            d4[r][i] = curve.derivative(4, r, grid[i]);
        }
    }
    CurveConditionReport rep;
    rep.curve_id = curve.id();
    rep.grid_size = grid_size;
    double s3 = 0, s4 = 0;
    for (int r = 1; r <= 4; ++r) {
        double m3 = 0, m4 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            m3 = std::max(m3, std::abs(d3[r][i]));
            m4 = std::max(m4, std::abs(d4[r][i]));
        }
        s3 += m3;
        s4 += m4;
    }
    rep.A1 = std::max(s3, s4);

    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    double lod = lo, hid = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = d3[3][i], q = d4[3][i];
        for (std::size_t j = 0; j < n; ++j) {
            const double v = std::abs(p * d4[4][j] - q * d3[4][j]);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const double v = std::abs(p * d4[4][i] - q * d3[4][i]);
        lod = std::min(lod, v);
        hid = std::max(hid, v);
    }
    rep.A2 = lo;
    rep.A3 = hi;
    rep.A2_diag = lod;
    rep.A3_diag = hid;
    double a4 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) a4 = std::min(a4, std::abs(d3[3][i]));
    rep.A4 = a4;

    rep.pass1 = std::isfinite(rep.A1) && rep.A1 <= thr.a1_max;
    rep.pass2 = rep.A2 > thr.a2_min && rep.A3 <= thr.a3_max;
    rep.pass2_diag = rep.A2_diag > thr.a2_min && rep.A3_diag <= thr.a3_max;
    rep.pass3 = rep.A4 > thr.a4_min;
    return rep;
}

// ---------------------------------------------------------------- Jacobian

struct JacobianOptions {
    double min_separation = 0;
    int bound_grid = 64;
};

/// Jacobian of (t, s) -> (psi, psi') at (t, s).
///
/// value = det/N^2 where det is the 4x4 determinant with rows
/// (1, 2t, phi3'(t), phi4'(t)), (1, 2s, ...), (0, 2, phi3''(t), phi4''(t)),
/// (0, 2, phi3''(s), phi4''(s)). The magnitude is bracketed by
/// (t-s)^4/6 times the extremes of the third/fourth-derivative minor over the
/// interval between t and s; within_bounds records whether that held.
struct JacobianResult {
    double value = 0;
    double det = 0;
    double lower = 0;
    double upper = 0;
    bool within_bounds = false;
};

namespace detail {
inline double det4(std::array<std::array<double, 4>, 4> m) {
    double det = 1;
    for (int c = 0; c < 4; ++c) {
        int piv = c;
        for (int r = c + 1; r < 4; ++r)
            if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
        if (m[piv][c] == 0) return 0;
        if (piv != c) {
            std::swap(m[piv], m[c]);
            det = -det;
        }
        det *= m[c][c];
        for (int r = c + 1; r < 4; ++r) {
            const double f = m[r][c] / m[c][c];
            for (int k = c; k < 4; ++k) m[r][k] -= f * m[c][k];
        }
    }
    return det;
}
}  // namespace detail

inline JacobianResult jacobian_psi(const Curve& curve, double t, double s, double N,
                                   const JacobianOptions& opt = {}) {
    if (t == s) throw DegenerateInput("jacobian_psi: t == s");
    if (std::abs(t - s) < opt.min_separation) throw DegenerateInput("jacobian_psi: |t - s| below min_separation");
    if (!(N > 0)) throw ArgumentError("jacobian_psi: N must be positive");
    const auto d = [&](int k, int r, double x) { return curve.eval_phi(k, r, x); };
    std::array<std::array<double, 4>, 4> m{{
        {1, 2 * t, d(3, 1, t), d(4, 1, t)},
        {1, 2 * s, d(3, 1, s), d(4, 1, s)},
        {0, 2, d(3, 2, t), d(4, 2, t)},
        {0, 2, d(3, 2, s), d(4, 2, s)},
    }};
    JacobianResult r;
    r.det = detail::det4(m);
    r.value = r.det / (N * N);

    const double lo = std::min(t, s), hi = std::max(t, s);
    const int g = std::max(1, opt.bound_grid);
    std::vector<double> p3(g + 1), p4(g + 1), q3(g + 1), q4(g + 1);
    for (int i = 0; i <= g; ++i) {
        const double x = lo + (hi - lo) * i / g;
        p3[i] = curve.derivative(3, 3, x);
        p4[i] = curve.derivative(4, 3, x);
        q3[i] = curve.derivative(3, 4, x);
        q4[i] = curve.derivative(4, 4, x);
    }
    double mmin = std::numeric_limits<double>::infinity(), mmax = 0;
    for (int i = 0; i <= g; ++i)
        for (int j = 0; j <= g; ++j) {
            const double v = std::abs(p3[i] * q4[j] - p4[i] * q3[j]);
            mmin = std::min(mmin, v);
            mmax = std::max(mmax, v);
        }
    const double w4 = std::pow(hi - lo, 4) / 6.0 / (N * N);
    r.lower = w4 * mmin;
    r.upper = w4 * mmax;
    const double slack = 1e-9 * std::max(r.upper, std::abs(r.value));
    r.within_bounds = std::abs(r.value) >= r.lower - slack && std::abs(r.value) <= r.upper + slack;
    return r;
}

// ---------------------------------------------------------------- rescaling

/// Power series of the rescaled curve pair about 0, in the block variable
/// m/M. Truncated when the next term drops below 1e-15 of the accumulated
/// size on [0, t_max], capped at max_terms.
struct RescaledSeries {
    std::vector<double> c3, c4;
    int terms3 = 0, terms4 = 0;
};

namespace detail {
inline double factorial(int n) {
    double f = 1;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}
}  // namespace detail

inline RescaledSeries rescaled_series(const Curve& curve, double t0, double ratio, double t_max = 2.0,
                                      int max_terms = 64) {
    const double d3 = curve.derivative(3, 3, t0);
    if (d3 == 0) throw DegenerateInput("rescaled_series: phi3''' vanishes at the block start");
    const double d4 = curve.derivative(4, 3, t0);
    const double q = d4 / d3;

    const auto deg3 = curve.polynomial_degree(3);
    const auto deg4 = curve.polynomial_degree(4);
    std::optional<int> exact4;
    if (deg3 && deg4) exact4 = std::max(*deg3, *deg4);

    // Polynomial components keep every term up to their degree.
    auto build = [&](int first, std::optional<int> exact, const auto& coef) {
        std::vector<double> c(first, 0.0);
        double acc = 0;
        for (int n = first; n < max_terms; ++n) {
            if (exact && n > *exact) return c;
            const double term = coef(n);
            const double size = std::abs(term) * std::pow(t_max, n);
            if (!exact && n > first + 1 && size < 1e-15 * acc) return c;
            c.push_back(term);
            acc += size;
        }
        if (exact) return c;
        throw PrecisionError("rescaled_series: tail did not converge within max_terms");
    };

    RescaledSeries s;
    s.c3 = build(3, deg3, [&](int n) {
        return curve.derivative(3, n, t0) * std::pow(ratio, n - 3) / detail::factorial(n);
    });
    s.c4 = build(4, exact4, [&](int n) {
        const double num = curve.derivative(4, n, t0) - q * curve.derivative(3, n, t0);
        return num * std::pow(ratio, n - 4) / detail::factorial(n);
    });
    s.terms3 = static_cast<int>(s.c3.size()) - 3;
    s.terms4 = static_cast<int>(s.c4.size()) - 4;
    if (s.c3.size() < 4) s.c3.resize(4, 0.0);
    if (s.c4.size() < 5) s.c4.resize(5, 0.0);
    return s;
}

/// Parabolic rescaling of the block N0 + [M, 2M] to a sum of length M.
///
/// For conjecture-coordinate x, |E_{N0+I,N}(x)| = |E~_{I,M}(map(x))| for every
/// I inside [M, 2M]. The rescaled pair is the cubic Taylor remainder of the
/// curve at t0 = N0/N, scaled by (N/M)^3 and (N/M)^4; it is evaluated in closed
/// form, and `series` holds its power series when that converges on [0, 2].
struct BlockRescaling {
    std::int64_t N = 0, N0 = 0, M = 0;
    double t0 = 0;
    double A = 0, B = 0, C = 0;  // phi3 Taylor data at t0
    double D = 0, E = 0, F = 0;  // phi4 Taylor data at t0
    double q = 0;                // phi4'''(t0) / phi3'''(t0)
    Curve parent = Curve::moment();
    std::optional<Curve> series;
    int terms3 = 0, terms4 = 0;

    Point4 map(const Point4& x) const {
        const double r = ratio();
        Point4 y;
        y.x1 = x.x1 + 2.0 * static_cast<double>(N0) * x.x2 + B * x.x3 + E * x.x4;
        y.x2 = x.x2 + C * x.x3 + F * x.x4;
        y.x3 = r * r * r * (x.x3 + q * x.x4);
        y.x4 = r * r * r * r * x.x4;
        return y;
    }

    double ratio() const { return static_cast<double>(M) / static_cast<double>(N); }

    /// phi~_k(u) for u = m/M.
    double phi_tilde(int k, double u) const {
        const auto [R3, R4] = remainders(u);
        const double r = ratio();
        if (k == 3) return R3 / (r * r * r);
        return (R4 - q * R3) / (r * r * r * r);
    }

    /// sum_{m in I} e(m y1 + m^2 y2 + phi~3(m/M) y3 + phi~4(m/M) y4).
    cplx rescaled_sum(const IntervalZ& I, const Point4& y) const {
        CompensatedSum<cplx> acc;
        const double r = ratio();
        // Undo the (M/N) powers on y instead of scaling the remainders up, so
        // the phase error matches that of the unscaled sum.
        const double s3 = y.x3 / (r * r * r);
        const double s4 = y.x4 / (r * r * r * r);
        for (std::int64_t m = I.lo(); m <= I.hi(); ++m) {
            const auto [R3, R4] = remainders(static_cast<double>(m) / static_cast<double>(M));
            const double ph = int_phase(m, y.x1) + int_phase(m * m, y.x2) + frac_centered(R3 * s3) +
                              frac_centered((R4 - q * R3) * s4);
            acc += unit_phase(ph);
        }
        return acc.value();
    }

private:
    std::pair<double, double> remainders(double u) const {
        const double Nd = static_cast<double>(N);
        const double h = u * ratio();
        const double t = t0 + h;
        const double R3 = parent.derivative(3, 0, t) - A - B * Nd * h - C * Nd * Nd * h * h;
        const double R4 = parent.derivative(4, 0, t) - D - E * Nd * h - F * Nd * Nd * h * h;
        return {R3, R4};
    }
};

/// Builds the rescaling without checking that the block sits in [N/2, N].
inline BlockRescaling build_rescaling(const Curve& curve, std::int64_t N, std::int64_t N0, std::int64_t M) {
    if (N < 1 || M < 1) throw ArgumentError("build_rescaling: N and M must be positive");
    BlockRescaling br;
    br.N = N;
    br.N0 = N0;
    br.M = M;
    br.parent = curve;
    const double Nd = static_cast<double>(N);
    br.t0 = static_cast<double>(N0) / Nd;
    const double t0 = br.t0;
    br.A = curve.derivative(3, 0, t0);
    br.B = curve.derivative(3, 1, t0) / Nd;
    br.C = curve.derivative(3, 2, t0) / (2 * Nd * Nd);
    br.D = curve.derivative(4, 0, t0);
    br.E = curve.derivative(4, 1, t0) / Nd;
    br.F = curve.derivative(4, 2, t0) / (2 * Nd * Nd);
    const double d3 = curve.derivative(3, 3, t0);
    if (d3 == 0) throw DegenerateInput("build_rescaling: phi3''' vanishes at the block start");
    br.q = curve.derivative(4, 3, t0) / d3;
    try {
        const auto s = rescaled_series(curve, t0, br.ratio());
        br.terms3 = s.terms3;
        br.terms4 = s.terms4;
        br.series = Curve::custom(0.0, s.c3, s.c4, Interval{1.0, 2.0});
    } catch (const PrecisionError&) {
        br.series.reset();
    }
    return br;
}

/// Rescaling for a block N0 + [M, 2M] inside [N/2, N].
inline BlockRescaling rescale_block(const Curve& curve, std::int64_t N, std::int64_t N0, std::int64_t M) {
    if (N < 8 || M < 1) throw ArgumentError("rescale_block: need N >= 8 and M >= 1");
    if (2 * (N0 + M) < N || N0 + 2 * M > N)
        throw RangeError("rescale_block: block N0 + [M, 2M] must lie inside [N/2, N]");
    return build_rescaling(curve, N, N0, M);
}

}  // namespace esl
