#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <vector>

#include "core.hpp"
#include "curve.hpp"

namespace esl {

enum class PartitionCase { Trivial, Case1, Case2a, Case2b };

inline const char* to_string(PartitionCase c) {
    switch (c) {
        case PartitionCase::Trivial: return "trivial";
        case PartitionCase::Case1: return "case1";
        case PartitionCase::Case2a: return "case2a";
        case PartitionCase::Case2b: return "case2b";
    }
    return "?";
}

/// f(t) = l1 phi3''(t) + l2 phi4''(t) and its derivative.
struct LevelFunction {
    const Curve* curve;
    double l1, l2;
    double operator()(double t) const { return l1 * curve->derivative(3, 2, t) + l2 * curve->derivative(4, 2, t); }
    double prime(double t) const { return l1 * curve->derivative(3, 3, t) + l2 * curve->derivative(4, 3, t); }
};

struct LevelSet {
    int s = 0;
    std::vector<Interval> pieces;  // at most two
};

/// Partition of the range of f on [1/2, 1] into sets R_s, 0 <= s <= j.
struct LevelSetPartition {
    std::int64_t l1 = 0, l2 = 0;
    int j = 0;
    double t0 = 0.5, f_t0 = 0, fprime_t0 = 0;
    PartitionCase kind = PartitionCase::Trivial;
    int s_star = 0;
    double range_lo = 0, range_hi = 0;
    std::vector<LevelSet> sets;  // nonempty sets in increasing s

    /// The s with v in R_s, or -1 when v is outside the range of f.
    int level_of(double v) const {
        for (const auto& r : sets)
            for (const auto& p : r.pieces)
                if (v >= p.lo && v <= p.hi) return r.s;
        return -1;
    }
};

struct PartitionOptions {
    double case1_factor = 8;   // case 1 when |f'(t0)| >= 2^j / case1_factor
    double ball_constant = 4;  // C in the case-2 threshold C max(|f'(t0)|^2 / 2^j, 1)
    int t0_grid = 100000;
};

inline int dyadic_scale(std::int64_t l1, std::int64_t l2) {
    const auto m = static_cast<std::uint64_t>(std::max(std::llabs(l1), std::llabs(l2)));
    return m == 0 ? 0 : floor_log2(m);
}

inline LevelSetPartition build_partition(const Curve& curve, std::int64_t l1, std::int64_t l2,
                                         const PartitionOptions& opt = {}) {
    LevelSetPartition P;
    P.l1 = l1;
    P.l2 = l2;
    P.j = dyadic_scale(l1, l2);
    const LevelFunction f{&curve, static_cast<double>(l1), static_cast<double>(l2)};
    const int g = std::max(2, opt.t0_grid);
    double best = std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    int ilo = 0, ihi = 0;
    auto grid_t = [&](int i) { return 0.5 + 0.5 * std::clamp(i, 0, g - 1) / (g - 1); };
    for (int i = 0; i < g; ++i) {
        const double t = grid_t(i);
        const double d = std::abs(f.prime(t));
        if (d < best) {
            best = d;
            P.t0 = t;
        }
        const double v = f(t);
        if (v < lo) lo = v, ilo = i;
        if (v > hi) hi = v, ihi = i;
    }
    // Interior extrema fall between grid points; polish them.
    auto polish = [&](int i, double sign) {
        double a = grid_t(i - 1), b = grid_t(i + 1);
        for (int it = 0; it < 60; ++it) {
            const double m1 = a + (b - a) / 3, m2 = b - (b - a) / 3;
            if (sign * f(m1) < sign * f(m2)) a = m1;
            else b = m2;
        }
        return f(0.5 * (a + b));
    };
    lo = std::min(lo, polish(ilo, -1));
    hi = std::max(hi, polish(ihi, 1));
    const double pad = 1e-12 * std::max({1.0, std::abs(lo), std::abs(hi)});
    lo -= pad;
    hi += pad;
    P.range_lo = lo;
    P.range_hi = hi;
    P.f_t0 = f(P.t0);
    P.fprime_t0 = f.prime(P.t0);
    const double two_j = std::ldexp(1.0, P.j);

    if (l1 == 0 && l2 == 0) {
        P.kind = PartitionCase::Trivial;
        P.sets.push_back({0, {Interval{lo, hi}}});
        return P;
    }
    const double fp = std::abs(P.fprime_t0);
    if (fp >= two_j / opt.case1_factor) {
        P.kind = PartitionCase::Case1;
        P.s_star = P.j;
        P.sets.push_back({P.j, {Interval{lo, hi}}});
        return P;
    }
    P.kind = fp <= std::sqrt(two_j) ? PartitionCase::Case2a : PartitionCase::Case2b;
    const double T = opt.ball_constant * std::max(fp * fp / two_j, 1.0);
    P.s_star = std::clamp(static_cast<int>(std::floor(std::log2(T))), 0, P.j);

    auto clip = [&](double a, double b) -> std::vector<Interval> {
        // |v - f0| in (a, b] as up to two intervals, intersected with the range.
        std::vector<Interval> out;
        const double f0 = P.f_t0;
        const Interval left{std::max(lo, f0 - b), std::min(hi, f0 - a)};
        const Interval right{std::max(lo, f0 + a), std::min(hi, f0 + b)};
        if (a <= 0) {
            const Interval all{std::max(lo, f0 - b), std::min(hi, f0 + b)};
            if (all.lo <= all.hi) out.push_back(all);
            return out;
        }
        if (left.lo <= left.hi) out.push_back(left);
        if (right.lo <= right.hi) out.push_back(right);
        return out;
    };
    const double inf = std::numeric_limits<double>::infinity();
    if (P.s_star == P.j) {
        P.sets.push_back({P.j, clip(0, inf)});
        return P;
    }
    P.sets.push_back({P.s_star, clip(0, std::ldexp(1.0, P.s_star))});
    for (int s = P.s_star + 1; s < P.j; ++s) {
        auto pieces = clip(std::ldexp(1.0, s - 1), std::ldexp(1.0, s));
        if (!pieces.empty()) P.sets.push_back({s, std::move(pieces)});
    }
    auto outer = clip(std::ldexp(1.0, P.j - 1), inf);
    if (!outer.empty()) P.sets.push_back({P.j, std::move(outer)});
    return P;
}

/// Sorted values of f at the midpoints of a uniform grid on [1/2, 1].
class PreimageSampler {
public:
    PreimageSampler(const Curve& curve, std::int64_t l1, std::int64_t l2, int grid) : grid_(grid) {
        if (grid < 10000) throw ArgumentError("preimage grid must be >= 1e4");
        const LevelFunction f{&curve, static_cast<double>(l1), static_cast<double>(l2)};
        vals_.resize(static_cast<std::size_t>(grid));
        for (int i = 0; i < grid; ++i) vals_[i] = f(0.5 + 0.5 * (i + 0.5) / grid);
        std::sort(vals_.begin(), vals_.end());
    }
    /// |{t in [1/2,1] : |f(t) - v| <= window}| by midpoint counting.
    double measure(double v, double window) const {
        const auto a = std::lower_bound(vals_.begin(), vals_.end(), v - window);
        const auto b = std::upper_bound(vals_.begin(), vals_.end(), v + window);
        return 0.5 * static_cast<double>(b - a) / grid_;
    }
    double resolution() const { return 0.5 / grid_; }

private:
    int grid_;
    std::vector<double> vals_;
};

inline double preimage_measure(const Curve& curve, std::int64_t l1, std::int64_t l2, double v, double window,
                               int grid = 100000) {
    if (!(window >= 0)) throw ArgumentError("preimage_measure: window must be >= 0");
    return PreimageSampler(curve, l1, l2, grid).measure(v, window);
}

// ---------------------------------------------------------------- level-set measures

struct LevelMeasureOptions {
    int grid = 1000000;
    double window = 1.0;
    double ceiling = 32;
    PartitionOptions partition;
    int workers = 1;
};

struct LevelMeasureTrial {
    std::int64_t l1 = 0, l2 = 0;
    int j = 0;
    PartitionCase kind = PartitionCase::Trivial;
    int worst_s = 0;
    double worst_v = 0, worst_measure = 0, worst_ratio = 0;
    int samples = 0;
};

struct LevelMeasureReport {
    std::string curve_id;
    int trials = 0, jmax = 0;
    std::uint64_t seed = 0;
    double window = 1, ceiling = 32;
    double max_ratio = 0;
    std::map<std::string, double> max_ratio_by_case;
    bool flagged = false;
    std::vector<LevelMeasureTrial> rows;
};

/// Random (l1, l2) with max |l| <= 2^jmax; a third of the pairs put the
/// critical point of f inside [1/2, 1], a third have one coefficient zero.
inline LevelMeasureReport verify_level_measures(const Curve& curve, int trials, int jmax, std::uint64_t seed,
                                    const LevelMeasureOptions& opt = {}) {
    if (trials < 1) throw ArgumentError("verify_level_measures: trials must be >= 1");
    if (jmax < 0 || jmax > 14) throw ArgumentError("verify_level_measures: jmax must be in [0, 14]");
    LevelMeasureReport rep;
    rep.curve_id = curve.id();
    rep.trials = trials;
    rep.jmax = jmax;
    rep.seed = seed;
    rep.window = opt.window;
    rep.ceiling = opt.ceiling;
    rep.rows.resize(static_cast<std::size_t>(trials));
    const std::int64_t lmax = std::int64_t{1} << jmax;

    parallel_for(static_cast<std::size_t>(trials), opt.workers, [&](std::size_t i) {
        CounterRng rng(seed, i);
        std::int64_t l1 = 0, l2 = 0;
        while (l1 == 0 && l2 == 0) {
            const int j = static_cast<int>(rng.integer(0, jmax));
            const std::int64_t lo = std::int64_t{1} << j;
            const std::int64_t big = rng.integer(lo, std::min(2 * lo - 1, lmax)) * rng.sign();
            switch (i % 3) {
                case 0: {
                    const std::int64_t other = rng.integer(-std::llabs(big), std::llabs(big));
                    if (rng.sign() > 0) {
                        l1 = big;
                        l2 = other;
                    } else {
                        l1 = other;
                        l2 = big;
                    }
                    break;
                }
                case 1: {
                    const double ts = rng.uniform(0.5, 1.0);
                    const double ratio = -curve.derivative(4, 3, ts) / curve.derivative(3, 3, ts);
                    double b2 = static_cast<double>(big);
                    if (std::abs(ratio * b2) > static_cast<double>(lmax)) b2 *= static_cast<double>(lmax) / std::abs(ratio * b2);
                    l2 = static_cast<std::int64_t>(std::llround(b2));
                    l1 = static_cast<std::int64_t>(std::llround(ratio * static_cast<double>(l2)));
                    break;
                }
                default:
                    if (rng.sign() > 0)
                        l1 = big;
                    else
                        l2 = big;
            }
        }
        const auto P = build_partition(curve, l1, l2, opt.partition);
        const PreimageSampler S(curve, l1, l2, opt.grid);
        LevelMeasureTrial t;
        t.l1 = l1;
        t.l2 = l2;
        t.j = P.j;
        t.kind = P.kind;
        auto probe = [&](int s, double v) {
            const double m = S.measure(v, opt.window);
            const double r = m * std::sqrt(std::ldexp(1.0, P.j + s));
            ++t.samples;
            if (r > t.worst_ratio) {
                t.worst_ratio = r;
                t.worst_measure = m;
                t.worst_s = s;
                t.worst_v = v;
            }
        };
        for (const auto& R : P.sets)
            for (const auto& piece : R.pieces) {
                probe(R.s, piece.lo);
                probe(R.s, piece.hi);
                probe(R.s, 0.5 * (piece.lo + piece.hi));
                for (int k = 0; k < 4; ++k) probe(R.s, rng.uniform(piece.lo, piece.hi));
            }
        const int s0 = P.level_of(P.f_t0);
        if (s0 >= 0) probe(s0, P.f_t0);
        rep.rows[i] = t;
    });

    for (const auto& t : rep.rows) {
        rep.max_ratio = std::max(rep.max_ratio, t.worst_ratio);
        auto& slot = rep.max_ratio_by_case[to_string(t.kind)];
        slot = std::max(slot, t.worst_ratio);
    }
    rep.flagged = rep.max_ratio > rep.ceiling;
    return rep;
}

// ---------------------------------------------------------------- pair counts

enum class PairSystem { Annulus, Block, Single };

inline const char* to_string(PairSystem s) {
    switch (s) {
        case PairSystem::Annulus: return "annulus";
        case PairSystem::Block: return "block";
        case PairSystem::Single: return "single";
    }
    return "?";
}

struct PairCell {
    std::int64_t k1 = 0, k2 = 0;  // cell indices of a1 - p and a2 - p
    std::int64_t count = 0;
    double bound = 0;
};

/// Counts of (h1, h2) by the cell of (a1, a2), with
/// a_i = p + (l1/2) phi3''(h_i/N) + (l2/2) phi4''(h_i/N). Cells are half-open of
/// width 2*tolerance centred on multiples of 2*tolerance (relative to p).
struct PairCountReport {
    PairSystem system = PairSystem::Annulus;
    std::int64_t N = 0, step = 0, p = 0, l1 = 0, l2 = 0;
    double tolerance = 1;
    std::int64_t h_count = 0;       // admissible h values
    std::int64_t total = 0;         // h_count^2
    std::map<std::int64_t, std::int64_t> marginal;  // cell -> number of h
    std::int64_t max_count = 0;
    double max_ratio = 0;  // max over nonempty cells of count / bound
    PairCell worst;

    std::int64_t count(std::int64_t k1, std::int64_t k2) const {
        const auto a = marginal.find(k1), b = marginal.find(k2);
        if (a == marginal.end() || b == marginal.end()) return 0;
        return a->second * b->second;
    }
};

inline std::int64_t pair_cell(double a_minus_p, double tolerance) {
    return static_cast<std::int64_t>(std::floor(a_minus_p / (2 * tolerance) + 0.5));
}

inline PairCountReport count_pairs(const Curve& curve, std::int64_t N, std::int64_t step, PairSystem system,
                                   std::int64_t p, std::int64_t l1, std::int64_t l2, double tolerance = 1.0,
                                   const PartitionOptions& popt = {}) {
    if (step <= 0) throw ArgumentError("count_pairs: step must be positive");
    if (N < 2) throw ArgumentError("count_pairs: N must be >= 2");
    if (!(tolerance > 0)) throw ArgumentError("count_pairs: tolerance must be positive");
    if (system == PairSystem::Single && l2 != 0) throw ArgumentError("count_pairs: the single system has one coefficient (l2 = 0)");
    PairCountReport rep;
    rep.system = system;
    rep.N = N;
    rep.step = step;
    rep.p = p;
    rep.l1 = l1;
    rep.l2 = l2;
    rep.tolerance = tolerance;
    // the annulus system runs over [1, N]; the block systems over [N/2, N].
    const std::int64_t hlo = system == PairSystem::Annulus ? 1 : (N + 1) / 2;
    const LevelFunction f{&curve, static_cast<double>(l1), static_cast<double>(l2)};
    const std::int64_t first = ceil_div(hlo, step) * step;
    for (std::int64_t h = first; h <= N; h += step) {
        const double a = 0.5 * f(static_cast<double>(h) / static_cast<double>(N));
        ++rep.marginal[pair_cell(a, tolerance)];
        ++rep.h_count;
    }
    rep.total = rep.h_count * rep.h_count;

    const double Nd = static_cast<double>(N), sd = static_cast<double>(step);
    std::map<std::int64_t, double> factor;  // per-cell one-dimensional bound
    if (system == PairSystem::Annulus) {
        const auto P = build_partition(curve, l1, l2, popt);
        for (const auto& [k, c] : rep.marginal) {
            const double v = std::clamp(2.0 * static_cast<double>(k) * 2 * tolerance, P.range_lo, P.range_hi);
            const int s = std::max(0, P.level_of(v));
            factor[k] = 1 + Nd / (sd * std::sqrt(std::ldexp(1.0, P.j + s)));
        }
    } else {
        const int j1 = dyadic_scale(l1, 0);
        for (const auto& [k, c] : rep.marginal) factor[k] = 1 + Nd / (sd * std::ldexp(1.0, j1));
    }
    for (const auto& [k1, c1] : rep.marginal)
        for (const auto& [k2, c2] : rep.marginal) {
            const std::int64_t c = c1 * c2;
            const double b = factor[k1] * factor[k2];
            rep.max_count = std::max(rep.max_count, c);
            if (c / b > rep.max_ratio) {
                rep.max_ratio = c / b;
                rep.worst = PairCell{k1, k2, c, b};
            }
        }
    return rep;
}

}  // namespace esl
