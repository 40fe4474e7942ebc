#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "core.hpp"
#include "curve.hpp"
#include "fft.hpp"

namespace esl {

struct BlockPiece {
    std::int64_t h = 0, length = 0;  // J = [h+1, h+length]
    double b[4] = {0, 0, 0, 0};      // half-widths of the constructive y-box
    double lattice = 0;              // number of (y1, y2) integer translates inside the image
    double integral = 0;             // int_box |sum_{m<=length} e(m.y)|^p
    double value = 0, floor = 0;
};

struct BlockBound {
    std::int64_t M = 0;
    double value = 0;  // sum over blocks of the restricted integrals
    double floor = 0;  // same with |sum| replaced by length cos(pi/4)
    std::vector<BlockPiece> pieces;
};

struct LowerBoundReport {
    std::int64_t N = 0;
    double p = 0, alpha = 0, beta = 0;
    double c = 1.0 / 32;
    BlockBound blocks;  // M = max(N^{1-alpha/3}, N^{1-beta/4})
    BlockBound single;  // M = |[N/2, N]|
    double value = 0;   // max of the two
    double floor = 0;
    std::string chosen;
};

struct LowerBoundOptions {
    double c = 1.0 / 32;  // per-axis phase budget; four axes give 1/8
    int gauss_points = 8;
};

namespace detail {

/// Block J = [h+1, h+len] of [N/2, N] on the domain
/// [-1,1]^2 x [-N^alpha, N^alpha] x [-N^beta, N^beta], after the shift n = h + m.
inline BlockPiece block_piece(std::int64_t N, std::int64_t h, std::int64_t len, std::int64_t Mblk, double p,
                              double alpha, double beta, double c) {
    BlockPiece bp;
    bp.h = h;
    bp.length = len;
    const double n = static_cast<double>(N), hd = static_cast<double>(h), Md = static_cast<double>(Mblk);
    double b1 = c / Md, b2 = c / (Md * Md), b3 = c / std::pow(Md, 3), b4 = c / std::pow(Md, 4);
    // x4 = N^4 y4, x3 = N^3 (y3 - 4h y4) must stay inside omega_4, omega_3.
    b4 = std::min(b4, std::pow(n, beta - 4));
    while (std::pow(n, alpha - 3) - 4 * hd * b4 <= 0) b4 *= 0.5;
    b3 = std::min(b3, std::pow(n, alpha - 3) - 4 * hd * b4);
    bp.b[0] = b1;
    bp.b[1] = b2;
    bp.b[2] = b3;
    bp.b[3] = b4;
    // x2 = y2 - 3h y3 + 6h^2 y4 and x1 = y1 - 2h y2 + 3h^2 y3 - 4h^3 y4: the
    // integer translates in (y1, y2) that keep the whole box inside.
    const double r2 = b2 + 3 * hd * b3 + 6 * hd * hd * b4;
    const double r1 = b1 + 2 * hd * b2 + 3 * hd * hd * b3 + 4 * hd * hd * hd * b4;
    const double k2 = std::floor(n - r2), k1 = std::floor(n * n - r1);
    bp.lattice = (k2 >= 0 && k1 >= 0) ? (2 * k1 + 1) * (2 * k2 + 1) : 0;

    using GL = boost::math::quadrature::gauss<double, 8>;
    const auto& xs = GL::abscissa();
    const auto& ws = GL::weights();
    std::vector<std::pair<double, double>> nodes;  // on [-1, 1]
    for (std::size_t i = 0; i < xs.size(); ++i) {
        nodes.push_back({xs[i], ws[i]});
        if (xs[i] != 0) nodes.push_back({-xs[i], ws[i]});
    }
    CompensatedSum<double> acc;
    for (const auto& [u1, w1] : nodes)
        for (const auto& [u2, w2] : nodes)
            for (const auto& [u3, w3] : nodes)
                for (const auto& [u4, w4] : nodes) {
                    const double y1 = u1 * b1, y2 = u2 * b2, y3 = u3 * b3, y4 = u4 * b4;
                    CompensatedSum<cplx> s;
                    for (std::int64_t m = 1; m <= len; ++m) {
                        const double md = static_cast<double>(m);
                        s += unit_phase(md * (y1 + md * (y2 + md * (y3 + md * y4))));
                    }
                    acc += w1 * w2 * w3 * w4 * std::pow(std::abs(s.value()), p);
                }
    const double vol = 16 * b1 * b2 * b3 * b4;
    bp.integral = acc.value() * b1 * b2 * b3 * b4;
    // Jacobian N^7 and the N^-3 from unfolding [-1,1]^2 periodically.
    bp.value = std::pow(n, 4) * bp.lattice * bp.integral;
    bp.floor = std::pow(n, 4) * bp.lattice * vol * std::pow(static_cast<double>(len) * std::cos(kPi / 4), p);
    return bp;
}

inline BlockBound block_bound(std::int64_t N, std::int64_t Mblk, double p, double alpha, double beta, double c) {
    BlockBound bb;
    bb.M = Mblk;
    CompensatedSum<double> v, f;
    for (std::int64_t lo = (N + 1) / 2; lo <= N; lo += Mblk) {
        const std::int64_t len = std::min(Mblk, N - lo + 1);
        auto piece = block_piece(N, lo - 1, len, Mblk, p, alpha, beta, c);
        v += piece.value;
        f += piece.floor;
        bb.pieces.push_back(piece);
    }
    bb.value = v.value();
    bb.floor = f.value();
    return bb;
}

}  // namespace detail

/// Lower bound for int |E_{[N/2,N],N}|^p on [-1,1]^2 x [-N^alpha,N^alpha] x
/// [-N^beta,N^beta] for the moment curve, summed over blocks of [N/2, N].
/// Each block contributes its integral over the integer translates of a small
/// box where every phase stays within 1/8; the block-sum step holds up to an
/// unquantified constant.
inline LowerBoundReport lower_bound_blocks(const Curve& curve, std::int64_t N, double p, double alpha, double beta,
                                           const LowerBoundOptions& opt = {}) {
    if (curve.family() != CurveFamily::Moment) throw ArgumentError("lower_bound_blocks: needs the moment curve");
    if (!(p >= 8 && p <= 12)) throw ArgumentError("lower_bound_blocks: p must be in [8, 12]");
    if (std::abs(alpha + beta - (p / 2 - 3)) > 1e-12) throw ArgumentError("lower_bound_blocks: need alpha + beta = p/2 - 3");
    if (!(alpha >= beta && beta >= 0)) throw ArgumentError("lower_bound_blocks: need alpha >= beta >= 0");
    if (N < 8) throw ArgumentError("lower_bound_blocks: N must be >= 8");
    LowerBoundReport r;
    r.N = N;
    r.p = p;
    r.alpha = alpha;
    r.beta = beta;
    r.c = opt.c;
    const double n = static_cast<double>(N);
    const std::int64_t full = N - (N + 1) / 2 + 1;
    const auto Mp = std::clamp<std::int64_t>(
        static_cast<std::int64_t>(std::llround(std::max(std::pow(n, 1 - alpha / 3), std::pow(n, 1 - beta / 4)))), 1, full);
    r.blocks = detail::block_bound(N, Mp, p, alpha, beta, opt.c);
    r.single = detail::block_bound(N, full, p, alpha, beta, opt.c);
    const bool blocks_win = r.blocks.value >= r.single.value;
    r.value = blocks_win ? r.blocks.value : r.single.value;
    r.floor = std::max(r.blocks.floor, r.single.floor);
    r.chosen = blocks_win ? "blocks" : "single";
    return r;
}

struct SuperpositionReport {
    double p = 0;
    int trials = 0;
    std::int64_t grid = 0;
    double max_ratio = 0;
    std::vector<double> ratios;
};

/// Compares (sum_R ||F_R||_p^p)^{1/p} with ||F||_p for random trigonometric
/// polynomials F = sum_R F_R, F_R supported on the frequency block R, on a
/// periodic grid fine enough to integrate |F|^p exactly.
inline SuperpositionReport block_superposition_check(const std::vector<IntervalZ>& blocks, int p, int trials = 20,
                                                     std::uint64_t seed = 1) {
    if (p < 2 || p % 2) throw ArgumentError("block_superposition_check: p must be even and >= 2");
    if (blocks.empty()) throw ArgumentError("block_superposition_check: no blocks");
    for (const auto& b : blocks)
        if (b.is_empty()) throw ArgumentError("block_superposition_check: empty block");
    for (std::size_t i = 0; i < blocks.size(); ++i)
        for (std::size_t j = i + 1; j < blocks.size(); ++j) {
            // Doubles of [lo - 1/2, hi + 1/2] about their centres.
            const double ci = 0.5 * static_cast<double>(blocks[i].lo() + blocks[i].hi());
            const double cj = 0.5 * static_cast<double>(blocks[j].lo() + blocks[j].hi());
            const double ri = static_cast<double>(blocks[i].size()), rj = static_cast<double>(blocks[j].size());
            if (std::abs(ci - cj) < ri + rj) throw ArgumentError("block_superposition_check: doubled blocks overlap");
        }
    std::int64_t kmin = blocks[0].lo(), kmax = blocks[0].hi();
    for (const auto& b : blocks) {
        kmin = std::min(kmin, b.lo());
        kmax = std::max(kmax, b.hi());
    }
    SuperpositionReport rep;
    rep.p = p;
    rep.trials = trials;
    rep.grid = (p / 2) * (kmax - kmin) + 1;
    const auto L = static_cast<std::size_t>(rep.grid);
    auto norm_p = [&](const std::vector<cplx>& coef) {
        std::vector<cplx> out;
        dft_synthesis(coef, out);
        CompensatedSum<double> s;
        for (const auto& z : out) s += std::pow(std::norm(z), p / 2);
        return s.value() / static_cast<double>(L);
    };
    for (int t = 0; t < trials; ++t) {
        CounterRng rng(seed, static_cast<std::uint64_t>(t));
        std::vector<cplx> all(L, cplx{});
        CompensatedSum<double> parts;
        for (const auto& b : blocks) {
            std::vector<cplx> one(L, cplx{});
            for (std::int64_t k = b.lo(); k <= b.hi(); ++k) {
                const cplx v(rng.uniform(-1, 1), rng.uniform(-1, 1));
                one[static_cast<std::size_t>(k - kmin)] = v;
                all[static_cast<std::size_t>(k - kmin)] = v;
            }
            parts += norm_p(one);
        }
        const double ratio = std::pow(parts.value() / norm_p(all), 1.0 / p);
        rep.ratios.push_back(ratio);
        rep.max_ratio = std::max(rep.max_ratio, ratio);
    }
    return rep;
}

}  // namespace esl
