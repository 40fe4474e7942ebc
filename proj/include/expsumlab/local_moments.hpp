#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "core.hpp"

namespace esl {

/// F(w) = int_0^1 |sum_{m<=M} e(m u + m^2 w)|^6 du as the cosine series
/// A_0 + 2 sum_{d>0} A_d cos(2 pi d w), where A_d counts 6-tuples with equal
/// sums and sum-of-squares difference d.
class SixthMomentSeries {
public:
    explicit SixthMomentSeries(std::int64_t M) : M_(M) {
        if (M < 4) throw ArgumentError("local moments: M must be >= 4");
        const std::int64_t smax = 3 * M, qmax = 3 * M * M;
        // Ordered triples grouped by sum, then histogram of sum of squares.
        std::vector<std::map<std::int64_t, std::int64_t>> by_sum(static_cast<std::size_t>(smax + 1));
        for (std::int64_t a = 1; a <= M; ++a)
            for (std::int64_t b = 1; b <= M; ++b)
                for (std::int64_t c = 1; c <= M; ++c) ++by_sum[static_cast<std::size_t>(a + b + c)][a * a + b * b + c * c];
        A_.assign(static_cast<std::size_t>(qmax + 1), 0.0);
        std::vector<long double> acc(A_.size(), 0.0L);
        for (const auto& h : by_sum) {
            std::vector<std::pair<std::int64_t, std::int64_t>> v(h.begin(), h.end());
            for (std::size_t i = 0; i < v.size(); ++i)
                for (std::size_t j = i; j < v.size(); ++j)
                    acc[static_cast<std::size_t>(v[j].first - v[i].first)] +=
                        static_cast<long double>(v[i].second) * static_cast<long double>(v[j].second);
        }
        for (std::size_t d = 0; d < A_.size(); ++d) A_[d] = static_cast<double>(acc[d]);
    }

    std::int64_t M() const { return M_; }
    double coefficient(std::int64_t d) const {
        d = std::abs(d);
        return d < static_cast<std::int64_t>(A_.size()) ? A_[static_cast<std::size_t>(d)] : 0.0;
    }
    /// int_0^1 int_0^1 |S|^6 du dw.
    double full() const { return A_[0]; }

    double value(double w) const {
        CompensatedSum<double> s;
        s += A_[0];
        for (std::size_t d = 1; d < A_.size(); ++d)
            if (A_[d] != 0) s += 2 * A_[d] * std::cos(kTwoPi * int_phase(static_cast<std::int64_t>(d), w));
        return s.value();
    }

    /// Antiderivative of F with G(0) = 0.
    double antiderivative(double x) const {
        CompensatedSum<double> s;
        s += A_[0] * x;
        for (std::size_t d = 1; d < A_.size(); ++d)
            if (A_[d] != 0)
                s += A_[d] * std::sin(kTwoPi * int_phase(static_cast<std::int64_t>(d), x)) / (kPi * static_cast<double>(d));
        return s.value();
    }

private:
    std::int64_t M_;
    std::vector<double> A_;
};

struct LocalMomentTable {
    std::int64_t M = 0;
    double c = 1;
    std::int64_t a_lo = 0;
    std::vector<double> values;  // I_a for a = a_lo, a_lo + 1, ...
    double full = 0;             // the sixth moment over [0,1]^2
    std::string cutoff = "sharp";

    double at(std::int64_t a) const { return values.at(static_cast<std::size_t>(a - a_lo)); }
};

/// I_a = int_0^1 int_{(a-c)/M^2}^{(a+c)/M^2} |S(u,w)|^6 dw du for a in [a_lo, a_hi].
inline LocalMomentTable local_moment_table(const SixthMomentSeries& F, double c, std::int64_t a_lo, std::int64_t a_hi,
                                           int workers = 1) {
    if (!(c > 0)) throw ArgumentError("local moments: c must be positive");
    if (a_hi < a_lo) throw ArgumentError("local moments: empty range");
    LocalMomentTable t;
    t.M = F.M();
    t.c = c;
    t.a_lo = a_lo;
    t.full = F.full();
    const double m2 = static_cast<double>(F.M() * F.M());
    const std::size_t n = static_cast<std::size_t>(a_hi - a_lo + 1);
    t.values.assign(n, 0.0);
    parallel_for(n, workers, [&](std::size_t i) {
        const double a = static_cast<double>(a_lo + static_cast<std::int64_t>(i));
        t.values[i] = std::max(0.0, F.antiderivative((a + c) / m2) - F.antiderivative((a - c) / m2));
    });
    return t;
}

inline double local_moment(std::int64_t M, std::int64_t a, double c = 1) {
    return local_moment_table(SixthMomentSeries(M), c, a, a).values[0];
}

struct LocalSumRow {
    int j = 0;
    double lhs = 0, rhs = 0;
    double raw_ratio = 0;  // lhs / rhs
    double ratio = 0;      // lhs / (rhs log2(M)^3)
};

struct LocalSumReport {
    std::int64_t M = 0;
    double c = 1;
    double full = 0;
    double max_ratio = 0;
    std::vector<LocalSumRow> rows;
};

/// For each dyadic length 2^j <= M^2, sum over the intervals H of that length
/// tiling [0, M^2) of (sum_{a in H} I_a^{2/3})^3, against M^4 2^{2j} + M^6.
inline LocalSumReport local_sum_check(std::int64_t M, double c = 1, int workers = 1) {
    if (M < 8 || M > 128) throw ArgumentError("local_sum_check: M must be in [8, 128]");
    const SixthMomentSeries F(M);
    const auto tab = local_moment_table(F, c, 0, M * M - 1, workers);
    LocalSumReport rep;
    rep.M = M;
    rep.c = c;
    rep.full = F.full();
    const double Md = static_cast<double>(M), lg = std::log2(Md);
    std::vector<double> pw(tab.values.size());
    for (std::size_t i = 0; i < pw.size(); ++i) pw[i] = std::pow(tab.values[i], 2.0 / 3.0);
    for (int j = 0; (std::int64_t{1} << j) <= M * M; ++j) {
        const std::size_t len = std::size_t{1} << j;
        CompensatedSum<double> lhs;
        for (std::size_t b = 0; b < pw.size(); b += len) {
            CompensatedSum<double> inner;
            for (std::size_t i = b; i < std::min(pw.size(), b + len); ++i) inner += pw[i];
            lhs += std::pow(inner.value(), 3);
        }
        LocalSumRow row;
        row.j = j;
        row.lhs = lhs.value();
        row.rhs = std::pow(Md, 4) * std::ldexp(1.0, 2 * j) + std::pow(Md, 6);
        row.raw_ratio = row.lhs / row.rhs;
        row.ratio = row.raw_ratio / (lg * lg * lg);
        rep.max_ratio = std::max(rep.max_ratio, row.ratio);
        rep.rows.push_back(row);
    }
    return rep;
}

}  // namespace esl
