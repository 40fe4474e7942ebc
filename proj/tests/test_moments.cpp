#include <gtest/gtest.h>

#include <expsumlab/local_moments.hpp>
#include <expsumlab/lower_bound.hpp>
#include <expsumlab/moments.hpp>

using namespace esl;

namespace {

// Sum of |E|^p over the product grid with n1 x n2 points on the unit x1, x2 periods.
double slice_grid(std::int64_t N, const IntervalZ& I, int p, std::int64_t n1, std::int64_t n2) {
    const auto c = Curve::moment();
    long double acc = 0;
    for (std::int64_t a = 0; a < n1; ++a)
        for (std::int64_t b = 0; b < n2; ++b) {
            const Point4 x{double(a) / n1, double(b) / n2, 0, 0};
            acc += std::pow(std::norm(eval_curve_sum(c, N, I, x)), p / 2);
        }
    return static_cast<double>(acc / (n1 * n2));
}

}  // namespace

TEST(TupleOracle, SmallCases) {
    EXPECT_EQ(tuple_count_oracle(4, IntervalZ(2, 4), 1), 3u);
    EXPECT_EQ(tuple_count_oracle(4, IntervalZ(1, 2), 2), 6u);
    // Brute force over 2k-tuples for k = 2 and 3.
    for (int k : {2, 3}) {
        const IntervalZ I(3, 6);
        std::uint64_t brute = 0;
        const int n = static_cast<int>(I.size()), total = 2 * k;
        std::vector<int> idx(static_cast<std::size_t>(total), 0);
        while (true) {
            std::int64_t s1 = 0, s2 = 0;
            for (int i = 0; i < total; ++i) {
                const std::int64_t v = I.lo() + idx[static_cast<std::size_t>(i)];
                const int sg = i < k ? 1 : -1;
                s1 += sg * v;
                s2 += sg * v * v;
            }
            brute += (s1 == 0 && s2 == 0);
            int i = 0;
            while (i < total && ++idx[static_cast<std::size_t>(i)] == n) idx[static_cast<std::size_t>(i++)] = 0;
            if (i == total) break;
        }
        EXPECT_EQ(tuple_count_oracle(6, I, k), brute) << k;
    }
    EXPECT_THROW(tuple_count_oracle(1000, IntervalZ(500, 1000), 4), ResourceError);
}

TEST(MomentGrid, SliceEqualsTupleCount) {
    const auto c = Curve::moment();
    for (std::int64_t N : {4, 6, 8}) {
        const auto r = moment_lp(c, N, upper_half(N), 12, Domain4::slice());
        const double oracle = static_cast<double>(tuple_count_oracle(N, upper_half(N), 6));
        EXPECT_NEAR(r.value, oracle, 1e-9 * oracle) << N;
    }
}

TEST(MomentGrid, ParsevalAtPTwo) {
    for (const auto& c : {Curve::moment(), Curve::power(1.5, 0.5)}) {
        Domain4 d;
        const auto r = moment_lp(c, 4, IntervalZ(2, 4), 2, d);
        EXPECT_NEAR(r.value, 3, 1e-9);
        EXPECT_TRUE(r.converged);
    }
}

TEST(MomentGrid, PeriodicAxesAreExact) {
    // Above the degree bound, doubling the x1 or x2 sample count changes nothing.
    const std::int64_t N = 6;
    const IntervalZ I = upper_half(N);
    for (int p : {2, 6, 12}) {
        const std::int64_t d1 = p / 2 * I.span(), d2 = p / 2 * (N * N - I.lo() * I.lo());
        const double a = slice_grid(N, I, p, d1 + 1, d2 + 1);
        EXPECT_NEAR(slice_grid(N, I, p, 2 * d1 + 2, d2 + 1), a, 1e-12 * a) << p;
        EXPECT_NEAR(slice_grid(N, I, p, d1 + 1, 2 * d2 + 2), a, 1e-12 * a) << p;
    }
}

TEST(MomentGrid, SpectralMatchesDirect) {
    const auto c = Curve::moment();
    const auto d = Domain4::conjecture(6, 0.5, 0.5);
    SamplingPlan direct;
    direct.engine = MomentEngine::Direct;
    for (int p : {6, 12}) {
        const auto a = moment_lp(c, 6, upper_half(6), p, d);
        const auto b = moment_lp(c, 6, upper_half(6), p, d, direct);
        EXPECT_NEAR(a.value, b.value, 1e-9 * a.value) << p;
        EXPECT_NEAR(a.value, a.exact, 4 * a.error + 1e-9 * a.value) << p;
    }
}

TEST(MomentGrid, ConjectureDomainConvergesAboveFloor) {
    const auto c = Curve::moment();
    const auto r = moment_lp(c, 8, upper_half(8), 12, Domain4::conjecture(8, 1.5, 1.5));
    EXPECT_TRUE(r.converged);
    EXPECT_GT(r.value, 0);
    EXPECT_GE(r.error, 0);
    EXPECT_GT(r.value, r.floor);
    EXPECT_GT(r.floor, 0);
}

TEST(MomentGrid, RenormalizedCoordinatesMatch) {
    const auto c = Curve::moment();
    const std::int64_t N = 6;
    auto conj = Domain4::conjecture(N, 1, 0.5);
    Domain4 ren = conj;
    ren.coords = Coords::Renormalized;
    ren.x2 = {0, double(N)};
    ren.x3 = {0, conj.x3.hi / N};
    ren.x4 = {0, conj.x4.hi / N};
    const auto a = moment_lp(c, N, upper_half(N), 6, conj);
    const auto b = moment_lp(c, N, upper_half(N), 6, ren);
    EXPECT_NEAR(b.value, a.value / N, 1e-6 * a.value / N);
}

TEST(MomentGrid, Refusals) {
    const auto c = Curve::moment();
    Domain4 d;
    EXPECT_THROW(moment_lp(c, 6, upper_half(6), 7, d), ArgumentError);
    EXPECT_THROW(moment_lp(c, 6, upper_half(6), 14, d), ArgumentError);
    Domain4 half = d;
    half.x1 = {0, 0.5};
    EXPECT_THROW(moment_lp(c, 6, upper_half(6), 6, half), ArgumentError);
    SamplingPlan under;
    under.n_x1 = 3;
    EXPECT_THROW(moment_lp(c, 6, upper_half(6), 12, d, under), ArgumentError);
    SamplingPlan tiny;
    tiny.max_pairs = 10;
    EXPECT_THROW(moment_lp(c, 8, upper_half(8), 12, d, tiny), ResourceError);
    EXPECT_THROW(moment_lp(c, 6, IntervalZ(5, 9), 6, d), RangeError);
}

TEST(Bilinear, EmptySingletonAndCauchySchwarz) {
    const auto c = Curve::moment();
    const auto d = Domain4::conjecture(8, 1.5, 1.5);
    EXPECT_EQ(moment_bilinear(c, 8, IntervalZ(4, 5), IntervalZ::empty(), d).value, 0);
    const auto s = moment_bilinear(c, 8, IntervalZ(4, 4), IntervalZ(8, 8), d);
    EXPECT_NEAR(s.value, d.volume(), 1e-9 * d.volume());
    EXPECT_THROW(moment_bilinear(c, 8, IntervalZ(4, 6), IntervalZ(6, 8), d), ArgumentError);
    EXPECT_THROW(moment_bilinear(c, 8, IntervalZ(2, 3), IntervalZ(7, 8), d), ArgumentError);
    const IntervalZ I1(4, 5), I2(7, 8);
    const auto b = moment_bilinear(c, 8, I1, I2, d);
    const auto m1 = moment_lp(c, 8, I1, 12, d), m2 = moment_lp(c, 8, I2, 12, d);
    EXPECT_LE(b.value, std::sqrt(m1.value * m2.value));
    EXPECT_LE(b.value, moment_lp(c, 8, IntervalZ(4, 8), 12, d).value);
}

TEST(QuasiRandom, AgreesWithGrid) {
    const auto c = Curve::moment();
    const auto d = Domain4::conjecture(6, 1.5, 1.5);
    const auto g = moment_lp(c, 6, upper_half(6), 12, d);
    const auto q = moment_quasirandom(c, 6, upper_half(6), 12, d, 1 << 20, 5);
    EXPECT_FALSE(q.certified);
    EXPECT_LE(std::abs(q.value - g.value), 3 * std::hypot(q.error, g.error));
    Domain4 unit;
    const auto p2 = moment_quasirandom(c, 4, IntervalZ(2, 4), 2, unit, 1 << 16, 5);
    EXPECT_NEAR(p2.value, 3, 0.02 * 3);
    const auto small = moment_quasirandom(c, 6, upper_half(6), 12, d, 1 << 17, 5);
    const auto big = moment_quasirandom(c, 6, upper_half(6), 12, d, 1 << 18, 5);
    EXPECT_LT(big.error, small.error);
    EXPECT_THROW(moment_quasirandom(c, 6, upper_half(6), 12, d, 1000, 5), ArgumentError);
}

TEST(QuasiRandom, WorkerCountDoesNotMatter) {
    const auto c = Curve::moment();
    const auto d = Domain4::conjecture(6, 1, 1);
    const auto a = moment_quasirandom(c, 6, upper_half(6), 6, d, 1 << 16, 9, 1);
    const auto b = moment_quasirandom(c, 6, upper_half(6), 6, d, 1 << 16, 9, 3);
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(a.error, b.error);
}

TEST(LocalMoments, SeriesMatchesTupleCount) {
    // A_0 counts 6-tuples in [1, M] with equal sums and sums of squares.
    const SixthMomentSeries F(8);
    EXPECT_DOUBLE_EQ(F.full(), static_cast<double>(tuple_count_oracle(8, IntervalZ(1, 8), 3)));
    EXPECT_THROW(SixthMomentSeries(3), ArgumentError);
}

TEST(LocalMoments, SeriesMatchesDirectIntegral) {
    const std::int64_t M = 6;
    const SixthMomentSeries F(M);
    for (double w : {0.0, 0.013, 0.37, 0.5}) {
        // Exact average over u: |S|^6 has u-degree at most 3(M-1).
        const int n = 3 * static_cast<int>(M);
        long double acc = 0;
        for (int k = 0; k < n; ++k) {
            cplx s{};
            for (std::int64_t m = 1; m <= M; ++m) s += unit_phase(frac_centered(double(m) * k / n + double(m * m) * w));
            acc += std::pow(std::norm(s), 3);
        }
        EXPECT_NEAR(F.value(w), static_cast<double>(acc / n), 1e-9 * F.full()) << w;
    }
}

TEST(LocalMoments, ReflectionTilingCorner) {
    const std::int64_t M = 16;
    const SixthMomentSeries F(M);
    const auto t = local_moment_table(F, 1, 0, M * M);
    for (std::int64_t a = 1; a < M * M; ++a) EXPECT_NEAR(t.at(a), t.at(M * M - a), 1e-9 * t.at(a) + 1e-12) << a;
    for (double v : t.values) EXPECT_GE(v, 0);
    const auto half = local_moment_table(F, 0.5, 0, M * M - 1);
    double sum = 0;
    for (double v : half.values) sum += v;
    // Windows [a - 1/2, a + 1/2]/M^2 tile [-1/2, M^2 - 1/2]/M^2, one full period.
    EXPECT_NEAR(sum, F.full(), 1e-9 * F.full());
    const double md = static_cast<double>(M);
    const double corner = (1 / (16 * md)) * (1 / (16 * md * md)) * std::pow(md * std::cos(kPi / 4), 6);
    EXPECT_GE(local_moment(M, 0), corner);
    EXPECT_DOUBLE_EQ(local_moment(M, 5), t.at(5));
}

TEST(LocalSums, RatiosBoundedAndCoarseningMonotone) {
    for (double c : {0.5, 1.0}) {
        const auto r = local_sum_check(16, c);
        ASSERT_EQ(r.rows.size(), 9u);
        EXPECT_LE(r.max_ratio, 20);
        for (std::size_t j = 1; j < r.rows.size(); ++j) EXPECT_GE(r.rows[j].lhs, r.rows[j - 1].lhs * (1 - 1e-12)) << j;
    }
    // j = 0 is the sum of squares.
    const SixthMomentSeries F(16);
    const auto t = local_moment_table(F, 1, 0, 255);
    double sq = 0;
    for (double v : t.values) sq += v * v;
    EXPECT_NEAR(local_sum_check(16).rows[0].lhs, sq, 1e-9 * sq);
    EXPECT_THROW(local_sum_check(4), ArgumentError);
}

TEST(LowerBound, ExponentsExceedSquareRootCancellation) {
    const auto c = Curve::moment();
    std::vector<double> xs, y10, y12;
    for (std::int64_t N : {16, 64, 256}) {
        xs.push_back(static_cast<double>(N));
        const auto a = lower_bound_blocks(c, N, 10, 1, 1);
        const auto b = lower_bound_blocks(c, N, 12, 1.5, 1.5);
        EXPECT_GT(a.value, 0);
        EXPECT_GE(a.value, a.floor);
        y10.push_back(a.value);
        y12.push_back(b.value);
    }
    EXPECT_GE(fit_loglog(xs, y10).slope, 7.15);
    EXPECT_GE(fit_loglog(xs, y12).slope, 8.8);
}

TEST(LowerBound, BelowFullMomentAndArguments) {
    // The block bound is a restriction of the full integral, which a grid can compute at N = 8.
    const auto c = Curve::moment();
    const auto lb = lower_bound_blocks(c, 8, 12, 1.5, 1.5);
    auto d = Domain4::conjecture(8, 1.5, 1.5);
    d.x1 = {-1, 1};
    d.x2 = {-1, 1};
    d.x3 = {-d.x3.hi, d.x3.hi};
    d.x4 = {-d.x4.hi, d.x4.hi};
    const auto full = moment_lp(c, 8, upper_half(8), 12, d);
    EXPECT_LE(lb.value, full.value);
    EXPECT_THROW(lower_bound_blocks(c, 64, 10, 0.5, 1.5), ArgumentError);
    EXPECT_THROW(lower_bound_blocks(c, 64, 10, 1.5, 1), ArgumentError);
    EXPECT_THROW(lower_bound_blocks(c, 64, 14, 2.5, 1.5), ArgumentError);
    EXPECT_THROW(lower_bound_blocks(Curve::power(1.5, 0.5), 64, 10, 1, 1), ArgumentError);
}

TEST(LowerBound, SingleBlockIsRestrictedMoment) {
    const auto r = lower_bound_blocks(Curve::moment(), 64, 12, 1.5, 1.5);
    ASSERT_EQ(r.single.pieces.size(), 1u);
    EXPECT_EQ(r.single.pieces[0].length, 33);
    EXPECT_EQ(r.value, std::max(r.blocks.value, r.single.value));
}

TEST(Superposition, ParsevalAndBound) {
    const std::vector<IntervalZ> two{IntervalZ(0, 3), IntervalZ(10, 13)};
    EXPECT_NEAR(block_superposition_check(two, 2).max_ratio, 1, 1e-12);
    EXPECT_LE(block_superposition_check(two, 6).max_ratio, 4);
    EXPECT_NEAR(block_superposition_check({IntervalZ(0, 5)}, 6).max_ratio, 1, 1e-12);
    EXPECT_THROW(block_superposition_check({IntervalZ(0, 3), IntervalZ(5, 8)}, 4), ArgumentError);
    EXPECT_THROW(block_superposition_check(two, 3), ArgumentError);
}
