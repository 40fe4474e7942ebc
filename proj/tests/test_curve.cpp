#include <gtest/gtest.h>
#include <quadmath.h>

#include <expsumlab/curve.hpp>

using namespace esl;

namespace {

// Quad-precision phi for central differences; independent of Curve.
__float128 phi_q(double e, __float128 t) { return powq(t, static_cast<__float128>(e)); }

double central_difference(double e, int order, double t) {
    const __float128 h = 1e-4Q, x = t;
    auto f = [&](int k) { return phi_q(e, x + k * h); };
    __float128 v = 0;
    switch (order) {
        case 1: v = (f(1) - f(-1)) / (2 * h); break;
        case 2: v = (f(1) - 2 * f(0) + f(-1)) / (h * h); break;
        case 3: v = (f(2) - 2 * f(1) + 2 * f(-1) - f(-2)) / (2 * h * h * h); break;
        case 4: v = (f(2) - 4 * f(1) + 6 * f(0) - 4 * f(-1) + f(-2)) / (h * h * h * h); break;
    }
    return static_cast<double>(v);
}

cplx direct_sum(const Curve& c, std::int64_t N, std::int64_t lo, std::int64_t hi, const Point4& x) {
    long double re = 0, im = 0;
    for (std::int64_t n = lo; n <= hi; ++n) {
        const long double t = static_cast<long double>(n) / N;
        const long double ph = n * static_cast<long double>(x.x1) + static_cast<long double>(n) * n * x.x2 +
                               c.derivative(3, 0, static_cast<double>(t)) * static_cast<long double>(x.x3) +
                               c.derivative(4, 0, static_cast<double>(t)) * static_cast<long double>(x.x4);
        const long double r = 2 * 3.14159265358979323846264338327950288L * (ph - std::floor(ph));
        re += std::cos(r);
        im += std::sin(r);
    }
    return {static_cast<double>(re), static_cast<double>(im)};
}

}  // namespace

TEST(Curve, MomentValues) {
    const auto c = Curve::moment();
    EXPECT_EQ(c.eval_phi(4, 4, 0.5), 24.0);
    EXPECT_EQ(c.eval_phi(4, 4, 1.0), 24.0);
    EXPECT_EQ(c.eval_phi(3, 3, 0.75), 6.0);
    EXPECT_EQ(c.eval_phi(3, 4, 0.75), 0.0);
    EXPECT_DOUBLE_EQ(c.eval_phi(3, 0, 0.5), 0.125);
}

TEST(Curve, PowerThirdDerivative) {
    const auto c = Curve::power(1.5, 0.5);
    EXPECT_NEAR(c.eval_phi(3, 3, 1.0), -0.375, 1e-15);
}

TEST(Curve, Errors) {
    const auto c = Curve::moment();
    EXPECT_THROW(c.eval_phi(3, 5, 0.75), UnsupportedOrder);
    EXPECT_THROW(c.eval_phi(3, -1, 0.75), UnsupportedOrder);
    EXPECT_THROW(c.eval_phi(3, 0, 1.5), DomainError);
    EXPECT_THROW(c.eval_phi(3, 0, 0.25), DomainError);
    EXPECT_THROW(Curve::power(0.5, 1.5).derivative(3, 1, -0.1), DomainError);
    EXPECT_THROW(Curve::power(0.5, 1.5).derivative(3, 1, 0.0), DomainError);
    EXPECT_THROW(Curve::power(-1, 2).derivative(3, 0, 0.0), EvaluationError);
    EXPECT_THROW(Curve::custom(0.75, {}, {1}), ArgumentError);
}

TEST(Curve, CustomSeries) {
    // phi3 = (t - 3/4)^3, phi4 = 2 (t - 3/4)^4 + (t - 3/4)
    const auto c = Curve::custom(0.75, {0, 0, 0, 1}, {0, 1, 0, 0, 2});
    EXPECT_DOUBLE_EQ(c.eval_phi(3, 3, 0.6), 6.0);
    EXPECT_DOUBLE_EQ(c.eval_phi(4, 4, 0.6), 48.0);
    EXPECT_NEAR(c.eval_phi(4, 1, 1.0), 8 * 0.015625 + 1, 1e-15);
    EXPECT_EQ(c.polynomial_degree(4).value(), 4);
}

TEST(Curve, DerivativesMatchQuadPrecisionDifferences) {
    const double exps[] = {0.5, 0.75, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0};
    for (double a : exps) {
        const auto c = Curve::power(a, a);
        for (double t : {0.5, 0.6, 0.73, 0.9, 1.0}) {
            for (int k = 1; k <= 4; ++k) {
                const double exact = c.eval_phi(3, k, t);
                const double fd = central_difference(a, k, t);
                if (exact == 0) {
                    EXPECT_NEAR(fd, 0.0, 1e-6) << a << " " << k << " " << t;
                } else {
                    EXPECT_NEAR(fd / exact, 1.0, 1e-6) << a << " " << k << " " << t;
                }
            }
        }
    }
}

TEST(Curve, ConditionsMoment) {
    const auto r = verify_conditions(Curve::moment(), 256);
    EXPECT_DOUBLE_EQ(r.A4, 6.0);
    EXPECT_DOUBLE_EQ(r.A2, 144.0);
    EXPECT_DOUBLE_EQ(r.A3, 144.0);
    EXPECT_DOUBLE_EQ(r.A1, 64.0);
    EXPECT_TRUE(r.all_pass());
}

TEST(Curve, ConditionsPowerThreeHalvesOneHalf) {
    const auto r = verify_conditions(Curve::power(1.5, 0.5), 1024);
    // Diagonal minor is (9/64) t^-5.
    EXPECT_NEAR(r.A2_diag, 0.140625, 1e-12);
    EXPECT_NEAR(r.A3_diag, 4.5, 1e-12);
    EXPECT_TRUE(r.pass2_diag);
    // Mixed minor (9/128) t^-5/2 s^-7/2 (5t - 3s) changes sign inside the square.
    EXPECT_LT(r.A2, 1e-2);
    EXPECT_NEAR(r.A3, 4.5, 1e-12);
    EXPECT_TRUE(r.pass3);
    const auto strict = verify_conditions(Curve::power(1.5, 0.5), 1024, ConditionThresholds{.a2_min = 0.05});
    EXPECT_FALSE(strict.pass2);
}

TEST(Curve, ConditionsMonotoneRefinement) {
    for (const auto& c : {Curve::power(1.5, 0.5), Curve::power(2.5, 3.5), Curve::moment()}) {
        auto prev = verify_conditions(c, 64);
        for (int g = 128; g <= 1024; g *= 2) {
            const auto cur = verify_conditions(c, g);
            EXPECT_LE(cur.A4, prev.A4);
            EXPECT_LE(cur.A2, prev.A2);
            EXPECT_GE(cur.A1, prev.A1);
            EXPECT_GE(cur.A3, prev.A3);
            prev = cur;
        }
    }
}

TEST(Curve, JacobianMomentValue) {
    const auto r = jacobian_psi(Curve::moment(), 0.5, 1.0, 1.0);
    EXPECT_NEAR(r.det, -1.5, 1e-13);
    EXPECT_TRUE(r.within_bounds);
    const auto r2 = jacobian_psi(Curve::moment(), 0.5, 1.0, 4.0);
    EXPECT_NEAR(r2.value, -1.5 / 16, 1e-14);
}

TEST(Curve, JacobianCoincidenceLimit) {
    // det / (t - s)^4 tends to -144 / 6 on the moment curve.
    for (double t : {0.55, 0.7, 0.9}) {
        const double s = t + 1e-3;
        const auto r = jacobian_psi(Curve::moment(), t, s, 1.0);
        EXPECT_NEAR(r.det / std::pow(t - s, 4), -24.0, 1e-3);
    }
}

TEST(Curve, JacobianBoundsAndErrors) {
    const auto c = Curve::power(2.5, 3.5);
    for (double t : {0.5, 0.62, 0.8})
        for (double s : {0.55, 0.77, 1.0}) {
            const auto r = jacobian_psi(c, t, s, 32.0);
            EXPECT_TRUE(r.within_bounds) << t << " " << s;
        }
    EXPECT_THROW(jacobian_psi(c, 0.7, 0.7, 32.0), DegenerateInput);
    EXPECT_THROW(jacobian_psi(c, 0.7, 0.7005, 32.0, {.min_separation = 1e-2}), DegenerateInput);
}

TEST(Rescale, MomentCurveIsFixed) {
    const auto br = rescale_block(Curve::moment(), 64, 20, 12);
    ASSERT_TRUE(br.series.has_value());
    const auto& c3 = br.series->coefficients(3);
    const auto& c4 = br.series->coefficients(4);
    ASSERT_EQ(c3.size(), 4u);
    ASSERT_EQ(c4.size(), 5u);
    EXPECT_DOUBLE_EQ(c3[3], 1.0);
    EXPECT_DOUBLE_EQ(c4[4], 1.0);
    EXPECT_EQ(c3[0] + c3[1] + c3[2], 0.0);
    EXPECT_EQ(c4[0] + c4[1] + c4[2] + c4[3], 0.0);
}

TEST(Rescale, IdentityAgainstDirectSums) {
    CounterRng rng(7, 0);
    for (const auto& c : {Curve::moment(), Curve::power(1.5, 0.5), Curve::power(2.5, 3.5)}) {
        for (int trial = 0; trial < 20; ++trial) {
            const std::int64_t N = 64;
            const std::int64_t M = rng.integer(4, 16);
            const std::int64_t N0 = rng.integer(N / 2 - M, N - 2 * M);
            const auto br = rescale_block(c, N, N0, M);
            const std::int64_t lo = rng.integer(M, 2 * M), hi = rng.integer(lo, 2 * M);
            const Point4 x{rng.uniform(), rng.uniform(), rng.uniform(0, 512), rng.uniform(0, 512)};
            const double lhs = std::abs(direct_sum(c, N, N0 + lo, N0 + hi, x));
            const double rhs = std::abs(br.rescaled_sum(IntervalZ(lo, hi), br.map(x)));
            EXPECT_NEAR(lhs, rhs, 1e-9 * std::max(1.0, lhs)) << c.id() << " trial " << trial;
        }
    }
}

TEST(Rescale, SeriesMatchesClosedForm) {
    const auto c = Curve::power(2.5, 3.5);
    const auto br = rescale_block(c, 256, 150, 20);
    ASSERT_TRUE(br.series.has_value());
    EXPECT_GT(br.terms3, 5);
    for (double u : {1.0, 1.3, 1.77, 2.0}) {
        EXPECT_NEAR(br.series->derivative(3, 0, u), br.phi_tilde(3, u), 1e-9);
        EXPECT_NEAR(br.series->derivative(4, 0, u), br.phi_tilde(4, u), 1e-9);
    }
    // Blocks reaching past the Taylor disc have no series but still rescale.
    EXPECT_FALSE(rescale_block(c, 64, 16, 16).series.has_value());
}

TEST(Rescale, TaylorCoefficientBounds) {
    const auto c = Curve::power(1.5, 0.5);
    const double A1 = verify_conditions(c, 512).A1;
    for (std::int64_t N : {64, 256}) {
        const auto br = rescale_block(c, N, N / 2, N / 8);
        EXPECT_LE(std::abs(br.B), 10 * A1 / N);
        EXPECT_LE(std::abs(br.E), 10 * A1 / N);
        EXPECT_LE(std::abs(br.C), 10 * A1 / (double(N) * N));
        EXPECT_LE(std::abs(br.F), 10 * A1 / (double(N) * N));
    }
}

TEST(Rescale, BlockPreconditions) {
    EXPECT_THROW(rescale_block(Curve::moment(), 64, 0, 64), RangeError);
    EXPECT_THROW(rescale_block(Curve::moment(), 64, 40, 16), RangeError);
    // The whole-range block bypasses the precondition and is the identity.
    const auto br = build_rescaling(Curve::moment(), 64, 0, 64);
    const Point4 x{0.3, 0.7, 11.0, 5.0};
    const Point4 y = br.map(x);
    EXPECT_DOUBLE_EQ(y.x1, x.x1);
    EXPECT_DOUBLE_EQ(y.x2, x.x2);
    EXPECT_DOUBLE_EQ(y.x3, x.x3);
    EXPECT_DOUBLE_EQ(y.x4, x.x4);
}
