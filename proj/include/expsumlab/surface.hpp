#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "core.hpp"
#include "curve.hpp"

namespace esl {

/// Dense row-major complex matrix.
struct ComplexMatrix {
    std::size_t rows = 0, cols = 0;
    std::vector<cplx> data;

    ComplexMatrix() = default;
    ComplexMatrix(std::size_t r, std::size_t c, cplx fill = {}) : rows(r), cols(c), data(r * c, fill) {}
    cplx& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    const cplx& operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

/// Surface Psi(xi1, xi2) = (xi1, xi2, psi1(xi1) + psi2(xi2), psi3(xi1) + psi4(xi2)).
/// Each psi_i is a polynomial in xi.
struct SurfacePsi {
    std::array<std::vector<double>, 4> poly;
    std::string name = "custom";

    /// order-th derivative of psi_i (i in 1..4) at xi.
    double eval(int i, int order, double xi) const {
        if (i < 1 || i > 4) throw ArgumentError("SurfacePsi: index must be in 1..4");
        const auto& c = poly[static_cast<std::size_t>(i - 1)];
        double acc = 0;
        for (int k = static_cast<int>(c.size()) - 1; k >= order; --k) {
            double f = 1;
            for (int r = 0; r < order; ++r) f *= k - r;
            acc = acc * xi + c[static_cast<std::size_t>(k)] * f;
        }
        return acc;
    }

    /// psi_i = a_i xi^2.
    static SurfacePsi quadratic(double a1, double a2, double a3, double a4) {
        SurfacePsi s;
        s.name = "quadratic";
        s.poly = {std::vector<double>{0, 0, a1}, {0, 0, a2}, {0, 0, a3}, {0, 0, a4}};
        return s;
    }

    /// Surface produced by freezing two blocks h1, h2 of a curve sum of
    /// length N: psi1 = xi^2 + T1, psi2 = T2, psi3 = -T1, psi4 = xi^2 - T2 with
    /// T_i(xi) = sum_{n>=3} xi^n A phi3^(n)(h_i/N) / (n! N^(n/2)).
    static SurfacePsi from_curve(const Curve& curve, double N, double h1, double h2, double A, int order = 8) {
        if (!(N > 0)) throw ArgumentError("SurfacePsi::from_curve: N must be positive");
        auto tail = [&](double h) {
            std::vector<double> c(static_cast<std::size_t>(order) + 1, 0.0);
            double fact = 2;
            for (int n = 3; n <= order; ++n) {
                fact *= n;
                c[static_cast<std::size_t>(n)] = A * curve.derivative(3, n, h / N) / (fact * std::pow(N, 0.5 * n));
            }
            return c;
        };
        const auto t1 = tail(h1), t2 = tail(h2);
        SurfacePsi s;
        s.name = "curve-block";
        s.poly[0] = t1;
        s.poly[0][2] += 1;
        s.poly[1] = t2;
        s.poly[2] = t1;
        for (auto& v : s.poly[2]) v = -v;
        s.poly[3] = t2;
        for (auto& v : s.poly[3]) v = -v;
        s.poly[3][2] += 1;
        return s;
    }
};

/// Grid condition quantities of a SurfacePsi on [-1, 1].
struct SurfaceConditions {
    double max_psi2_dd = 0, max_psi3_dd = 0;  // should be small
    double min_psi1_dd = 0, min_psi4_dd = 0;  // should be ~ 1
    double max_c3 = 0;                        // C^3 norm over all psi_i
};

inline SurfaceConditions surface_conditions(const SurfacePsi& psi, int grid = 512) {
    SurfaceConditions c;
    c.min_psi1_dd = c.min_psi4_dd = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= grid; ++k) {
        const double xi = -1.0 + 2.0 * k / grid;
        c.max_psi2_dd = std::max(c.max_psi2_dd, std::abs(psi.eval(2, 2, xi)));
        c.max_psi3_dd = std::max(c.max_psi3_dd, std::abs(psi.eval(3, 2, xi)));
        c.min_psi1_dd = std::min(c.min_psi1_dd, std::abs(psi.eval(1, 2, xi)));
        c.min_psi4_dd = std::min(c.min_psi4_dd, std::abs(psi.eval(4, 2, xi)));
        for (int i = 1; i <= 4; ++i)
            for (int r = 0; r <= 3; ++r) c.max_c3 = std::max(c.max_c3, std::abs(psi.eval(i, r, xi)));
    }
    return c;
}

}  // namespace esl
