#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "core.hpp"

namespace esl {

template <class T>
struct QuadResult {
    T value{};
    double error = 0;
    long evals = 0;
    bool converged = false;
};

namespace detail {

// Gauss-Kronrod 7/15 abscissae and weights (QUADPACK qk15).
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851, 0.864864423359769072789712788640926,
    0.741531185599394439863864773280788, 0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204, 0.104790010322250183839876322541518,
    0.140653259715525918745189590510238, 0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                              0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class T, class F>
void gk15(const F& f, double a, double b, T& val, double& err) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    const T fc = f(c);
    T rk = fc * kWgk[7];
    T rg = fc * kWg[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = h * kXgk[j];
        const T s = f(c - dx) + f(c + dx);
        rk += s * kWgk[j];
        if (j % 2 == 1) rg += s * kWg[j / 2];
    }
    val = rk * h;
    err = std::abs((rk - rg) * h);
}

}  // namespace detail

/// Adaptive Gauss-Kronrod quadrature on [a, b], starting from `panels` equal
/// panels and bisecting any panel whose local error exceeds its share of
/// abs_tol.
template <class T, class F>
QuadResult<T> integrate_adaptive(const F& f, double a, double b, double abs_tol, long panels = 1,
                                 long max_panels = 2000000) {
    QuadResult<T> r;
    if (panels < 1) panels = 1;
    if (panels > max_panels) return r;
    struct Seg {
        double a, b;
        int depth;
    };
    std::vector<Seg> stack;
    const double len = b - a;
    for (long i = panels - 1; i >= 0; --i) {
        const double lo = a + len * static_cast<double>(i) / static_cast<double>(panels);
        const double hi = (i + 1 == panels) ? b : a + len * static_cast<double>(i + 1) / static_cast<double>(panels);
        stack.push_back({lo, hi, 0});
    }
    CompensatedSum<T> acc;
    double errsum = 0;
    long used = panels;
    bool ok = true;
    while (!stack.empty()) {
        const Seg s = stack.back();
        stack.pop_back();
        T v;
        double e;
        detail::gk15<T>(f, s.a, s.b, v, e);
        r.evals += 15;
        const double share = abs_tol * (s.b - s.a) / len;
        if (e <= share || s.depth >= 40) {
            if (e > share) ok = false;
            acc += v;
            errsum += e;
            continue;
        }
        if (++used > max_panels) {
            ok = false;
            acc += v;
            errsum += e;
            continue;
        }
        const double m = 0.5 * (s.a + s.b);
        stack.push_back({m, s.b, s.depth + 1});
        stack.push_back({s.a, m, s.depth + 1});
    }
    r.value = acc.value();
    r.error = errsum;
    r.converged = ok;
    return r;
}

}  // namespace esl
