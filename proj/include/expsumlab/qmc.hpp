#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <boost/random/sobol.hpp>

#include "core.hpp"

namespace esl {

/// Batch means of several integrands sampled at the same points.
struct QmcBatches {
    std::int64_t samples = 0;
    int batches = 0;
    std::vector<std::vector<double>> means;  // [batch][component]

    double mean(std::size_t comp) const {
        CompensatedSum<double> s;
        for (const auto& b : means) s += b[comp];
        return s.value() / batches;
    }
    /// Standard error of g(batch means) over the batches.
    template <class G>
    double spread(const G& g) const {
        std::vector<double> v;
        for (const auto& b : means) v.push_back(g(b));
        double m = 0;
        for (double x : v) m += x;
        m /= batches;
        double var = 0;
        for (double x : v) var += (x - m) * (x - m);
        return std::sqrt(var / (batches - 1) / batches);
    }
};

/// Randomized quasi-Monte Carlo over [0,1)^dim: one Sobol point set of
/// samples/batches points reused under `batches` independent random shifts
/// mod 1. f(u, out) writes ncomp integrand values for the point u.
template <class F>
QmcBatches qmc_batches(int dim, int ncomp, std::int64_t samples, int batches, std::uint64_t seed, int workers,
                       const F& f) {
    if (dim < 1 || ncomp < 1) throw ArgumentError("qmc: dim and component count must be >= 1");
    if (batches < 2) throw ArgumentError("qmc: need at least two batches");
    const std::int64_t per = samples / batches;
    if (per < 1) throw ArgumentError("qmc: fewer samples than batches");
    std::vector<double> pts(static_cast<std::size_t>(per * dim));
    boost::random::sobol gen(static_cast<std::size_t>(dim));
    for (auto& v : pts) v = std::ldexp(static_cast<double>(gen()), -64);

    QmcBatches out;
    out.batches = batches;
    out.samples = per * batches;
    out.means.assign(static_cast<std::size_t>(batches), std::vector<double>(static_cast<std::size_t>(ncomp), 0.0));
    parallel_for(static_cast<std::size_t>(batches), workers, [&](std::size_t b) {
        CounterRng rng(seed, b);
        std::vector<double> shift(static_cast<std::size_t>(dim)), u(static_cast<std::size_t>(dim)),
            val(static_cast<std::size_t>(ncomp));
        for (auto& s : shift) s = rng.uniform();
        std::vector<CompensatedSum<double>> acc(static_cast<std::size_t>(ncomp));
        for (std::int64_t i = 0; i < per; ++i) {
            for (int d = 0; d < dim; ++d) {
                const double v = pts[static_cast<std::size_t>(i * dim + d)] + shift[static_cast<std::size_t>(d)];
                u[static_cast<std::size_t>(d)] = v >= 1 ? v - 1 : v;
            }
            f(u.data(), val.data());
            for (int c = 0; c < ncomp; ++c) acc[static_cast<std::size_t>(c)] += val[static_cast<std::size_t>(c)];
        }
        for (int c = 0; c < ncomp; ++c)
            out.means[b][static_cast<std::size_t>(c)] = acc[static_cast<std::size_t>(c)].value() / static_cast<double>(per);
    });
    return out;
}

struct QmcEstimate {
    double mean = 0;
    double error = 0;  // standard error from the spread of batch means
    std::int64_t samples = 0;
    int batches = 0;
};

template <class F>
QmcEstimate qmc_mean(int dim, std::int64_t samples, int batches, std::uint64_t seed, int workers, const F& f) {
    const auto b = qmc_batches(dim, 1, samples, batches, seed, workers, [&](const double* u, double* out) { out[0] = f(u); });
    return {b.mean(0), b.spread([](const std::vector<double>& m) { return m[0]; }), b.samples, b.batches};
}

}  // namespace esl
