#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>
#include <vector>

#include "core.hpp"

namespace esl {

namespace detail {

// FFTW planning is not thread-safe; execution with the new-array interface is.
// Plans are created once per (size, direction) and kept for the process.
inline fftw_plan cached_plan(int n, int sign) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, fftw_plan> plans;
    std::lock_guard<std::mutex> lock(mu);
    auto it = plans.find({n, sign});
    if (it != plans.end()) return it->second;
    auto* in = fftw_alloc_complex(static_cast<std::size_t>(n));
    auto* out = fftw_alloc_complex(static_cast<std::size_t>(n));
    fftw_plan p = fftw_plan_dft_1d(n, in, out, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(in);
    fftw_free(out);
    if (!p) throw ResourceError("fftw: plan creation failed");
    plans.emplace(std::make_pair(n, sign), p);
    return p;
}

inline void run_fft(const std::vector<cplx>& in, std::vector<cplx>& out, int sign) {
    const int n = static_cast<int>(in.size());
    out.resize(in.size());
    if (n == 0) return;
    fftw_plan p = cached_plan(n, sign);
    // fftw_execute_dft takes non-const input but does not modify it for
    // out-of-place plans.
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in.data())),
                     reinterpret_cast<fftw_complex*>(out.data()));
}

}  // namespace detail

/// out[j] = sum_k in[k] e(+kj/n).
inline void dft_synthesis(const std::vector<cplx>& in, std::vector<cplx>& out) {
    detail::run_fft(in, out, FFTW_BACKWARD);
}

/// out[k] = sum_j in[j] e(-kj/n).
inline void dft_analysis(const std::vector<cplx>& in, std::vector<cplx>& out) {
    detail::run_fft(in, out, FFTW_FORWARD);
}

}  // namespace esl
