#pragma once

#include <fftw3.h>

#include <complex>
#include <cstdint>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include "downscale/common.hpp"

namespace downscale::fft {

// Unnormalized complex 2D DFT on interleaved (re,im) data, both precisions.
// Plans (FFTW_ESTIMATE) are cached per (h, w, sign) together with their
// scratch buffers; access is serialized, which is fine for the sizes used here.

namespace detail {

template <typename T>
struct FftwApi;

template <>
struct FftwApi<double> {
    using plan_t = fftw_plan;
    using complex_t = fftw_complex;
    static void* malloc(std::size_t n) { return fftw_malloc(n); }
    static void free(void* p) { fftw_free(p); }
    static plan_t plan(int h, int w, complex_t* in, complex_t* out, int sign) {
        return fftw_plan_dft_2d(h, w, in, out, sign, FFTW_ESTIMATE);
    }
    static void execute(plan_t p) { fftw_execute(p); }
};

template <>
struct FftwApi<float> {
    using plan_t = fftwf_plan;
    using complex_t = fftwf_complex;
    static void* malloc(std::size_t n) { return fftwf_malloc(n); }
    static void free(void* p) { fftwf_free(p); }
    static plan_t plan(int h, int w, complex_t* in, complex_t* out, int sign) {
        return fftwf_plan_dft_2d(h, w, in, out, sign, FFTW_ESTIMATE);
    }
    static void execute(plan_t p) { fftwf_execute(p); }
};

template <typename T>
struct PlanEntry {
    typename FftwApi<T>::plan_t plan;
    typename FftwApi<T>::complex_t* in;
    typename FftwApi<T>::complex_t* out;
};

template <typename T>
PlanEntry<T>& plan_for(int h, int w, int sign) {
    static std::map<std::tuple<int, int, int>, PlanEntry<T>> cache;
    auto key = std::make_tuple(h, w, sign);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    PlanEntry<T> e;
    std::size_t bytes = sizeof(typename FftwApi<T>::complex_t) * static_cast<std::size_t>(h) * w;
    e.in = static_cast<typename FftwApi<T>::complex_t*>(FftwApi<T>::malloc(bytes));
    e.out = static_cast<typename FftwApi<T>::complex_t*>(FftwApi<T>::malloc(bytes));
    e.plan = FftwApi<T>::plan(h, w, e.in, e.out, sign);
    if (!e.plan) fail("fftw: plan creation failed");
    return cache.emplace(key, e).first->second;
}

inline std::mutex& fft_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace detail

// in/out: h*w interleaved complex values; out may alias in.
template <typename T>
void c2c_2d(int h, int w, const T* in_interleaved, T* out_interleaved, bool forward) {
    std::lock_guard<std::mutex> lock(detail::fft_mutex());
    auto& e = detail::plan_for<T>(h, w, forward ? FFTW_FORWARD : FFTW_BACKWARD);
    const std::size_t n = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    T* pin = reinterpret_cast<T*>(e.in);
    for (std::size_t i = 0; i < 2 * n; ++i) pin[i] = in_interleaved[i];
    detail::FftwApi<T>::execute(e.plan);
    const T* pout = reinterpret_cast<const T*>(e.out);
    for (std::size_t i = 0; i < 2 * n; ++i) out_interleaved[i] = pout[i];
}

// Real field to unnormalized complex spectrum (h*w interleaved pairs).
template <typename T>
void forward_real(int h, int w, const T* real_in, T* complex_out) {
    const std::size_t n = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    std::vector<T> buf(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        buf[2 * i] = real_in[i];
        buf[2 * i + 1] = T(0);
    }
    c2c_2d<T>(h, w, buf.data(), complex_out, true);
}

}  // namespace downscale::fft
