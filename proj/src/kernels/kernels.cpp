#include "edbench/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

#if defined(__x86_64__) || defined(_M_X64)
#include <cpuid.h>
#endif

namespace edbench::kern {

bool avx2_supported() {
#if defined(__x86_64__) || defined(_M_X64)
    unsigned eax, ebx, ecx, edx;
    if (!__get_cpuid_count(7, 0, &eax, &ebx, &ecx, &edx)) return false;
    const bool avx2 = (ebx & (1u << 5)) != 0;
    if (!__get_cpuid(1, &eax, &ebx, &ecx, &edx)) return false;
    const bool fma = (ecx & (1u << 12)) != 0;
    return avx2 && fma;
#else
    return false;
#endif
}

namespace {

Backend detect() {
    if (const char* env = std::getenv("EDBENCH_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
        if (std::strcmp(env, "avx2") == 0 && avx2_supported()) return Backend::avx2;
        // anything else (including "auto") falls through to detection
    }
    return avx2_supported() ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend>& backend_slot() {
    static std::atomic<Backend> slot{detect()};
    return slot;
}

} // namespace

Backend active_backend() { return backend_slot().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
    if (b == Backend::avx2 && !avx2_supported()) b = Backend::scalar;
    backend_slot().store(b, std::memory_order_relaxed);
}

const char* backend_name(Backend b) {
    return b == Backend::avx2 ? "avx2" : "scalar";
}

#if defined(__x86_64__) || defined(_M_X64)
#define EDBENCH_DISPATCH(fn, ...)                                   \
    if (active_backend() == Backend::avx2) return avx2::fn(__VA_ARGS__); \
    return scalar::fn(__VA_ARGS__)
#else
#define EDBENCH_DISPATCH(fn, ...) return scalar::fn(__VA_ARGS__)
#endif

void matvec(const float* w, const float* x, const float* bias, float* y,
            size_t rows, size_t cols) {
    EDBENCH_DISPATCH(matvec, w, x, bias, y, rows, cols);
}

void matvec_t(const float* w, const float* g, float* out, size_t rows, size_t cols) {
    EDBENCH_DISPATCH(matvec_t, w, g, out, rows, cols);
}

void rank1_accum(float* w, const float* u, const float* v, float alpha,
                 size_t rows, size_t cols) {
    EDBENCH_DISPATCH(rank1_accum, w, u, v, alpha, rows, cols);
}

void axpy(float a, const float* x, float* y, size_t n) {
    EDBENCH_DISPATCH(axpy, a, x, y, n);
}

float dot(const float* a, const float* b, size_t n) {
    EDBENCH_DISPATCH(dot, a, b, n);
}

#undef EDBENCH_DISPATCH

} // namespace edbench::kern
