#pragma once

#include <cstddef>

// Dense float kernels behind the model's inner loops. Every kernel has a
// scalar reference implementation and, on x86-64, an AVX2+FMA variant.
// The active variant is chosen once at startup from CPUID and can be
// overridden (EDBENCH_KERNELS=scalar|avx2 or set_backend). Variants are
// equivalence-tested against a double-precision reference; they are not
// bit-identical to each other, but a given build on a given machine is
// fully deterministic.

namespace edbench::kern {

enum class Backend { scalar, avx2 };

// y = W x (+ bias). W is row-major [rows x cols], x has cols entries,
// y gets rows entries. bias may be null.
void matvec(const float* w, const float* x, const float* bias, float* y,
            size_t rows, size_t cols);

// out = W^T g. W row-major [rows x cols], g has rows entries, out gets
// cols entries. Used for input gradients in backprop.
void matvec_t(const float* w, const float* g, float* out, size_t rows, size_t cols);

// W += alpha * u v^T, W row-major [rows x cols].
void rank1_accum(float* w, const float* u, const float* v, float alpha,
                 size_t rows, size_t cols);

// y += a * x
void axpy(float a, const float* x, float* y, size_t n);

float dot(const float* a, const float* b, size_t n);

Backend active_backend();
void set_backend(Backend b); // overrides detection; avx2 requires hardware support
bool avx2_supported();
const char* backend_name(Backend b);

namespace scalar {
void matvec(const float* w, const float* x, const float* bias, float* y,
            size_t rows, size_t cols);
void matvec_t(const float* w, const float* g, float* out, size_t rows, size_t cols);
void rank1_accum(float* w, const float* u, const float* v, float alpha,
                 size_t rows, size_t cols);
void axpy(float a, const float* x, float* y, size_t n);
float dot(const float* a, const float* b, size_t n);
} // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
void matvec(const float* w, const float* x, const float* bias, float* y,
            size_t rows, size_t cols);
void matvec_t(const float* w, const float* g, float* out, size_t rows, size_t cols);
void rank1_accum(float* w, const float* u, const float* v, float alpha,
                 size_t rows, size_t cols);
void axpy(float a, const float* x, float* y, size_t n);
float dot(const float* a, const float* b, size_t n);
} // namespace avx2
#endif

} // namespace edbench::kern
