// AVX2+FMA kernel variants. This translation unit is the only one compiled
// with -mavx2 -mfma; it must not be entered unless CPUID reports support.

#include "edbench/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

namespace edbench::kern::avx2 {

static inline float hsum256(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 sh = _mm_movehl_ps(lo, lo);
    lo = _mm_add_ps(lo, sh);
    sh = _mm_movehdup_ps(lo);
    lo = _mm_add_ss(lo, sh);
    return _mm_cvtss_f32(lo);
}

float dot(const float* a, const float* b, size_t n) {
    __m256 acc = _mm256_setzero_ps();
    size_t j = 0;
    for (; j + 8 <= n; j += 8) {
        acc = _mm256_fmadd_ps(_mm256_loadu_ps(a + j), _mm256_loadu_ps(b + j), acc);
    }
    float tail = 0.0f;
    for (; j < n; ++j) tail += a[j] * b[j];
    return hsum256(acc) + tail;
}

void matvec(const float* w, const float* x, const float* bias, float* y,
            size_t rows, size_t cols) {
    for (size_t i = 0; i < rows; ++i) {
        const float* row = w + i * cols;
        float acc = dot(row, x, cols);
        y[i] = bias ? acc + bias[i] : acc;
    }
}

void matvec_t(const float* w, const float* g, float* out, size_t rows, size_t cols) {
    size_t j = 0;
    for (; j + 8 <= cols; j += 8) _mm256_storeu_ps(out + j, _mm256_setzero_ps());
    for (; j < cols; ++j) out[j] = 0.0f;
    for (size_t i = 0; i < rows; ++i) {
        const float* row = w + i * cols;
        const __m256 gi = _mm256_set1_ps(g[i]);
        size_t k = 0;
        for (; k + 8 <= cols; k += 8) {
            __m256 o = _mm256_loadu_ps(out + k);
            o = _mm256_fmadd_ps(gi, _mm256_loadu_ps(row + k), o);
            _mm256_storeu_ps(out + k, o);
        }
        for (; k < cols; ++k) out[k] += g[i] * row[k];
    }
}

void rank1_accum(float* w, const float* u, const float* v, float alpha,
                 size_t rows, size_t cols) {
    for (size_t i = 0; i < rows; ++i) {
        float* row = w + i * cols;
        const float s = alpha * u[i];
        const __m256 sv = _mm256_set1_ps(s);
        size_t k = 0;
        for (; k + 8 <= cols; k += 8) {
            __m256 r = _mm256_loadu_ps(row + k);
            r = _mm256_fmadd_ps(sv, _mm256_loadu_ps(v + k), r);
            _mm256_storeu_ps(row + k, r);
        }
        for (; k < cols; ++k) row[k] += s * v[k];
    }
}

void axpy(float a, const float* x, float* y, size_t n) {
    const __m256 av = _mm256_set1_ps(a);
    size_t j = 0;
    for (; j + 8 <= n; j += 8) {
        __m256 r = _mm256_loadu_ps(y + j);
        r = _mm256_fmadd_ps(av, _mm256_loadu_ps(x + j), r);
        _mm256_storeu_ps(y + j, r);
    }
    for (; j < n; ++j) y[j] += a * x[j];
}

} // namespace edbench::kern::avx2

#endif // x86-64
