#include "edbench/kernels.hpp"

namespace edbench::kern::scalar {

void matvec(const float* w, const float* x, const float* bias, float* y,
            size_t rows, size_t cols) {
    for (size_t i = 0; i < rows; ++i) {
        const float* row = w + i * cols;
        float acc = 0.0f;
        for (size_t j = 0; j < cols; ++j) acc += row[j] * x[j];
        y[i] = bias ? acc + bias[i] : acc;
    }
}

void matvec_t(const float* w, const float* g, float* out, size_t rows, size_t cols) {
    for (size_t j = 0; j < cols; ++j) out[j] = 0.0f;
    for (size_t i = 0; i < rows; ++i) {
        const float* row = w + i * cols;
        const float gi = g[i];
        for (size_t j = 0; j < cols; ++j) out[j] += gi * row[j];
    }
}

void rank1_accum(float* w, const float* u, const float* v, float alpha,
                 size_t rows, size_t cols) {
    for (size_t i = 0; i < rows; ++i) {
        float* row = w + i * cols;
        const float ui = alpha * u[i];
        for (size_t j = 0; j < cols; ++j) row[j] += ui * v[j];
    }
}

void axpy(float a, const float* x, float* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

float dot(const float* a, const float* b, size_t n) {
    float acc = 0.0f;
    for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

} // namespace edbench::kern::scalar
