#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "edbench/kernels.hpp"
#include "edbench/rng.hpp"

using namespace edbench;

namespace {

std::vector<float> random_vec(Rng& rng, size_t n, double scale = 1.0) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>((rng.uniform() * 2.0 - 1.0) * scale);
    return v;
}

// double-precision reference plus a rounding bound proportional to the
// sum of absolute products
struct DotRef {
    double value = 0.0;
    double abs_sum = 0.0;
};

DotRef dot_ref(const float* a, const float* b, size_t n) {
    DotRef r;
    for (size_t i = 0; i < n; ++i) {
        const double p = static_cast<double>(a[i]) * b[i];
        r.value += p;
        r.abs_sum += std::abs(p);
    }
    return r;
}

const std::vector<size_t> kSizes = {1, 2, 3, 7, 8, 9, 15, 16, 17, 31, 64, 65, 100, 256, 1000};

template <class Fn>
void for_each_backend(Fn&& fn) {
    fn(kern::Backend::scalar);
    if (kern::avx2_supported()) fn(kern::Backend::avx2);
}

struct BackendRestore {
    kern::Backend saved = kern::active_backend();
    ~BackendRestore() { kern::set_backend(saved); }
};

} // namespace

TEST_CASE("dot matches double reference across sizes and backends") {
    BackendRestore restore;
    Rng rng(1);
    for (size_t n : kSizes) {
        const auto a = random_vec(rng, n);
        const auto b = random_vec(rng, n);
        const auto ref = dot_ref(a.data(), b.data(), n);
        for_each_backend([&](kern::Backend backend) {
            kern::set_backend(backend);
            const float got = kern::dot(a.data(), b.data(), n);
            const double bound = 1e-5 * ref.abs_sum + 1e-6;
            CHECK(std::abs(static_cast<double>(got) - ref.value) <= bound);
        });
    }
}

TEST_CASE("matvec matches double reference") {
    BackendRestore restore;
    Rng rng(2);
    for (size_t rows : {size_t{1}, size_t{5}, size_t{64}}) {
        for (size_t cols : kSizes) {
            const auto w = random_vec(rng, rows * cols);
            const auto x = random_vec(rng, cols);
            const auto bias = random_vec(rng, rows);
            for_each_backend([&](kern::Backend backend) {
                kern::set_backend(backend);
                std::vector<float> y(rows);
                kern::matvec(w.data(), x.data(), bias.data(), y.data(), rows, cols);
                for (size_t i = 0; i < rows; ++i) {
                    const auto ref = dot_ref(w.data() + i * cols, x.data(), cols);
                    const double want = ref.value + bias[i];
                    const double bound =
                        1e-5 * (ref.abs_sum + std::abs(static_cast<double>(bias[i]))) + 1e-6;
                    CHECK(std::abs(static_cast<double>(y[i]) - want) <= bound);
                }
            });
        }
    }
}

TEST_CASE("matvec_t matches double reference") {
    BackendRestore restore;
    Rng rng(3);
    const size_t rows = 37, cols = 65;
    const auto w = random_vec(rng, rows * cols);
    const auto g = random_vec(rng, rows);
    for_each_backend([&](kern::Backend backend) {
        kern::set_backend(backend);
        std::vector<float> out(cols);
        kern::matvec_t(w.data(), g.data(), out.data(), rows, cols);
        for (size_t j = 0; j < cols; ++j) {
            double want = 0.0, abs_sum = 0.0;
            for (size_t i = 0; i < rows; ++i) {
                const double p = static_cast<double>(g[i]) * w[i * cols + j];
                want += p;
                abs_sum += std::abs(p);
            }
            CHECK(std::abs(static_cast<double>(out[j]) - want) <= 1e-5 * abs_sum + 1e-6);
        }
    });
}

TEST_CASE("rank1_accum and axpy match double reference") {
    BackendRestore restore;
    Rng rng(4);
    const size_t rows = 19, cols = 43;
    const auto u = random_vec(rng, rows);
    const auto v = random_vec(rng, cols);
    const auto x = random_vec(rng, cols);
    const auto w0 = random_vec(rng, rows * cols);
    const float alpha = 0.37f;
    for_each_backend([&](kern::Backend backend) {
        kern::set_backend(backend);
        auto w = w0;
        kern::rank1_accum(w.data(), u.data(), v.data(), alpha, rows, cols);
        for (size_t i = 0; i < rows; ++i) {
            for (size_t j = 0; j < cols; ++j) {
                const double want = static_cast<double>(w0[i * cols + j]) +
                                    static_cast<double>(alpha) * u[i] * v[j];
                CHECK(std::abs(static_cast<double>(w[i * cols + j]) - want) <=
                      1e-5 * (std::abs(want) + 1.0));
            }
        }
        auto y = random_vec(rng, cols);
        const auto y0 = y;
        kern::axpy(alpha, x.data(), y.data(), cols);
        for (size_t j = 0; j < cols; ++j) {
            const double want = static_cast<double>(y0[j]) + static_cast<double>(alpha) * x[j];
            CHECK(std::abs(static_cast<double>(y[j]) - want) <= 1e-5 * (std::abs(want) + 1.0));
        }
    });
}

TEST_CASE("scalar and avx2 agree tightly on the same inputs") {
    if (!kern::avx2_supported()) return;
#if defined(__x86_64__) || defined(_M_X64)
    Rng rng(5);
    for (size_t n : kSizes) {
        const auto a = random_vec(rng, n);
        const auto b = random_vec(rng, n);
        const float scalar = kern::scalar::dot(a.data(), b.data(), n);
        const float vec = kern::avx2::dot(a.data(), b.data(), n);
        const auto ref = dot_ref(a.data(), b.data(), n);
        CHECK(std::abs(static_cast<double>(scalar) - static_cast<double>(vec)) <=
              2e-5 * ref.abs_sum + 1e-6);
    }
#endif
}

TEST_CASE("backend selection is sticky and degrades safely") {
    BackendRestore restore;
    kern::set_backend(kern::Backend::scalar);
    CHECK(kern::active_backend() == kern::Backend::scalar);
    CHECK(std::string(kern::backend_name(kern::Backend::scalar)) == "scalar");
    kern::set_backend(kern::Backend::avx2);
    if (kern::avx2_supported()) {
        CHECK(kern::active_backend() == kern::Backend::avx2);
    } else {
        CHECK(kern::active_backend() == kern::Backend::scalar);
    }
}
