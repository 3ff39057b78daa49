#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "uvmlab/kernels.hpp"
#include "uvmlab/rng.hpp"

using namespace uvmlab;
namespace k = uvmlab::kernels;

namespace {

std::vector<double> random_vec(Rng& rng, size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-2.0, 2.0);
    return v;
}

// Runs fn under every supported backend and checks the results agree with
// the scalar reference within tol.
template <class Fn>
void check_backends(Fn fn, double tol) {
    k::Backend saved = k::active_backend();
    k::set_backend(k::Backend::Scalar);
    auto ref = fn();
    for (k::Backend b : {k::Backend::Avx2, k::Backend::Neon}) {
        if (!k::backend_supported(b)) continue;
        k::set_backend(b);
        auto got = fn();
        REQUIRE(got.size() == ref.size());
        for (size_t i = 0; i < ref.size(); ++i)
            CHECK(got[i] == doctest::Approx(ref[i]).epsilon(tol));
    }
    k::set_backend(saved);
}

}  // namespace

TEST_CASE("dot/axpy/reductions agree across backends and sizes") {
    Rng rng(7);
    for (size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 31u, 128u, 1001u}) {
        auto a = random_vec(rng, n);
        auto b = random_vec(rng, n);
        check_backends(
            [&] {
                std::vector<double> out(3, 0.0);
                out[0] = n ? k::dot(a.data(), b.data(), n) : 0.0;
                out[1] = n ? k::vsum(a.data(), n) : 0.0;
                out[2] = n ? k::vmax(a.data(), n) : 0.0;
                return out;
            },
            1e-12);
        check_backends(
            [&] {
                std::vector<double> y = b;
                k::axpy(0.37, a.data(), y.data(), n);
                k::scale(1.25, y.data(), n);
                return y;
            },
            1e-12);
    }
}

TEST_CASE("elementwise ops agree across backends") {
    Rng rng(11);
    size_t n = 133;
    auto a = random_vec(rng, n);
    auto b = random_vec(rng, n);
    check_backends(
        [&] {
            std::vector<double> out(n), relu_out(n), relu_dx(n);
            k::vadd(a.data(), b.data(), out.data(), n);
            k::vmul(out.data(), b.data(), out.data(), n);
            k::relu(a.data(), relu_out.data(), n);
            k::relu_backward(a.data(), b.data(), relu_dx.data(), n);
            std::vector<double> clamped = a;
            k::vclamp(-0.5, 0.5, clamped.data(), n);
            out.insert(out.end(), relu_out.begin(), relu_out.end());
            out.insert(out.end(), relu_dx.begin(), relu_dx.end());
            out.insert(out.end(), clamped.begin(), clamped.end());
            return out;
        },
        1e-14);
}

TEST_CASE("matmul family matches a naive triple loop") {
    Rng rng(13);
    const size_t m = 9, kk = 7, n = 11;
    auto a = random_vec(rng, m * kk);
    auto b = random_vec(rng, kk * n);
    auto bt = random_vec(rng, n * kk);

    std::vector<double> naive(m * n, 0.0);
    for (size_t i = 0; i < m; ++i)
        for (size_t p = 0; p < kk; ++p)
            for (size_t j = 0; j < n; ++j) naive[i * n + j] += a[i * kk + p] * b[p * n + j];

    std::vector<double> c(m * n, 0.0);
    k::matmul(a.data(), b.data(), c.data(), m, kk, n);
    for (size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(naive[i]).epsilon(1e-12));

    std::vector<double> naive_bt(m * n, 0.0);
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j)
            for (size_t p = 0; p < kk; ++p)
                naive_bt[i * n + j] += a[i * kk + p] * bt[j * kk + p];
    std::vector<double> cbt(m * n, 0.0);
    k::matmul_bt(a.data(), bt.data(), cbt.data(), m, kk, n);
    for (size_t i = 0; i < cbt.size(); ++i)
        CHECK(cbt[i] == doctest::Approx(naive_bt[i]).epsilon(1e-12));

    // C(k×n) += A^T(m×k) · B(m×n)
    auto b2 = random_vec(rng, m * n);
    std::vector<double> naive_at(kk * n, 0.0);
    for (size_t i = 0; i < m; ++i)
        for (size_t p = 0; p < kk; ++p)
            for (size_t j = 0; j < n; ++j)
                naive_at[p * n + j] += a[i * kk + p] * b2[i * n + j];
    std::vector<double> cat(kk * n, 0.0);
    k::matmul_at_acc(a.data(), b2.data(), cat.data(), m, kk, n);
    for (size_t i = 0; i < cat.size(); ++i)
        CHECK(cat[i] == doctest::Approx(naive_at[i]).epsilon(1e-12));

    check_backends(
        [&] {
            std::vector<double> out(m * n, 0.0);
            k::matmul(a.data(), b.data(), out.data(), m, kk, n);
            return out;
        },
        1e-12);
}

TEST_CASE("backend dispatch reports a usable backend") {
    CHECK(k::backend_supported(k::Backend::Scalar));
    k::Backend b = k::active_backend();
    CHECK(k::backend_supported(b));
    CHECK_THROWS(k::set_backend(k::backend_supported(k::Backend::Avx2) ? k::Backend::Neon
                                                                       : k::Backend::Avx2));
}
