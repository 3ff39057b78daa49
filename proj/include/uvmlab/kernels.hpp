#pragma once

#include <cstddef>
#include <cstdint>

// Data-parallel inner loops behind the model math. Every operation has a
// scalar reference implementation and a SIMD variant; the active backend is
// chosen once at startup (CPU detection, overridable via UVMLAB_KERNELS or
// set_backend) and the variants are equivalence-tested against the scalar
// reference. SIMD variants may reassociate sums, so cross-backend results
// agree to rounding, not bitwise; within one backend everything is
// deterministic.
namespace uvmlab::kernels {

enum class Backend { Scalar, Avx2, Neon };

Backend active_backend();
void set_backend(Backend b);  // throws std::runtime_error if unsupported
bool backend_supported(Backend b);
const char* backend_name(Backend b);

double dot(const double* a, const double* b, size_t n);

// y += a * x
void axpy(double a, const double* x, double* y, size_t n);

// x *= a
void scale(double a, double* x, size_t n);

void vadd(const double* a, const double* b, double* out, size_t n);
void vmul(const double* a, const double* b, double* out, size_t n);
void vclamp(double lo, double hi, double* x, size_t n);
void relu(const double* x, double* out, size_t n);

// dx = dy where pre > 0, else 0
void relu_backward(const double* pre, const double* dy, double* dx, size_t n);

double vsum(const double* x, size_t n);
double vmax(const double* x, size_t n);

// C(m×n) = A(m×k) · B(k×n); accumulates into C when acc is set.
void matmul(const double* a, const double* b, double* c,
            size_t m, size_t k, size_t n, bool acc = false);

// C(m×n) = A(m×k) · B(n×k)^T
void matmul_bt(const double* a, const double* b, double* c,
               size_t m, size_t k, size_t n, bool acc = false);

// C(k×n) += A(m×k)^T · B(m×n) — gradient accumulation form.
void matmul_at_acc(const double* a, const double* b, double* c,
                   size_t m, size_t k, size_t n);

}  // namespace uvmlab::kernels
