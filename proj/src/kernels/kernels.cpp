#include "uvmlab/kernels.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

namespace uvmlab::kernels {

namespace scalar {

double dot(const double* a, const double* b, size_t n) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy(double a, const double* x, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale(double a, double* x, size_t n) {
    for (size_t i = 0; i < n; ++i) x[i] *= a;
}

void vadd(const double* a, const double* b, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void vmul(const double* a, const double* b, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void vclamp(double lo, double hi, double* x, size_t n) {
    for (size_t i = 0; i < n; ++i) x[i] = std::min(hi, std::max(lo, x[i]));
}

void relu(const double* x, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* pre, const double* dy, double* dx, size_t n) {
    for (size_t i = 0; i < n; ++i) dx[i] = pre[i] > 0.0 ? dy[i] : 0.0;
}

double vsum(const double* x, size_t n) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += x[i];
    return s;
}

double vmax(const double* x, size_t n) {
    double m = x[0];
    for (size_t i = 1; i < n; ++i) m = std::max(m, x[i]);
    return m;
}

}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
double dot(const double* a, const double* b, size_t n);
void axpy(double a, const double* x, double* y, size_t n);
void scale(double a, double* x, size_t n);
void vadd(const double* a, const double* b, double* out, size_t n);
void vmul(const double* a, const double* b, double* out, size_t n);
void vclamp(double lo, double hi, double* x, size_t n);
void relu(const double* x, double* out, size_t n);
void relu_backward(const double* pre, const double* dy, double* dx, size_t n);
double vsum(const double* x, size_t n);
double vmax(const double* x, size_t n);
}  // namespace avx2
#endif

#if defined(__aarch64__)
namespace neon {
double dot(const double* a, const double* b, size_t n);
void axpy(double a, const double* x, double* y, size_t n);
void scale(double a, double* x, size_t n);
void vadd(const double* a, const double* b, double* out, size_t n);
void vmul(const double* a, const double* b, double* out, size_t n);
void vclamp(double lo, double hi, double* x, size_t n);
void relu(const double* x, double* out, size_t n);
void relu_backward(const double* pre, const double* dy, double* dx, size_t n);
double vsum(const double* x, size_t n);
double vmax(const double* x, size_t n);
}  // namespace neon
#endif

bool backend_supported(Backend b) {
    switch (b) {
        case Backend::Scalar:
            return true;
        case Backend::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
            return __builtin_cpu_supports("avx2") != 0;
#else
            return false;
#endif
        case Backend::Neon:
#if defined(__aarch64__)
            return true;
#else
            return false;
#endif
    }
    return false;
}

const char* backend_name(Backend b) {
    switch (b) {
        case Backend::Scalar: return "scalar";
        case Backend::Avx2: return "avx2";
        case Backend::Neon: return "neon";
    }
    return "?";
}

namespace {

Backend detect_backend() {
    if (const char* env = std::getenv("UVMLAB_KERNELS")) {
        std::string s(env);
        if (s == "scalar") return Backend::Scalar;
        if (s == "avx2" && backend_supported(Backend::Avx2)) return Backend::Avx2;
        if (s == "neon" && backend_supported(Backend::Neon)) return Backend::Neon;
        return Backend::Scalar;
    }
    if (backend_supported(Backend::Avx2)) return Backend::Avx2;
    if (backend_supported(Backend::Neon)) return Backend::Neon;
    return Backend::Scalar;
}

Backend g_backend = detect_backend();

}  // namespace

Backend active_backend() { return g_backend; }

void set_backend(Backend b) {
    if (!backend_supported(b))
        throw std::runtime_error(std::string("kernel backend not supported on this host: ") +
                                 backend_name(b));
    g_backend = b;
}

#if defined(__x86_64__) || defined(_M_X64)
#define UVMLAB_DISPATCH(fn, ...)                                  \
    do {                                                          \
        if (g_backend == Backend::Avx2) return avx2::fn(__VA_ARGS__); \
        return scalar::fn(__VA_ARGS__);                           \
    } while (0)
#elif defined(__aarch64__)
#define UVMLAB_DISPATCH(fn, ...)                                  \
    do {                                                          \
        if (g_backend == Backend::Neon) return neon::fn(__VA_ARGS__); \
        return scalar::fn(__VA_ARGS__);                           \
    } while (0)
#else
#define UVMLAB_DISPATCH(fn, ...) return scalar::fn(__VA_ARGS__)
#endif

double dot(const double* a, const double* b, size_t n) { UVMLAB_DISPATCH(dot, a, b, n); }
void axpy(double a, const double* x, double* y, size_t n) { UVMLAB_DISPATCH(axpy, a, x, y, n); }
void scale(double a, double* x, size_t n) { UVMLAB_DISPATCH(scale, a, x, n); }
void vadd(const double* a, const double* b, double* out, size_t n) { UVMLAB_DISPATCH(vadd, a, b, out, n); }
void vmul(const double* a, const double* b, double* out, size_t n) { UVMLAB_DISPATCH(vmul, a, b, out, n); }
void vclamp(double lo, double hi, double* x, size_t n) { UVMLAB_DISPATCH(vclamp, lo, hi, x, n); }
void relu(const double* x, double* out, size_t n) { UVMLAB_DISPATCH(relu, x, out, n); }
void relu_backward(const double* pre, const double* dy, double* dx, size_t n) {
    UVMLAB_DISPATCH(relu_backward, pre, dy, dx, n);
}
double vsum(const double* x, size_t n) { UVMLAB_DISPATCH(vsum, x, n); }
double vmax(const double* x, size_t n) { UVMLAB_DISPATCH(vmax, x, n); }

#undef UVMLAB_DISPATCH

void matmul(const double* a, const double* b, double* c,
            size_t m, size_t k, size_t n, bool acc) {
    if (!acc) std::memset(c, 0, m * n * sizeof(double));
    for (size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (size_t p = 0; p < k; ++p) {
            double av = arow[p];
            if (av != 0.0) axpy(av, b + p * n, crow, n);
        }
    }
}

void matmul_bt(const double* a, const double* b, double* c,
               size_t m, size_t k, size_t n, bool acc) {
    for (size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (size_t j = 0; j < n; ++j) {
            double v = dot(arow, b + j * k, k);
            crow[j] = acc ? crow[j] + v : v;
        }
    }
}

void matmul_at_acc(const double* a, const double* b, double* c,
                   size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* brow = b + i * n;
        for (size_t p = 0; p < k; ++p) {
            double av = arow[p];
            if (av != 0.0) axpy(av, brow, c + p * n, n);
        }
    }
}

}  // namespace uvmlab::kernels
