#if defined(__aarch64__)

#include <arm_neon.h>

#include <algorithm>
#include <cstddef>

// NEON variants, two doubles per lane.
namespace uvmlab::kernels::neon {

double dot(const double* a, const double* b, size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 2 <= n; i += 2)
        acc = vfmaq_f64(acc, vld1q_f64(a + i), vld1q_f64(b + i));
    double s = vaddvq_f64(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy(double a, const double* x, double* y, size_t n) {
    float64x2_t va = vdupq_n_f64(a);
    size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

void scale(double a, double* x, size_t n) {
    float64x2_t va = vdupq_n_f64(a);
    size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(x + i, vmulq_f64(va, vld1q_f64(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

void vadd(const double* a, const double* b, double* out, size_t n) {
    size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(out + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void vmul(const double* a, const double* b, double* out, size_t n) {
    size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void vclamp(double lo, double hi, double* x, size_t n) {
    float64x2_t vlo = vdupq_n_f64(lo);
    float64x2_t vhi = vdupq_n_f64(hi);
    size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(x + i, vminq_f64(vhi, vmaxq_f64(vlo, vld1q_f64(x + i))));
    for (; i < n; ++i) x[i] = std::min(hi, std::max(lo, x[i]));
}

void relu(const double* x, double* out, size_t n) {
    float64x2_t z = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(out + i, vmaxq_f64(z, vld1q_f64(x + i)));
    for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* pre, const double* dy, double* dx, size_t n) {
    float64x2_t z = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        uint64x2_t mask = vcgtq_f64(vld1q_f64(pre + i), z);
        float64x2_t v = vld1q_f64(dy + i);
        vst1q_f64(dx + i, vreinterpretq_f64_u64(
                              vandq_u64(mask, vreinterpretq_u64_f64(v))));
    }
    for (; i < n; ++i) dx[i] = pre[i] > 0.0 ? dy[i] : 0.0;
}

double vsum(const double* x, size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(x + i));
    double s = vaddvq_f64(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

double vmax(const double* x, size_t n) {
    double m = x[0];
    size_t i = 1;
    for (; i + 2 <= n; i += 2)
        m = std::max(m, vmaxvq_f64(vld1q_f64(x + i)));
    for (; i < n; ++i) m = std::max(m, x[i]);
    return m;
}

}  // namespace uvmlab::kernels::neon

#endif  // __aarch64__
