#include <cmath>

#include "uvmlab/kernels.hpp"
#include "uvmlab/model.hpp"

namespace uvmlab {

Model quantize(const Model& m, QuantMode mode) {
    Model out = m;
    out.cfg.quant = mode;
    if (mode == QuantMode::None) return out;
    for_each_tensor(out, [&](const std::string&, Mat& t) {
        if (mode == QuantMode::Clamp) {
            kernels::vclamp(-kClampBound, kClampBound, t.d.data(), t.size());
        } else {
            // 16-level signed grid: {-8, ..., +7}
            for (auto& x : t.d) {
                double r = static_cast<double>(std::llround(x));
                x = std::min(kClampBound - 1.0, std::max(-kClampBound, r));
            }
        }
    });
    return out;
}

uint64_t param_footprint_bytes(const Model& m, QuantMode mode) {
    uint64_t n = m.param_count();
    if (mode == QuantMode::Clamp4bit) return (n + 1) / 2;  // 4 bits per parameter
    return n * 4;  // float32 reporting convention
}

}  // namespace uvmlab
