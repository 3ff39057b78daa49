#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <vector>

namespace uvmlab {

// Dense row-major matrix of doubles. Deliberately minimal: the numeric
// heavy lifting lives in the kernels module, this is just storage.
struct Mat {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> d;

    Mat() = default;
    Mat(size_t r, size_t c) : rows(r), cols(c), d(r * c, 0.0) {}

    double& operator()(size_t r, size_t c) {
        assert(r < rows && c < cols);
        return d[r * cols + c];
    }
    double operator()(size_t r, size_t c) const {
        assert(r < rows && c < cols);
        return d[r * cols + c];
    }

    double* row(size_t r) { return d.data() + r * cols; }
    const double* row(size_t r) const { return d.data() + r * cols; }

    size_t size() const { return d.size(); }
    bool empty() const { return d.empty(); }
    void zero() { std::fill(d.begin(), d.end(), 0.0); }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

}  // namespace uvmlab
