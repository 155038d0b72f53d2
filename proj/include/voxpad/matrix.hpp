// Copyright Contributors to the voxpad Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "voxpad/error.hpp"

namespace voxpad {

// Dense row-major matrix of feature rows. Deliberately minimal: the engine
// only needs row access, fill, and elementwise arithmetic done by callers.
template <class S>
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<S> data;

    Matrix() = default;
    Matrix(int r, int c, S fill = S(0)) : rows(r), cols(c), data(std::size_t(r) * std::size_t(c), fill) {
        if (r < 0 || c < 0) throw ShapeError("Matrix: negative shape");
    }

    S& operator()(int r, int c) { return data[std::size_t(r) * cols + c]; }
    const S& operator()(int r, int c) const { return data[std::size_t(r) * cols + c]; }

    std::span<S> row(int r) { return {data.data() + std::size_t(r) * cols, std::size_t(cols)}; }
    std::span<const S> row(int r) const { return {data.data() + std::size_t(r) * cols, std::size_t(cols)}; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

    template <class T>
    Matrix<T> cast() const {
        Matrix<T> out(rows, cols);
        for (std::size_t n = 0; n < data.size(); ++n) out.data[n] = T(data[n]);
        return out;
    }
};

template <class S>
Matrix<S> hconcat(const Matrix<S>& a, const Matrix<S>& b) {
    if (a.rows != b.rows) throw ShapeError("hconcat: row mismatch");
    Matrix<S> out(a.rows, a.cols + b.cols);
    for (int r = 0; r < a.rows; ++r) {
        auto dst = out.row(r);
        auto ra = a.row(r);
        auto rb = b.row(r);
        std::copy(ra.begin(), ra.end(), dst.begin());
        std::copy(rb.begin(), rb.end(), dst.begin() + a.cols);
    }
    return out;
}

// Copies of the row range [r0, r1) / column range [c0, c1).
template <class S>
Matrix<S> rows_slice(const Matrix<S>& m, int r0, int r1) {
    if (r0 < 0 || r1 < r0 || r1 > m.rows) throw ShapeError("rows_slice: bad range");
    Matrix<S> out(r1 - r0, m.cols);
    std::copy(m.data.begin() + std::size_t(r0) * m.cols, m.data.begin() + std::size_t(r1) * m.cols,
              out.data.begin());
    return out;
}

template <class S>
Matrix<S> cols_slice(const Matrix<S>& m, int c0, int c1) {
    if (c0 < 0 || c1 < c0 || c1 > m.cols) throw ShapeError("cols_slice: bad range");
    Matrix<S> out(m.rows, c1 - c0);
    for (int r = 0; r < m.rows; ++r) {
        auto src = m.row(r);
        std::copy(src.begin() + c0, src.begin() + c1, out.row(r).begin());
    }
    return out;
}

}  // namespace voxpad
