// Copyright Contributors to the voxpad Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "voxpad/sparse_tensor.hpp"

namespace voxpad {

//============================================================================
// Dense brute-force reference
//
// A deliberately naive dense-array convolution used as an oracle against the
// sparse path. It shares no code with the kernel-map implementation: plain
// nested loops over output voxels and kernel taps, zero padding at the array
// border. Small extents only.
//============================================================================

template <class Scalar>
struct DenseGrid {
    int nx = 0, ny = 0, nz = 0, channels = 0;
    std::vector<Scalar> data;  // x-major: ((i*ny + j)*nz + k)*channels + c

    DenseGrid() = default;
    DenseGrid(int nx_, int ny_, int nz_, int ch)
        : nx(nx_), ny(ny_), nz(nz_), channels(ch),
          data(std::size_t(nx_) * std::size_t(ny_) * std::size_t(nz_) * std::size_t(ch), Scalar(0)) {
        if (nx_ <= 0 || ny_ <= 0 || nz_ <= 0 || ch <= 0) throw InvalidInputError("DenseGrid: bad extents");
    }

    bool in_bounds(int i, int j, int k) const {
        return i >= 0 && i < nx && j >= 0 && j < ny && k >= 0 && k < nz;
    }
    Scalar& at(int i, int j, int k, int c) {
        return data[((std::size_t(i) * std::size_t(ny) + std::size_t(j)) * std::size_t(nz) + std::size_t(k)) *
                        std::size_t(channels) +
                    std::size_t(c)];
    }
    Scalar at(int i, int j, int k, int c) const {
        return data[((std::size_t(i) * std::size_t(ny) + std::size_t(j)) * std::size_t(nz) + std::size_t(k)) *
                        std::size_t(channels) +
                    std::size_t(c)];
    }
};

// Embed the rows of a single-batch sparse tensor into a dense array anchored
// at key (0,0,0); keys must lie in [0, n) per axis.
template <class Scalar>
DenseGrid<Scalar> embed_dense(const SparseTensor<Scalar>& t, int nx, int ny, int nz) {
    DenseGrid<Scalar> g(nx, ny, nz, t.channels());
    for (int r = 0; r < t.rows(); ++r) {
        const VoxelKey& k = t.keys[std::size_t(r)];
        if (k.batch != 0) throw InvalidInputError("embed_dense: single batch only");
        if (!g.in_bounds(k.i, k.j, k.k)) throw InvalidInputError("embed_dense: key out of bounds");
        for (int c = 0; c < t.channels(); ++c) g.at(k.i, k.j, k.k, c) = t.features(r, c);
    }
    return g;
}

// Textbook direct convolution. Weights: one C_in x C_out matrix per window
// offset in the same lexicographic order as window_offsets(). Kernel 3 /
// stride 1 keeps the extents; kernel 2 / stride 2 halves them (rounding up).
template <class Scalar>
DenseGrid<Scalar> dense_reference_conv(const DenseGrid<Scalar>& in,
                                       std::span<const Matrix<Scalar>> weights,
                                       std::span<const Scalar> bias, int kernel, int stride) {
    const int cin = in.channels;
    const int cout = int(bias.size());
    int lo = 0, hi = 0;
    DenseGrid<Scalar> out;
    if (kernel == 3 && stride == 1) {
        lo = -1;
        hi = 1;
        out = DenseGrid<Scalar>(in.nx, in.ny, in.nz, cout);
    } else if (kernel == 2 && stride == 2) {
        lo = 0;
        hi = 1;
        out = DenseGrid<Scalar>((in.nx + 1) / 2, (in.ny + 1) / 2, (in.nz + 1) / 2, cout);
    } else {
        throw InvalidInputError("dense_reference_conv: unsupported kernel/stride");
    }
    if (weights.size() != std::size_t((hi - lo + 1) * (hi - lo + 1) * (hi - lo + 1)))
        throw ShapeError("dense_reference_conv: weight count mismatch");

    for (int oi = 0; oi < out.nx; ++oi) {
        for (int oj = 0; oj < out.ny; ++oj) {
            for (int ok = 0; ok < out.nz; ++ok) {
                for (int co = 0; co < cout; ++co) {
                    Scalar acc = bias[std::size_t(co)];
                    int w_idx = 0;
                    for (int di = lo; di <= hi; ++di) {
                        for (int dj = lo; dj <= hi; ++dj) {
                            for (int dk = lo; dk <= hi; ++dk, ++w_idx) {
                                const int ii = stride * oi + di;
                                const int jj = stride * oj + dj;
                                const int kk = stride * ok + dk;
                                if (!in.in_bounds(ii, jj, kk)) continue;
                                const Matrix<Scalar>& w = weights[std::size_t(w_idx)];
                                for (int ci = 0; ci < cin; ++ci)
                                    acc += in.at(ii, jj, kk, ci) * w(ci, co);
                            }
                        }
                    }
                    out.at(oi, oj, ok, co) = acc;
                }
            }
        }
    }
    return out;
}

}  // namespace voxpad
