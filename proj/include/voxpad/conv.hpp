// Copyright Contributors to the voxpad Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "voxpad/sparse_tensor.hpp"

namespace voxpad {

//============================================================================
// Kernel maps
//
// A sparse convolution is realized as gather-multiply-scatter: for every
// kernel offset d, the kernel map lists the (in_row, out_row) pairs with
// in_key = stride * out_key + d. Absent inputs contribute zero and are simply
// not listed.
//============================================================================

using Offset3 = std::array<int, 3>;

// Two supported geometries: same-resolution kernel 3 / stride 1 (submanifold,
// window {-1,0,1}^3) and downsampling kernel 2 / stride 2 (window {0,1}^3, a
// non-overlapping partition of children). Offsets are in lexicographic order.
inline std::vector<Offset3> window_offsets(int kernel, int stride) {
    std::vector<Offset3> w;
    if (kernel == 3 && stride == 1) {
        for (int i = -1; i <= 1; ++i)
            for (int j = -1; j <= 1; ++j)
                for (int k = -1; k <= 1; ++k) w.push_back({i, j, k});
    } else if (kernel == 2 && stride == 2) {
        for (int i = 0; i <= 1; ++i)
            for (int j = 0; j <= 1; ++j)
                for (int k = 0; k <= 1; ++k) w.push_back({i, j, k});
    } else {
        throw InvalidInputError("window_offsets: unsupported kernel/stride " + std::to_string(kernel) +
                                "/" + std::to_string(stride));
    }
    return w;
}

struct KernelMap {
    int kernel = 3;
    int stride = 1;
    std::vector<Offset3> offsets;
    // pairs[d] = (in_row, out_row) pairs for offset d, sorted by out_row.
    std::vector<std::vector<std::pair<int, int>>> pairs;
    int in_rows = 0;
    int out_rows = 0;
    // Output scaffold so forward can build a full tensor.
    GridSpec out_spec;
    std::vector<VoxelKey> out_keys;
    std::vector<VoxelOrigin> out_origin;
};

// Output scaffold of a stride-2 downsample: the sorted set of parent keys.
// A parent is Original iff any of its children is.
template <class Scalar>
void downsample_out_keys(const SparseTensor<Scalar>& in, std::vector<VoxelKey>& keys,
                         std::vector<VoxelOrigin>& origin) {
    std::map<VoxelKey, VoxelOrigin> acc;
    for (int r = 0; r < in.rows(); ++r) {
        const VoxelKey p = downsample_key(in.keys[size_t(r)]);
        auto [it, fresh] = acc.emplace(p, in.origin[size_t(r)]);
        if (!fresh && in.origin[size_t(r)] == VoxelOrigin::Original) it->second = VoxelOrigin::Original;
    }
    keys.clear();
    origin.clear();
    for (const auto& [k, o] : acc) {
        keys.push_back(k);
        origin.push_back(o);
    }
}

// General form with an explicit output scaffold (the U-Net plans coarse key
// sets that may be supersets of the plain downsample; rows without any active
// input stay at bias).
template <class Scalar>
KernelMap build_kernel_map(const SparseTensor<Scalar>& in, std::span<const VoxelKey> out_keys,
                           std::span<const VoxelOrigin> out_origin, const GridSpec& out_spec,
                           int kernel, int stride) {
    if (out_keys.size() != out_origin.size()) throw ShapeError("build_kernel_map: keys/origin mismatch");
    KernelMap m;
    m.kernel = kernel;
    m.stride = stride;
    m.offsets = window_offsets(kernel, stride);
    m.in_rows = in.rows();
    m.out_spec = out_spec;
    m.out_keys.assign(out_keys.begin(), out_keys.end());
    m.out_origin.assign(out_origin.begin(), out_origin.end());
    m.out_rows = int(m.out_keys.size());
    m.pairs.resize(m.offsets.size());
    for (size_t d = 0; d < m.offsets.size(); ++d) {
        const Offset3& off = m.offsets[d];
        for (int o = 0; o < m.out_rows; ++o) {
            const VoxelKey& ok = m.out_keys[size_t(o)];
            const VoxelKey ik{stride * ok.i + off[0], stride * ok.j + off[1], stride * ok.k + off[2],
                              ok.batch};
            const int ir = in.find_row(ik);
            if (ir >= 0) m.pairs[d].emplace_back(ir, o);
        }
    }
    return m;
}

// Convenience form deriving the output scaffold: stride 1 is submanifold
// (outputs at the input keys), stride 2 outputs at the downsampled key set.
template <class Scalar>
KernelMap build_kernel_map(const SparseTensor<Scalar>& in, int kernel, int stride) {
    if (stride == 1) {
        return build_kernel_map(in, std::span<const VoxelKey>(in.keys),
                                std::span<const VoxelOrigin>(in.origin), in.spec, kernel, stride);
    }
    std::vector<VoxelKey> keys;
    std::vector<VoxelOrigin> origin;
    downsample_out_keys(in, keys, origin);
    return build_kernel_map(in, std::span<const VoxelKey>(keys), std::span<const VoxelOrigin>(origin),
                            in.spec.coarser(), kernel, stride);
}

// Transposed stride-2 convolution: outputs live exactly at the recorded
// finer-level keys. Each fine key f has the unique parent downsample_key(f)
// and kernel offset f - 2*parent, so every output row receives at most one
// pair. Fine keys whose parent is not active stay zero (plus bias).
template <class Scalar>
KernelMap build_upsample_map(const SparseTensor<Scalar>& coarse, std::span<const VoxelKey> fine_keys,
                             std::span<const VoxelOrigin> fine_origin) {
    if (fine_keys.size() != fine_origin.size())
        throw ShapeError("build_upsample_map: keys/origin size mismatch");
    KernelMap m;
    m.kernel = 2;
    m.stride = 2;  // transposed
    m.offsets = window_offsets(2, 2);
    m.in_rows = coarse.rows();
    m.out_spec = coarse.spec.finer();
    m.out_keys.assign(fine_keys.begin(), fine_keys.end());
    m.out_origin.assign(fine_origin.begin(), fine_origin.end());
    m.out_rows = int(m.out_keys.size());
    m.pairs.resize(m.offsets.size());
    for (int o = 0; o < m.out_rows; ++o) {
        const VoxelKey& fk = m.out_keys[size_t(o)];
        const VoxelKey parent = downsample_key(fk);
        const int di = fk.i - 2 * parent.i, dj = fk.j - 2 * parent.j, dk = fk.k - 2 * parent.k;
        const int ir = coarse.find_row({parent.i, parent.j, parent.k, fk.batch});
        if (ir < 0) continue;
        const size_t d = size_t(di * 4 + dj * 2 + dk);
        m.pairs[d].emplace_back(ir, o);
    }
    return m;
}

//============================================================================
// Forward / backward
//============================================================================

// out[o] = bias + sum_d W_d . in[kappa(o,d)] over listed pairs. The weight
// matrix stacks one C_in x C_out block per offset: block d occupies rows
// [d*C_in, (d+1)*C_in). Accumulation order is fixed (offsets in window order,
// pairs sorted by out_row) so results are bit-reproducible.
template <class Scalar>
Matrix<Scalar> conv_forward(const Matrix<Scalar>& in, const KernelMap& map,
                            const Matrix<Scalar>& weights, std::span<const Scalar> bias) {
    if (in.rows != map.in_rows) throw ShapeError("conv_forward: input row mismatch");
    const int cin = in.cols;
    const int cout = int(bias.size());
    if (weights.rows != int(map.offsets.size()) * cin || weights.cols != cout)
        throw ShapeError("conv_forward: weight shape mismatch");
    Matrix<Scalar> out(map.out_rows, cout);
    for (int o = 0; o < map.out_rows; ++o) {
        Scalar* row = out.row(o).data();
        for (int c = 0; c < cout; ++c) row[c] = bias[size_t(c)];
    }
    for (size_t d = 0; d < map.offsets.size(); ++d) {
        const Scalar* w = &weights.data[d * size_t(cin) * size_t(cout)];
        for (const auto& [ir, orow] : map.pairs[d]) {
            const Scalar* src = in.row(ir).data();
            Scalar* dst = out.row(orow).data();
            for (int ci = 0; ci < cin; ++ci) {
                const Scalar x = src[ci];
                if (x == Scalar(0)) continue;
                const Scalar* wrow = w + size_t(ci) * size_t(cout);
                for (int co = 0; co < cout; ++co) dst[co] += x * wrow[co];
            }
        }
    }
    return out;
}

// Exact adjoints of conv_forward. grad_weights/grad_bias are accumulated into
// (callers zero them when starting a fresh backward pass).
template <class Scalar>
Matrix<Scalar> conv_backward(const Matrix<Scalar>& grad_out, const Matrix<Scalar>& in,
                             const KernelMap& map, const Matrix<Scalar>& weights,
                             Matrix<Scalar>& grad_weights, std::span<Scalar> grad_bias) {
    const int cin = in.cols;
    const int cout = grad_out.cols;
    if (grad_out.rows != map.out_rows) throw ShapeError("conv_backward: grad row mismatch");
    if (in.rows != map.in_rows) throw ShapeError("conv_backward: input row mismatch");
    if (!grad_weights.same_shape(weights) || int(grad_bias.size()) != cout)
        throw ShapeError("conv_backward: gradient buffer mismatch");

    for (int o = 0; o < map.out_rows; ++o) {
        const Scalar* g = grad_out.row(o).data();
        for (int c = 0; c < cout; ++c) grad_bias[size_t(c)] += g[c];
    }
    Matrix<Scalar> grad_in(map.in_rows, cin);
    for (size_t d = 0; d < map.offsets.size(); ++d) {
        const Scalar* w = &weights.data[d * size_t(cin) * size_t(cout)];
        Scalar* gw = &grad_weights.data[d * size_t(cin) * size_t(cout)];
        for (const auto& [ir, orow] : map.pairs[d]) {
            const Scalar* x = in.row(ir).data();
            const Scalar* g = grad_out.row(orow).data();
            Scalar* gi = grad_in.row(ir).data();
            for (int ci = 0; ci < cin; ++ci) {
                const Scalar* wrow = w + size_t(ci) * size_t(cout);
                Scalar* gwrow = gw + size_t(ci) * size_t(cout);
                Scalar acc = Scalar(0);
                const Scalar xi = x[ci];
                for (int co = 0; co < cout; ++co) {
                    acc += wrow[co] * g[co];
                    gwrow[co] += xi * g[co];
                }
                gi[ci] += acc;
            }
        }
    }
    return grad_in;
}

}  // namespace voxpad
