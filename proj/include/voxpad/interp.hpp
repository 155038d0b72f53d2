// Copyright Contributors to the voxpad Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "voxpad/corner.hpp"
#include "voxpad/pointcloud.hpp"
#include "voxpad/sparse_tensor.hpp"

namespace voxpad {

//============================================================================
// Point-feature extraction
//
// f(x,y,z) = sum_ijk I_ijk vol_ijk f_ijk / sum_ijk I_ijk vol_ijk with the
// volumes normalized by s^3 so they sum to one. The four modes differ in how
// missing corners (I = 0) are treated.
//============================================================================

enum class InterpMode { Nearest, TrilinearZeroFill, TrilinearNormalized, TrilinearStrict };

inline std::string interp_mode_name(InterpMode m) {
    switch (m) {
        case InterpMode::Nearest: return "nearest";
        case InterpMode::TrilinearZeroFill: return "zerofill";
        case InterpMode::TrilinearNormalized: return "normalized";
        case InterpMode::TrilinearStrict: return "strict";
    }
    return "?";
}

inline InterpMode parse_interp_mode(const std::string& s) {
    if (s == "nearest") return InterpMode::Nearest;
    if (s == "zerofill") return InterpMode::TrilinearZeroFill;
    if (s == "normalized") return InterpMode::TrilinearNormalized;
    if (s == "strict") return InterpMode::TrilinearStrict;
    throw InvalidInputError("unknown interpolation mode '" + s + "'");
}

struct MissingCornerError : Error {
    using Error::Error;
};

// The 8 corners of one query point: canonical-order keys, trilinear weights,
// and presence bits (filled in against a target tensor).
struct CornerSet {
    std::array<VoxelKey, 8> keys;
    std::array<double, 8> weights;
    std::array<bool, 8> present{};
    std::array<int, 8> rows{};  // row in the tensor, -1 when absent
};

inline CornerSet trilinear_weights(const Point3& p, const GridSpec& spec, std::int32_t batch = 0) {
    const CornerBasis b = corner_basis(p, spec);
    CornerSet cs;
    cs.keys = corner_keys(b, batch);
    cs.weights = corner_weights(b);
    cs.present.fill(false);
    cs.rows.fill(-1);
    return cs;
}

template <class Scalar>
CornerSet corner_set_for(const SparseTensor<Scalar>& t, const Point3& p, std::int32_t batch = 0) {
    CornerSet cs = trilinear_weights(p, t.spec, batch);
    for (int c = 0; c < 8; ++c) {
        cs.rows[size_t(c)] = t.find_row(cs.keys[size_t(c)]);
        cs.present[size_t(c)] = cs.rows[size_t(c)] >= 0;
    }
    return cs;
}

namespace detail {

inline std::string missing_corner_message(const CornerSet& cs) {
    std::string msg = "missing interpolation corners:";
    for (int c = 0; c < 8; ++c) {
        if (!cs.present[size_t(c)]) msg += " " + to_string(cs.keys[size_t(c)]);
    }
    return msg;
}

// Writes the interpolated feature of one corner set into out[0..channels).
// Trilinear modes only; Nearest is handled by the callers. Normalization is
// baked into the weights before accumulating, matching the batch path bit for
// bit (the cached backward relies on the same formulation).
template <class Scalar>
void interp_row(const SparseTensor<Scalar>& t, const CornerSet& cs, InterpMode mode, Scalar* out) {
    const int ch = t.channels();
    for (int c = 0; c < ch; ++c) out[c] = Scalar(0);

    std::array<double, 8> w = cs.weights;
    if (mode == InterpMode::TrilinearNormalized) {
        double denom = 0.0;
        for (int c = 0; c < 8; ++c)
            if (cs.present[size_t(c)]) denom += w[size_t(c)];
        if (denom <= 0.0) throw NumericalError("normalized interpolation: degenerate denominator");
        for (int c = 0; c < 8; ++c) w[size_t(c)] /= denom;
    }
    for (int c = 0; c < 8; ++c) {
        if (!cs.present[size_t(c)]) continue;
        const Scalar* row = t.features.row(cs.rows[size_t(c)]).data();
        for (int ch_i = 0; ch_i < ch; ++ch_i) out[ch_i] += Scalar(w[size_t(c)]) * row[ch_i];
    }
}

}  // namespace detail

template <class Scalar>
std::vector<Scalar> interpolate(const SparseTensor<Scalar>& t, const Point3& p, InterpMode mode,
                                std::int32_t batch = 0) {
    std::vector<Scalar> out(size_t(t.channels()), Scalar(0));
    if (mode == InterpMode::Nearest) {
        const VoxelKey k = containing_voxel_key(p, t.spec, batch);
        const int row = t.find_row(k);
        if (row < 0) throw InvalidInputError("nearest interpolation: containing voxel " + to_string(k) + " absent");
        const auto src = t.features.row(row);
        std::copy(src.begin(), src.end(), out.begin());
        return out;
    }
    const CornerSet cs = corner_set_for(t, p, batch);
    if (mode == InterpMode::TrilinearStrict) {
        for (int c = 0; c < 8; ++c) {
            if (!cs.present[size_t(c)]) throw MissingCornerError(detail::missing_corner_message(cs));
        }
    }
    detail::interp_row(t, cs, mode, out.data());
    return out;
}

// Cached corner sets of a batched interpolation; reusing them makes the
// backward pass the exact adjoint of the forward.
struct InterpContext {
    std::vector<CornerSet> corners;  // one per point, Nearest uses rows[0]
    InterpMode mode = InterpMode::TrilinearStrict;
    int tensor_rows = 0;
    int channels = 0;
};

template <class Scalar>
Matrix<Scalar> interpolate_batch(const SparseTensor<Scalar>& t, const PointCloud& cloud, InterpMode mode,
                                 InterpContext* ctx = nullptr, std::int32_t batch = 0) {
    const int n = int(cloud.points.size());
    const int ch = t.channels();
    Matrix<Scalar> out(n, ch);
    if (ctx) {
        ctx->corners.clear();
        ctx->corners.reserve(size_t(n));
        ctx->mode = mode;
        ctx->tensor_rows = t.rows();
        ctx->channels = ch;
    }
    for (int i = 0; i < n; ++i) {
        const Point3& p = cloud.points[size_t(i)];
        if (mode == InterpMode::Nearest) {
            const VoxelKey k = containing_voxel_key(p, t.spec, batch);
            const int row = t.find_row(k);
            if (row < 0)
                throw InvalidInputError("nearest interpolation: containing voxel " + to_string(k) + " absent");
            const auto src = t.features.row(row);
            std::copy(src.begin(), src.end(), out.row(i).begin());
            if (ctx) {
                CornerSet cs{};
                cs.weights.fill(0.0);
                cs.present.fill(false);
                cs.rows.fill(-1);
                cs.keys.fill(k);
                cs.rows[0] = row;
                cs.present[0] = true;
                cs.weights[0] = 1.0;
                ctx->corners.push_back(cs);
            }
            continue;
        }
        CornerSet cs = corner_set_for(t, p, batch);
        if (mode == InterpMode::TrilinearStrict) {
            for (int c = 0; c < 8; ++c) {
                if (!cs.present[size_t(c)]) throw MissingCornerError(detail::missing_corner_message(cs));
            }
        }
        if (mode == InterpMode::TrilinearNormalized) {
            // Bake the renormalization into the cached weights so backward is
            // a plain weighted scatter.
            double denom = 0.0;
            for (int c = 0; c < 8; ++c)
                if (cs.present[size_t(c)]) denom += cs.weights[size_t(c)];
            if (denom <= 0.0) throw NumericalError("normalized interpolation: degenerate denominator");
            for (int c = 0; c < 8; ++c) cs.weights[size_t(c)] /= denom;
        }
        Scalar* dst = out.row(i).data();
        for (int c = 0; c < 8; ++c) {
            if (!cs.present[size_t(c)]) continue;
            const Scalar w = Scalar(cs.weights[size_t(c)]);
            const Scalar* src = t.features.row(cs.rows[size_t(c)]).data();
            for (int ch_i = 0; ch_i < ch; ++ch_i) dst[ch_i] += w * src[ch_i];
        }
        if (ctx) ctx->corners.push_back(cs);
    }
    return out;
}

// Adjoint of interpolate_batch: scatter point gradients back to corner rows
// with the cached weights. Accumulation order is the fixed point order, so
// the result is deterministic.
template <class Scalar>
Matrix<Scalar> interpolate_backward(const InterpContext& ctx, const Matrix<Scalar>& grad_out) {
    if (grad_out.rows != int(ctx.corners.size()) || grad_out.cols != ctx.channels)
        throw ShapeError("interpolate_backward: gradient shape mismatch");
    Matrix<Scalar> grad_in(ctx.tensor_rows, ctx.channels);
    for (size_t i = 0; i < ctx.corners.size(); ++i) {
        const CornerSet& cs = ctx.corners[i];
        const Scalar* g = grad_out.row(int(i)).data();
        for (int c = 0; c < 8; ++c) {
            if (!cs.present[size_t(c)]) continue;
            const Scalar w = Scalar(cs.weights[size_t(c)]);
            Scalar* dst = grad_in.row(cs.rows[size_t(c)]).data();
            for (int ch_i = 0; ch_i < ctx.channels; ++ch_i) dst[ch_i] += w * g[ch_i];
        }
    }
    return grad_in;
}

}  // namespace voxpad
