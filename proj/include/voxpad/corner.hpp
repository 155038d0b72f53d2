// Copyright Contributors to the voxpad Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>

#include "voxpad/keys.hpp"

namespace voxpad {

// Shared basis of the eight-corner enumeration used by both interpolation
// weights and interpolation-aware padding.
//
// With u = (p - origin) / s, the lower corner per axis is floor(u - 0.5) and
// the upper corner is floor(u + 0.5) = lower + 1. The fractional position
// t = u - (lower + 0.5) lies in [0, 1).
struct CornerBasis {
    std::array<std::int32_t, 3> lower;
    std::array<double, 3> t;
};

inline CornerBasis corner_basis(const Point3& p, const GridSpec& spec) {
    if (!p.finite()) throw InvalidInputError("corner_basis: non-finite point");
    CornerBasis b;
    const double u[3] = {(p.x - spec.origin.x) / spec.voxel_size, (p.y - spec.origin.y) / spec.voxel_size,
                         (p.z - spec.origin.z) / spec.voxel_size};
    for (int a = 0; a < 3; ++a) {
        b.lower[a] = std::int32_t(std::floor(u[a] - 0.5));
        b.t[a] = u[a] - (double(b.lower[a]) + 0.5);
    }
    return b;
}

// Corner order is canonical (-,-,-) .. (+,+,+): index bit 2 selects the x
// choice, bit 1 the y choice, bit 0 the z choice (0 = lower, 1 = upper).
inline std::array<VoxelKey, 8> corner_keys(const CornerBasis& b, std::int32_t batch = 0) {
    std::array<VoxelKey, 8> keys;
    for (int c = 0; c < 8; ++c) {
        keys[c] = {b.lower[0] + ((c >> 2) & 1), b.lower[1] + ((c >> 1) & 1), b.lower[2] + (c & 1), batch};
    }
    return keys;
}

// The eight voxels involved in interpolating at p. The containing voxel is
// always among them; corners with zero weight (exact half-voxel fractions)
// are still enumerated.
inline std::array<VoxelKey, 8> interp_corner_keys(const Point3& p, const GridSpec& spec,
                                                  std::int32_t batch = 0) {
    return corner_keys(corner_basis(p, spec), batch);
}

// Trilinear weight of each corner: product over axes of (1-t) for the lower
// choice and t for the upper. Volumes are normalized by s^3, so the weights
// sum to one for any point.
inline std::array<double, 8> corner_weights(const CornerBasis& b) {
    std::array<double, 8> w;
    for (int c = 0; c < 8; ++c) {
        double v = 1.0;
        v *= ((c >> 2) & 1) ? b.t[0] : 1.0 - b.t[0];
        v *= ((c >> 1) & 1) ? b.t[1] : 1.0 - b.t[1];
        v *= (c & 1) ? b.t[2] : 1.0 - b.t[2];
        w[c] = v;
    }
    return w;
}

}  // namespace voxpad
