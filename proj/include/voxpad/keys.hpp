// Copyright Contributors to the voxpad Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>

#include "voxpad/error.hpp"

namespace voxpad {

struct Point3 {
    double x = 0.0, y = 0.0, z = 0.0;

    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
};

inline Point3 operator+(Point3 a, Point3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Point3 operator-(Point3 a, Point3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Point3 operator*(double s, Point3 p) { return {s * p.x, s * p.y, s * p.z}; }

// Signed lattice coordinate of one voxel. Keys may be negative: padding and
// corner enumeration near the bounding box step outside [0, extent/s).
// The batch tag keeps scenes apart inside one tensor; no operation ever
// mixes rows with different batch values.
struct VoxelKey {
    std::int32_t i = 0, j = 0, k = 0;
    std::int32_t batch = 0;

    friend bool operator==(const VoxelKey&, const VoxelKey&) = default;

    // Canonical row order: batch-major, then lexicographic (i, j, k).
    friend bool operator<(const VoxelKey& a, const VoxelKey& b) {
        if (a.batch != b.batch) return a.batch < b.batch;
        if (a.i != b.i) return a.i < b.i;
        if (a.j != b.j) return a.j < b.j;
        return a.k < b.k;
    }
};

inline std::ostream& operator<<(std::ostream& os, const VoxelKey& k) {
    os << "(" << k.i << "," << k.j << "," << k.k;
    if (k.batch != 0) os << ";b" << k.batch;
    return os << ")";
}

inline std::string to_string(const VoxelKey& k) {
    std::string s = "(" + std::to_string(k.i) + "," + std::to_string(k.j) + "," + std::to_string(k.k);
    if (k.batch != 0) s += ";b" + std::to_string(k.batch);
    return s + ")";
}

struct VoxelKeyHash {
    std::size_t operator()(const VoxelKey& k) const noexcept {
        std::uint64_t h = 1469598103934665603ull;
        for (std::uint64_t v : {std::uint64_t(std::uint32_t(k.i)), std::uint64_t(std::uint32_t(k.j)),
                                std::uint64_t(std::uint32_t(k.k)), std::uint64_t(std::uint32_t(k.batch))}) {
            h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        }
        return std::size_t(h);
    }
};

// One level of the grid hierarchy. `voxel_size` is the edge length at this
// level; level L has edge length base_size * 2^L, level 0 is the finest.
struct GridSpec {
    Point3 origin;           // minimal corner of the bounding box
    double voxel_size = 1.0; // > 0, world units
    int level = 0;

    GridSpec() = default;
    GridSpec(Point3 o, double s, int lvl = 0) : origin(o), voxel_size(s), level(lvl) {
        if (!(s > 0.0)) throw InvalidInputError("GridSpec: voxel size must be > 0");
        if (lvl < 0) throw InvalidInputError("GridSpec: level must be >= 0");
    }

    GridSpec coarser() const { return GridSpec(origin, voxel_size * 2.0, level + 1); }

    GridSpec finer() const {
        if (level < 1) throw InvalidInputError("GridSpec: already at the finest level");
        return GridSpec(origin, voxel_size * 0.5, level - 1);
    }

    GridSpec at_level(int target) const {
        if (target < level) throw InvalidInputError("GridSpec: cannot refine below own level");
        GridSpec g = *this;
        for (int l = level; l < target; ++l) g = g.coarser();
        return g;
    }
};

inline std::int32_t floor_div2(std::int32_t c) { return c >> 1; }

// Parent key one level up: component-wise floor(c / 2).
inline VoxelKey downsample_key(const VoxelKey& k) {
    return {floor_div2(k.i), floor_div2(k.j), floor_div2(k.k), k.batch};
}

inline VoxelKey downsample_key(VoxelKey k, int times) {
    for (int t = 0; t < times; ++t) k = downsample_key(k);
    return k;
}

// Key of the voxel containing p: floor((p - origin) / s) per axis.
// Points exactly on a voxel boundary belong to the upper voxel.
inline VoxelKey containing_voxel_key(const Point3& p, const GridSpec& spec, std::int32_t batch = 0) {
    if (!p.finite()) throw InvalidInputError("containing_voxel_key: non-finite point");
    const double s = spec.voxel_size;
    return {std::int32_t(std::floor((p.x - spec.origin.x) / s)),
            std::int32_t(std::floor((p.y - spec.origin.y) / s)),
            std::int32_t(std::floor((p.z - spec.origin.z) / s)), batch};
}

inline Point3 voxel_center(const VoxelKey& k, const GridSpec& spec) {
    const double s = spec.voxel_size;
    return {spec.origin.x + s * (double(k.i) + 0.5),
            spec.origin.y + s * (double(k.j) + 0.5),
            spec.origin.z + s * (double(k.k) + 0.5)};
}

inline int chebyshev_distance(const VoxelKey& a, const VoxelKey& b) {
    const int di = std::abs(a.i - b.i);
    const int dj = std::abs(a.j - b.j);
    const int dk = std::abs(a.k - b.k);
    return std::max(di, std::max(dj, dk));
}

}  // namespace voxpad
