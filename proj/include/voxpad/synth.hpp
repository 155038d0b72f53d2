// Copyright Contributors to the voxpad Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>

#include "voxpad/pointcloud.hpp"
#include "voxpad/rng.hpp"

namespace voxpad {

//============================================================================
// Seed-deterministic synthetic datasets. Every generator is a pure function
// of its arguments; the RNG is the engine's own (bit-stable across
// platforms), so a fixed seed reproduces clouds exactly everywhere.
//============================================================================

// Sub-voxel checkerboard: points uniform in a slab, labeled by the parity of
// sum_axis floor(u_axis / s_label). The slab is extent_cells label cells wide
// in x/y and exactly one cell thick in z, so z never contributes to the
// parity. Trained at voxel size s = 2*s_label, every voxel contains both
// classes in equal measure: the label equals the parity of the sub-voxel
// octant, which no per-voxel-constant predictor can resolve.
//
// Point coordinates are also emitted as per-point features (the usual
// "coordinates as input features" convention), so voxel input features carry
// sub-voxel information for interpolation to exploit.
inline PointCloud synth_subvoxel_checker(int n, double s_label, std::uint64_t seed,
                                         int extent_cells = 16) {
    if (n < 1 || !(s_label > 0.0) || extent_cells < 2)
        throw InvalidInputError("synth_subvoxel_checker: bad arguments");
    Rng rng(seed);
    PointCloud cloud;
    cloud.points.reserve(size_t(n));
    cloud.labels.reserve(size_t(n));
    cloud.features = Matrix<double>(n, 3);
    const double wxy = s_label * double(extent_cells);
    for (int i = 0; i < n; ++i) {
        const double x = rng.uniform(0.0, wxy);
        const double y = rng.uniform(0.0, wxy);
        const double z = rng.uniform(0.0, s_label);
        cloud.points.push_back({x, y, z});
        const long long cell = (long long)std::floor(x / s_label) + (long long)std::floor(y / s_label) +
                               (long long)std::floor(z / s_label);
        cloud.labels.push_back(int(((cell % 2) + 2) % 2));
        cloud.features(i, 0) = x;
        cloud.features(i, 1) = y;
        cloud.features(i, 2) = z;
    }
    cloud.validate();
    return cloud;
}

// Octant bit order used by the sphere labels: bit 2 = (x >= 0), bit 1 =
// (y >= 0), bit 0 = (z >= 0); the (+,+,+) octant is class 7.
inline int octant_class(const Point3& p) {
    return ((p.x >= 0.0) ? 4 : 0) | ((p.y >= 0.0) ? 2 : 0) | ((p.z >= 0.0) ? 1 : 0);
}

// Uniform points on a sphere (normalized Gaussians) with optional radial
// noise; 8 classes, one per octant. Coordinates double as features.
inline PointCloud synth_sphere_octant(int n, std::uint64_t seed, double radius = 1.0,
                                      double noise = 0.0) {
    if (n < 1 || !(radius > 0.0) || noise < 0.0)
        throw InvalidInputError("synth_sphere_octant: bad arguments");
    Rng rng(seed);
    PointCloud cloud;
    cloud.points.reserve(size_t(n));
    cloud.labels.reserve(size_t(n));
    cloud.features = Matrix<double>(n, 3);
    for (int i = 0; i < n; ++i) {
        double x, y, z, norm;
        do {
            x = rng.normal();
            y = rng.normal();
            z = rng.normal();
            norm = std::sqrt(x * x + y * y + z * z);
        } while (norm < 1e-12);
        const double r = radius + (noise > 0.0 ? noise * rng.normal() : 0.0);
        const Point3 p{r * x / norm, r * y / norm, r * z / norm};
        cloud.points.push_back(p);
        cloud.labels.push_back(octant_class(p));
        cloud.features(i, 0) = p.x;
        cloud.features(i, 1) = p.y;
        cloud.features(i, 2) = p.z;
    }
    cloud.validate();
    return cloud;
}

// The disjoint-voxel configuration: two voxel-center points whose keys are at
// Chebyshev distance 2 (so no kernel-3 window connects them), plus one
// interpolation-trigger point inside the first voxel placed off-center so its
// corner set reaches the empty voxel between them. Zero padding leaves a
// 2-voxel tensor; interpolation-aware padding bridges the gap.
inline PointCloud synth_disjoint_pair(double voxel_size = 1.0) {
    if (!(voxel_size > 0.0)) throw InvalidInputError("synth_disjoint_pair: bad voxel size");
    const double s = voxel_size;
    PointCloud cloud;
    cloud.points = {{0.5 * s, 0.5 * s, 0.5 * s},   // center of key (0,0,0)
                    {2.5 * s, 0.5 * s, 0.5 * s},   // center of key (2,0,0)
                    {0.9 * s, 0.5 * s, 0.5 * s}};  // trigger: corners include (1,0,0)
    cloud.labels = {0, 1, 0};
    cloud.features = Matrix<double>(3, 3);
    for (int i = 0; i < 3; ++i) {
        cloud.features(i, 0) = cloud.points[size_t(i)].x;
        cloud.features(i, 1) = cloud.points[size_t(i)].y;
        cloud.features(i, 2) = cloud.points[size_t(i)].z;
    }
    cloud.validate();
    return cloud;
}

//============================================================================
// Task descriptor for the CLI
//============================================================================

enum class SynthKind { SubVoxelChecker, SphereOctant, DisjointPair };

struct SynthTask {
    SynthKind kind = SynthKind::SubVoxelChecker;
    int points = 20000;
    double noise = 0.0;
    double s_label = 0.125;  // checker cell size
    std::uint64_t seed = 1;

    std::string name() const {
        switch (kind) {
            case SynthKind::SubVoxelChecker: return "checker";
            case SynthKind::SphereOctant: return "sphere";
            case SynthKind::DisjointPair: return "disjoint";
        }
        return "?";
    }

    int class_count() const { return kind == SynthKind::SphereOctant ? 8 : 2; }

    PointCloud generate() const {
        switch (kind) {
            case SynthKind::SubVoxelChecker: return synth_subvoxel_checker(points, s_label, seed);
            case SynthKind::SphereOctant: return synth_sphere_octant(points, seed, 1.0, noise);
            case SynthKind::DisjointPair: return synth_disjoint_pair();
        }
        throw InvalidInputError("SynthTask: bad kind");
    }
};

inline SynthKind parse_synth_kind(const std::string& s) {
    if (s == "checker") return SynthKind::SubVoxelChecker;
    if (s == "sphere") return SynthKind::SphereOctant;
    if (s == "disjoint") return SynthKind::DisjointPair;
    throw InvalidInputError("unknown synthetic task '" + s + "'");
}

}  // namespace voxpad
