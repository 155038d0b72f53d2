// Copyright Contributors to the voxpad Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdio>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "voxpad/corner.hpp"
#include "voxpad/pointcloud.hpp"
#include "voxpad/sparse_tensor.hpp"

namespace voxpad {

//============================================================================
// Padding schemes
//============================================================================

enum class PaddingKind { Zero, Octree, Ring, InterpAware };

struct PaddingScheme {
    PaddingKind kind = PaddingKind::Zero;
    int ring_n = 1;  // only meaningful for Ring

    static PaddingScheme zero() { return {PaddingKind::Zero, 1}; }
    static PaddingScheme octree() { return {PaddingKind::Octree, 1}; }
    static PaddingScheme ring(int n) {
        if (n < 1) throw InvalidInputError("PaddingScheme: ring N must be >= 1");
        return {PaddingKind::Ring, n};
    }
    static PaddingScheme interp_aware() { return {PaddingKind::InterpAware, 1}; }

    std::string name() const {
        switch (kind) {
            case PaddingKind::Zero: return "zero";
            case PaddingKind::Octree: return "octree";
            case PaddingKind::Ring: return "ring" + std::to_string(ring_n);
            case PaddingKind::InterpAware: return "interp";
        }
        return "?";
    }
};

// Accepts "zero", "octree", "interp" (or "interp_aware"), "ring" and "ringN".
inline PaddingScheme parse_padding_scheme(const std::string& s) {
    if (s == "zero") return PaddingScheme::zero();
    if (s == "octree") return PaddingScheme::octree();
    if (s == "interp" || s == "interp_aware") return PaddingScheme::interp_aware();
    if (s.rfind("ring", 0) == 0) {
        std::string tail = s.substr(4);
        if (tail.empty()) return PaddingScheme::ring(1);
        try {
            size_t used = 0;
            int n = std::stoi(tail, &used);
            if (used == tail.size()) return PaddingScheme::ring(n);
        } catch (const std::exception&) {
        }
    }
    throw InvalidInputError("unknown padding scheme '" + s + "'");
}

//============================================================================
// Key-set construction
//
// The set-level functions are the substance of every scheme; the tensor-level
// pads below just materialize zero rows. They are also used on bare key sets
// when planning coarser U-Net levels.
//============================================================================

// All keys within Chebyshev distance n of a seed key (including the seed).
inline std::vector<VoxelKey> ring_key_set(std::span<const VoxelKey> seeds, int n) {
    if (n < 1) throw InvalidInputError("ring_key_set: N must be >= 1");
    std::set<VoxelKey> out;
    for (const VoxelKey& k : seeds) {
        for (int di = -n; di <= n; ++di)
            for (int dj = -n; dj <= n; ++dj)
                for (int dk = -n; dk <= n; ++dk) out.insert({k.i + di, k.j + dj, k.k + dk, k.batch});
    }
    return {out.begin(), out.end()};
}

// All 8 siblings (same downsample parent) of every seed key.
inline std::vector<VoxelKey> octree_key_set(std::span<const VoxelKey> seeds) {
    std::set<VoxelKey> out;
    for (const VoxelKey& k : seeds) {
        const VoxelKey parent = downsample_key(k);
        for (int c = 0; c < 8; ++c) {
            out.insert({2 * parent.i + ((c >> 2) & 1), 2 * parent.j + ((c >> 1) & 1),
                        2 * parent.k + (c & 1), k.batch});
        }
    }
    return {out.begin(), out.end()};
}

// Union of the 8 interpolation corners over all points of one cloud.
inline std::vector<VoxelKey> interp_key_set(std::span<const Point3> points, const GridSpec& spec,
                                            std::int32_t batch = 0) {
    std::set<VoxelKey> out;
    for (const Point3& p : points) {
        for (const VoxelKey& k : interp_corner_keys(p, spec, batch)) out.insert(k);
    }
    return {out.begin(), out.end()};
}

inline std::vector<VoxelKey> interp_key_set(std::span<const PointCloud> clouds, const GridSpec& spec) {
    std::set<VoxelKey> out;
    for (std::size_t b = 0; b < clouds.size(); ++b) {
        for (const Point3& p : clouds[b].points) {
            for (const VoxelKey& k : interp_corner_keys(p, spec, std::int32_t(b))) out.insert(k);
        }
    }
    return {out.begin(), out.end()};
}

//============================================================================
// Tensor-level padding
//============================================================================

// Append the keys of `want` that are absent from t, as zero-feature rows
// flagged Padded (indicator channel therefore reads 0), then re-canonicalize.
// Original rows are copied byte-identically.
template <class Scalar>
SparseTensor<Scalar> pad_with_keys(const SparseTensor<Scalar>& t, std::span<const VoxelKey> want) {
    std::vector<VoxelKey> keys = t.keys;
    std::vector<VoxelOrigin> origin = t.origin;
    std::vector<VoxelKey> fresh;
    for (const VoxelKey& k : want) {
        if (!t.contains(k)) fresh.push_back(k);
    }
    std::sort(fresh.begin(), fresh.end());
    fresh.erase(std::unique(fresh.begin(), fresh.end()), fresh.end());

    Matrix<Scalar> feat(int(t.rows() + fresh.size()), t.channels());
    std::copy(t.features.data.begin(), t.features.data.end(), feat.data.begin());
    for (const VoxelKey& k : fresh) {
        keys.push_back(k);
        origin.push_back(VoxelOrigin::Padded);
    }
    return make_sparse_tensor<Scalar>(t.spec, std::move(keys), std::move(feat), std::move(origin));
}

template <class Scalar>
std::vector<VoxelKey> original_keys(const SparseTensor<Scalar>& t) {
    std::vector<VoxelKey> out;
    out.reserve(t.rows());
    for (int r = 0; r < t.rows(); ++r) {
        if (t.origin[size_t(r)] == VoxelOrigin::Original) out.push_back(t.keys[size_t(r)]);
    }
    return out;
}

template <class Scalar>
SparseTensor<Scalar> pad_zero(const SparseTensor<Scalar>& t) {
    return t;  // zero padding adds no voxels; absent corners read as zero downstream
}

template <class Scalar>
SparseTensor<Scalar> pad_ring(const SparseTensor<Scalar>& t, int n) {
    const std::vector<VoxelKey> seeds = original_keys(t);
    return pad_with_keys(t, ring_key_set(seeds, n));
}

template <class Scalar>
SparseTensor<Scalar> pad_octree(const SparseTensor<Scalar>& t) {
    const std::vector<VoxelKey> seeds = original_keys(t);
    return pad_with_keys(t, octree_key_set(seeds));
}

template <class Scalar>
SparseTensor<Scalar> pad_interp_aware(const SparseTensor<Scalar>& t, const PointCloud& cloud,
                                      std::int32_t batch = 0) {
    return pad_with_keys(t, interp_key_set(std::span<const Point3>(cloud.points), t.spec, batch));
}

template <class Scalar>
SparseTensor<Scalar> pad_interp_aware(const SparseTensor<Scalar>& t, std::span<const PointCloud> clouds) {
    return pad_with_keys(t, interp_key_set(clouds, t.spec));
}

template <class Scalar>
SparseTensor<Scalar> apply_padding(const SparseTensor<Scalar>& t, const PaddingScheme& scheme,
                                   std::span<const PointCloud> clouds) {
    switch (scheme.kind) {
        case PaddingKind::Zero: return pad_zero(t);
        case PaddingKind::Octree: return pad_octree(t);
        case PaddingKind::Ring: return pad_ring(t, scheme.ring_n);
        case PaddingKind::InterpAware: return pad_interp_aware(t, clouds);
    }
    throw InvalidInputError("apply_padding: bad scheme");
}

//============================================================================
// Reporting
//============================================================================

struct PaddingReport {
    std::int64_t original_count = 0;  // M, the non-empty voxel count
    std::int64_t padded_count = 0;
    std::int64_t total = 0;
    double ratio = 0.0;  // padded_count / M
};

template <class Scalar>
PaddingReport padding_stats(const SparseTensor<Scalar>& before, const SparseTensor<Scalar>& after) {
    for (const VoxelKey& k : original_keys(before)) {
        if (!after.contains(k)) throw InvalidInputError("padding_stats: original key missing after padding");
    }
    PaddingReport r;
    r.original_count = std::int64_t(after.original_count());
    r.total = after.rows();
    r.padded_count = r.total - r.original_count;
    r.ratio = r.original_count > 0 ? double(r.padded_count) / double(r.original_count) : 0.0;
    return r;
}

inline constexpr const char* kPaddingCsvHeader = "scheme,voxel_size,M,padded,total,ratio";

inline std::string padding_csv_row(const PaddingScheme& scheme, double voxel_size,
                                   const PaddingReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%lld,%lld,%lld,%.17g", scheme.name().c_str(), voxel_size,
                  (long long)r.original_count, (long long)r.padded_count, (long long)r.total, r.ratio);
    return buf;
}

}  // namespace voxpad
