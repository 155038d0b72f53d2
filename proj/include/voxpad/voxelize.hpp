// Copyright Contributors to the voxpad Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <map>
#include <span>
#include <vector>

#include "voxpad/pointcloud.hpp"
#include "voxpad/sparse_tensor.hpp"

namespace voxpad {

enum class FeatureMode {
    Mean,       // per-voxel mean of the cloud's per-point features
    Occupancy,  // single all-ones channel
};

// One row per distinct containing key. A trailing indicator channel is always
// appended: 1 for original non-empty voxels, 0 later for padded ones.
//
// Per-voxel means are accumulated over the contained points sorted by value
// (coordinates, then features, then label), not by input position, so the
// result is exactly permutation-invariant.
template <class S>
SparseTensor<S> voxelize(const PointCloud& cloud, const GridSpec& spec, FeatureMode mode,
                         std::int32_t batch = 0) {
    cloud.validate();
    if (cloud.points.empty()) throw InvalidInputError("voxelize: empty point cloud");
    if (mode == FeatureMode::Mean && !cloud.has_features())
        throw InvalidInputError("voxelize: mean feature mode requires per-point features");

    std::map<VoxelKey, std::vector<int>> buckets;  // ordered: canonical rows for free
    for (std::size_t n = 0; n < cloud.points.size(); ++n)
        buckets[containing_voxel_key(cloud.points[n], spec, batch)].push_back(int(n));

    const int base_channels = (mode == FeatureMode::Mean) ? cloud.features.cols : 1;
    const int channels = base_channels + 1;  // + indicator

    auto point_less = [&](int a, int b) {
        const Point3 &pa = cloud.points[a], &pb = cloud.points[b];
        if (pa.x != pb.x) return pa.x < pb.x;
        if (pa.y != pb.y) return pa.y < pb.y;
        if (pa.z != pb.z) return pa.z < pb.z;
        if (cloud.has_features())
            for (int c = 0; c < cloud.features.cols; ++c)
                if (cloud.features(a, c) != cloud.features(b, c)) return cloud.features(a, c) < cloud.features(b, c);
        if (cloud.has_labels() && cloud.labels[a] != cloud.labels[b]) return cloud.labels[a] < cloud.labels[b];
        return false;
    };

    SparseTensor<S> t;
    t.spec = spec;
    t.keys.reserve(buckets.size());
    t.features = Matrix<S>(int(buckets.size()), channels);
    t.origin.assign(buckets.size(), VoxelOrigin::Original);

    int r = 0;
    for (auto& [key, members] : buckets) {
        t.keys.push_back(key);
        if (mode == FeatureMode::Mean) {
            std::sort(members.begin(), members.end(), point_less);
            for (int c = 0; c < base_channels; ++c) {
                double acc = 0.0;
                for (int n : members) acc += cloud.features(n, c);
                t.features(r, c) = S(acc / double(members.size()));
            }
        } else {
            t.features(r, 0) = S(1);
        }
        t.features(r, channels - 1) = S(1);  // indicator: original
        ++r;
    }
    t.rebuild_index();
    return t;
}

// Batched variant: one batch tag per cloud, shared grid spec. Convolutions
// never mix batches, so this is equivalent to per-cloud processing.
template <class S>
SparseTensor<S> voxelize_batch(std::span<const PointCloud> clouds, const GridSpec& spec, FeatureMode mode) {
    if (clouds.empty()) throw InvalidInputError("voxelize_batch: no clouds");
    std::vector<VoxelKey> keys;
    std::vector<VoxelOrigin> origin;
    Matrix<S> features;
    for (std::size_t b = 0; b < clouds.size(); ++b) {
        SparseTensor<S> t = voxelize<S>(clouds[b], spec, mode, std::int32_t(b));
        if (b == 0) {
            features = Matrix<S>(0, t.channels());
        } else if (t.channels() != features.cols) {
            throw ShapeError("voxelize_batch: clouds disagree on channel count");
        }
        keys.insert(keys.end(), t.keys.begin(), t.keys.end());
        origin.insert(origin.end(), t.origin.begin(), t.origin.end());
        features.data.insert(features.data.end(), t.features.data.begin(), t.features.data.end());
        features.rows += t.features.rows;
    }
    return make_sparse_tensor<S>(spec, std::move(keys), std::move(features), std::move(origin));
}

}  // namespace voxpad
