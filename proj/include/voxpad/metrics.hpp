// Copyright Contributors to the voxpad Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <span>
#include <vector>

#include "voxpad/keys.hpp"
#include "voxpad/pointcloud.hpp"

namespace voxpad {

struct SegMetrics {
    // IoU per class index; classes absent from both prediction and ground
    // truth carry -1 and are excluded from the mean.
    std::vector<double> per_class_iou;
    double miou = 0.0;
    double accuracy = 0.0;
};

// Pooled per-class intersection-over-union over point labels.
inline SegMetrics miou(std::span<const int> pred, std::span<const int> gt, int class_count) {
    if (pred.size() != gt.size()) throw ShapeError("miou: length mismatch");
    if (class_count < 1) throw InvalidInputError("miou: bad class count");
    std::vector<long long> inter(size_t(class_count), 0), in_pred(size_t(class_count), 0),
        in_gt(size_t(class_count), 0);
    long long correct = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const int p = pred[i], g = gt[i];
        if (p < 0 || p >= class_count || g < 0 || g >= class_count)
            throw InvalidInputError("miou: label out of range");
        ++in_pred[size_t(p)];
        ++in_gt[size_t(g)];
        if (p == g) {
            ++inter[size_t(p)];
            ++correct;
        }
    }
    SegMetrics m;
    m.per_class_iou.assign(size_t(class_count), -1.0);
    double sum = 0.0;
    int present = 0;
    for (int c = 0; c < class_count; ++c) {
        const long long uni = in_pred[size_t(c)] + in_gt[size_t(c)] - inter[size_t(c)];
        if (uni == 0) continue;  // absent from both sides
        m.per_class_iou[size_t(c)] = double(inter[size_t(c)]) / double(uni);
        sum += m.per_class_iou[size_t(c)];
        ++present;
    }
    m.miou = present > 0 ? sum / double(present) : 0.0;
    m.accuracy = pred.empty() ? 0.0 : double(correct) / double(pred.size());
    return m;
}

// The exact accuracy upper bound of any predictor that is constant within
// each voxel (nearest-neighbor interpolation is one): per containing voxel,
// the majority class count, summed and divided by the point count.
inline double majority_ceiling(const PointCloud& cloud, const GridSpec& spec) {
    if (!cloud.has_labels()) throw InvalidInputError("majority_ceiling: labeled cloud required");
    std::map<VoxelKey, std::map<int, long long>> counts;
    for (size_t i = 0; i < cloud.points.size(); ++i)
        ++counts[containing_voxel_key(cloud.points[i], spec)][cloud.labels[i]];
    long long best_total = 0;
    for (const auto& [key, per_class] : counts) {
        long long best = 0;
        for (const auto& [cls, cnt] : per_class) best = std::max(best, cnt);
        best_total += best;
    }
    return cloud.points.empty() ? 0.0 : double(best_total) / double(cloud.points.size());
}

}  // namespace voxpad
