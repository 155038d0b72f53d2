// Copyright Contributors to the voxpad Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "voxpad/checkpoint.hpp"
#include "voxpad/config.hpp"
#include "voxpad/loss.hpp"
#include "voxpad/metrics.hpp"
#include "voxpad/unet.hpp"

namespace voxpad {

//============================================================================
// Training driver shared by the CLI and the acceptance suite. Everything is
// seed-deterministic: dataset, parameter init, epoch shuffles, and the
// sequential numerics, so identical configs produce bit-identical
// checkpoints and metrics on one platform.
//============================================================================

// Summary statistics of the learned features on padded voxels at the output
// level (they start as zeros and indicator 0; training is expected to move
// them, and to different values per voxel).
struct PaddedFeatureStats {
    int padded_rows = 0;
    double max_channel_variance = 0.0;
    double max_pairwise_diff = 0.0;  // L_inf over feature-vector pairs
};

template <class Scalar>
PaddedFeatureStats padded_feature_stats(const SparseTensor<Scalar>& t) {
    PaddedFeatureStats s;
    std::vector<int> rows;
    for (int r = 0; r < t.rows(); ++r)
        if (t.origin[size_t(r)] == VoxelOrigin::Padded) rows.push_back(r);
    s.padded_rows = int(rows.size());
    if (rows.empty()) return s;
    for (int c = 0; c < t.channels(); ++c) {
        double mean = 0.0;
        for (int r : rows) mean += double(t.features(r, c));
        mean /= double(rows.size());
        double var = 0.0;
        for (int r : rows) {
            const double d = double(t.features(r, c)) - mean;
            var += d * d;
        }
        var /= double(rows.size());
        s.max_channel_variance = std::max(s.max_channel_variance, var);
    }
    for (size_t a = 0; a < rows.size(); ++a) {
        for (size_t b = a + 1; b < rows.size(); ++b) {
            double diff = 0.0;
            for (int c = 0; c < t.channels(); ++c)
                diff = std::max(diff,
                                std::abs(double(t.features(rows[a], c)) - double(t.features(rows[b], c))));
            s.max_pairwise_diff = std::max(s.max_pairwise_diff, diff);
        }
    }
    return s;
}

// Sequential chunks of at most chunk_points points, in the given order.
inline std::vector<PointCloud> chunk_cloud(const PointCloud& cloud, std::span<const int> order,
                                           int chunk_points) {
    std::vector<PointCloud> out;
    const int n = int(order.size());
    for (int start = 0; start < n; start += chunk_points) {
        const int stop = std::min(n, start + chunk_points);
        PointCloud c;
        c.points.reserve(size_t(stop - start));
        if (cloud.has_features()) c.features = Matrix<double>(stop - start, cloud.features.cols);
        for (int i = start; i < stop; ++i) {
            const int src = order[size_t(i)];
            c.points.push_back(cloud.points[size_t(src)]);
            if (cloud.has_labels()) c.labels.push_back(cloud.labels[size_t(src)]);
            if (cloud.has_features())
                for (int f = 0; f < cloud.features.cols; ++f)
                    c.features(int(c.points.size()) - 1, f) = cloud.features(src, f);
        }
        out.push_back(std::move(c));
    }
    return out;
}

template <class Scalar>
struct TrainResult {
    std::unique_ptr<UNet<Scalar>> model;
    GridSpec spec;
    PointCloud test_cloud;
    std::vector<int> test_pred;
    SegMetrics test_metrics;
    double ceiling = 0.0;  // majority ceiling of the test cloud at the training voxel size
    double final_epoch_loss = 0.0;
    std::size_t parameter_count = 0;
    PaddedFeatureStats padded_stats;
    Checkpoint<Scalar> checkpoint;
};

// The companion test cloud uses a seed derived from the training seed so the
// two sets are disjoint but still a pure function of the config.
inline std::uint64_t test_seed_of(std::uint64_t train_seed) {
    return train_seed * 0x9E3779B97F4A7C15ull + 0x6b43a9b5ull;
}

template <class Scalar>
std::vector<int> evaluate_model(UNet<Scalar>& model, const PointCloud& cloud, const GridSpec& spec) {
    const PointCloud* one = &cloud;
    const Matrix<Scalar> logits = model.forward(std::span<const PointCloud>(one, 1), spec, false);
    return argmax_labels(logits);
}

template <class Scalar>
TrainResult<Scalar> run_training(const RunConfig& cfg) {
    cfg.validate();
    TrainResult<Scalar> res;
    res.spec = cfg.grid_spec();

    SynthTask train_task = cfg.synth_task();
    SynthTask test_task = train_task;
    test_task.points = cfg.test_points;
    test_task.seed = test_seed_of(cfg.seed);
    const PointCloud train_cloud = train_task.generate();
    res.test_cloud = test_task.generate();

    res.model = std::make_unique<UNet<Scalar>>(cfg.unet_config(), cfg.seed);
    const TrainConfig tc = cfg.train_config();
    SgdOptimizer<Scalar> opt(res.model->parameters(), tc);
    for (const Parameter<Scalar>* p : opt.params()) res.parameter_count += p->size();

    const int n = int(train_cloud.points.size());
    std::vector<int> order(static_cast<size_t>(n));
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        for (int i = 0; i < n; ++i) order[size_t(i)] = i;
        Rng shuffle_rng(cfg.seed * 0x100000001b3ull + std::uint64_t(epoch) + 1);
        shuffle_rng.shuffle(order);
        const std::vector<PointCloud> chunks = chunk_cloud(train_cloud, order, cfg.points_per_cloud);

        double epoch_loss = 0.0;
        int batches = 0;
        for (size_t b0 = 0; b0 < chunks.size(); b0 += size_t(tc.batch_size)) {
            const size_t b1 = std::min(chunks.size(), b0 + size_t(tc.batch_size));
            const std::span<const PointCloud> batch(chunks.data() + b0, b1 - b0);
            opt.zero_grad();
            const Matrix<Scalar> logits = res.model->forward(batch, res.spec, true);
            std::vector<int> labels;
            for (const PointCloud& c : batch) labels.insert(labels.end(), c.labels.begin(), c.labels.end());
            const LossResult<Scalar> loss = cross_entropy(logits, std::span<const int>(labels));
            if (!std::isfinite(loss.loss)) throw NumericalError("training: non-finite loss");
            res.model->backward(loss.grad);
            opt.step(epoch);
            epoch_loss += loss.loss;
            ++batches;
        }
        res.final_epoch_loss = batches > 0 ? epoch_loss / double(batches) : 0.0;
    }

    res.test_pred = evaluate_model(*res.model, res.test_cloud, res.spec);
    res.test_metrics =
        miou(std::span<const int>(res.test_pred), std::span<const int>(res.test_cloud.labels),
             cfg.synth_task().class_count());
    res.ceiling = majority_ceiling(res.test_cloud, res.spec);
    res.padded_stats = padded_feature_stats(res.model->last_output_tensor());

    res.checkpoint.config_text = cfg.resolved_text();
    for (const Parameter<Scalar>* p : res.model->parameters())
        res.checkpoint.arrays.emplace_back(p->name, p->value);
    for (const auto& [name, buf] : res.model->buffers()) res.checkpoint.arrays.emplace_back(name, *buf);
    return res;
}

// Restores parameters and norm buffers by exact name; every stored array must
// land somewhere and every model array must be filled.
template <class Scalar>
void load_into_model(UNet<Scalar>& model, const Checkpoint<Scalar>& ckpt) {
    std::size_t used = 0;
    for (Parameter<Scalar>* p : model.parameters()) {
        const Matrix<Scalar>* src = ckpt.find(p->name);
        if (!src) throw InvalidInputError("checkpoint: missing array '" + p->name + "'");
        if (!src->same_shape(p->value)) throw ShapeError("checkpoint: shape mismatch for '" + p->name + "'");
        p->value = *src;
        ++used;
    }
    for (auto& [name, buf] : model.buffers()) {
        const Matrix<Scalar>* src = ckpt.find(name);
        if (!src) throw InvalidInputError("checkpoint: missing array '" + name + "'");
        if (!src->same_shape(*buf)) throw ShapeError("checkpoint: shape mismatch for '" + name + "'");
        *buf = *src;
        ++used;
    }
    if (used != ckpt.arrays.size())
        throw InvalidInputError("checkpoint: " + std::to_string(ckpt.arrays.size() - used) +
                                " stored arrays were not consumed by the model");
}

}  // namespace voxpad
