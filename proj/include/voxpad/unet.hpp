// Copyright Contributors to the voxpad Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "voxpad/interp.hpp"
#include "voxpad/layers.hpp"
#include "voxpad/padding.hpp"
#include "voxpad/voxelize.hpp"

namespace voxpad {

//============================================================================
// Encoder-decoder over sparse voxels with per-point interpolated output.
//
// Shape, per level ell (0 = finest):
//   stem:    conv3 in->c0, norm, relu                       (level 0)
//   encoder: [down conv2s2 c_ell -> c_{ell+1}, norm, relu,
//             resblocks[ell] x ResBlock]                     for ell = 0..L-2
//   decoder: [transposed conv2s2 -> level ell, norm, relu,
//             concat skip (2*c_ell), resblocks[L-1 + (L-2-ell)] x ResBlock]
//            for ell = L-2 down to s_out
//   head:    interpolate at level s_out, then Linear-ReLU-Linear per point.
//
// All level key sets are planned before the encoder runs, so padding chosen
// for the output level is already part of the downsampling targets, and the
// transposed convolutions output exactly at the recorded finer-level keys.
//============================================================================

enum class PadPlacement { OutputLevelOnly, AllLevels };

struct UNetConfig {
    int levels = 3;
    int in_channels = 4;
    std::vector<int> channels = {16, 24, 32};  // one per level
    std::vector<int> resblocks = {1, 1, 1, 1};  // (levels-1) encoder then (levels-1) decoder entries
    int s_out = 0;
    int head_hidden = 64;
    int classes = 2;
    FeatureMode feature_mode = FeatureMode::Mean;
    PaddingScheme padding = PaddingScheme::interp_aware();
    PadPlacement placement = PadPlacement::OutputLevelOnly;
    InterpMode interp = InterpMode::TrilinearStrict;
    bool norm_include_padded = true;

    void validate() const {
        if (levels < 2) throw InvalidInputError("UNetConfig: need at least 2 levels");
        if (int(channels.size()) != levels) throw InvalidInputError("UNetConfig: channels per level");
        if (int(resblocks.size()) != 2 * (levels - 1))
            throw InvalidInputError("UNetConfig: need (levels-1) encoder + (levels-1) decoder resblock counts");
        for (int c : channels)
            if (c < 1) throw InvalidInputError("UNetConfig: channel counts must be >= 1");
        for (int r : resblocks)
            if (r < 1) throw InvalidInputError("UNetConfig: resblock counts must be >= 1");
        if (s_out < 0 || s_out >= levels) throw InvalidInputError("UNetConfig: s_out out of range");
        if (in_channels < 1 || head_hidden < 1 || classes < 2)
            throw InvalidInputError("UNetConfig: bad head arithmetic");
    }
};

// Key sets of every level, fixed before any convolution runs:
//   A_0     = voxelized keys  (union padding at level 0 when placed there)
//   A_{l+1} = downsample(A_l) (union padding at level l+1 when placed there)
// A key is Original iff it has an original descendant; padding always adds
// Padded keys. Octree/ring padding expands around the original keys of the
// level; interpolation-aware padding takes the corner keys of all points in
// that level's grid.
template <class Scalar>
std::vector<SparseTensor<Scalar>> plan_levels(const SparseTensor<Scalar>& t0,
                                              std::span<const PointCloud> clouds, const UNetConfig& cfg) {
    std::vector<SparseTensor<Scalar>> scaffolds;
    scaffolds.reserve(size_t(cfg.levels));
    std::map<VoxelKey, VoxelOrigin> level;
    for (int r = 0; r < t0.rows(); ++r) level.emplace(t0.keys[size_t(r)], t0.origin[size_t(r)]);

    for (int ell = 0; ell < cfg.levels; ++ell) {
        const GridSpec spec = t0.spec.at_level(ell);
        if (ell > 0) {
            std::map<VoxelKey, VoxelOrigin> coarse;
            for (const auto& [k, o] : level) {
                const VoxelKey p = downsample_key(k);
                auto [it, fresh] = coarse.emplace(p, o);
                if (!fresh && o == VoxelOrigin::Original) it->second = VoxelOrigin::Original;
            }
            level = std::move(coarse);
        }
        const bool pad_here = cfg.padding.kind != PaddingKind::Zero &&
                              (cfg.placement == PadPlacement::AllLevels || ell == cfg.s_out);
        if (pad_here) {
            std::vector<VoxelKey> want;
            if (cfg.padding.kind == PaddingKind::InterpAware) {
                want = interp_key_set(clouds, spec);
            } else {
                std::vector<VoxelKey> seeds;
                for (const auto& [k, o] : level)
                    if (o == VoxelOrigin::Original) seeds.push_back(k);
                want = cfg.padding.kind == PaddingKind::Octree
                           ? octree_key_set(seeds)
                           : ring_key_set(seeds, cfg.padding.ring_n);
            }
            for (const VoxelKey& k : want) level.emplace(k, VoxelOrigin::Padded);
        }
        std::vector<VoxelKey> keys;
        std::vector<VoxelOrigin> origin;
        keys.reserve(level.size());
        for (const auto& [k, o] : level) {
            keys.push_back(k);
            origin.push_back(o);
        }
        scaffolds.push_back(make_sparse_tensor<Scalar>(spec, std::move(keys),
                                                       Matrix<Scalar>(int(level.size()), 0),
                                                       std::move(origin)));
    }
    return scaffolds;
}

template <class Scalar>
class UNet {
  public:
    UNet(UNetConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
        cfg_.validate();
        Rng rng(seed);
        const auto& ch = cfg_.channels;
        stem_ = std::make_unique<SubmanifoldConv<Scalar>>("stem", cfg_.in_channels, ch[0], rng);
        stem_norm_ = std::make_unique<BatchNorm<Scalar>>("stem.norm", ch[0], cfg_.norm_include_padded);
        for (int ell = 0; ell + 1 < cfg_.levels; ++ell) {
            const std::string base = "enc" + std::to_string(ell + 1);
            down_.push_back(std::make_unique<DownConv<Scalar>>(base + ".down", ch[size_t(ell)],
                                                               ch[size_t(ell) + 1], rng));
            down_norm_.push_back(std::make_unique<BatchNorm<Scalar>>(base + ".down_norm",
                                                                     ch[size_t(ell) + 1],
                                                                     cfg_.norm_include_padded));
            down_relu_.emplace_back();
            enc_blocks_.emplace_back();
            for (int b = 0; b < cfg_.resblocks[size_t(ell)]; ++b) {
                enc_blocks_.back().push_back(std::make_unique<ResBlock<Scalar>>(
                    base + ".res" + std::to_string(b), ch[size_t(ell) + 1], ch[size_t(ell) + 1], rng,
                    cfg_.norm_include_padded));
            }
        }
        for (int ell = cfg_.levels - 2; ell >= cfg_.s_out; --ell) {
            const std::string base = "dec" + std::to_string(ell);
            const int s = cfg_.levels - 2 - ell;  // decoder stage index
            up_.push_back(std::make_unique<UpConv<Scalar>>(base + ".up", ch[size_t(ell) + 1],
                                                           ch[size_t(ell)], rng));
            up_norm_.push_back(std::make_unique<BatchNorm<Scalar>>(base + ".up_norm", ch[size_t(ell)],
                                                                   cfg_.norm_include_padded));
            up_relu_.emplace_back();
            dec_blocks_.emplace_back();
            const int count = cfg_.resblocks[size_t(cfg_.levels - 1 + s)];
            for (int b = 0; b < count; ++b) {
                const int cin = b == 0 ? 2 * ch[size_t(ell)] : ch[size_t(ell)];
                dec_blocks_.back().push_back(std::make_unique<ResBlock<Scalar>>(
                    base + ".res" + std::to_string(b), cin, ch[size_t(ell)], rng,
                    cfg_.norm_include_padded));
            }
        }
        head_ = std::make_unique<PointHead<Scalar>>("head", ch[size_t(cfg_.s_out)], cfg_.head_hidden,
                                                    cfg_.classes, rng);
    }

    const UNetConfig& config() const { return cfg_; }

    std::vector<Parameter<Scalar>*> parameters() {
        std::vector<Parameter<Scalar>*> out;
        stem_->collect(out);
        stem_norm_->collect(out);
        for (size_t i = 0; i < down_.size(); ++i) {
            down_[i]->collect(out);
            down_norm_[i]->collect(out);
            for (auto& b : enc_blocks_[i]) b->collect(out);
        }
        for (size_t i = 0; i < up_.size(); ++i) {
            up_[i]->collect(out);
            up_norm_[i]->collect(out);
            for (auto& b : dec_blocks_[i]) b->collect(out);
        }
        head_->collect(out);
        return out;
    }

    BufferList<Scalar> buffers() {
        BufferList<Scalar> out;
        stem_norm_->collect_buffers(out);
        for (size_t i = 0; i < down_.size(); ++i) {
            down_norm_[i]->collect_buffers(out);
            for (auto& b : enc_blocks_[i]) b->collect_buffers(out);
        }
        for (size_t i = 0; i < up_.size(); ++i) {
            up_norm_[i]->collect_buffers(out);
            for (auto& b : dec_blocks_[i]) b->collect_buffers(out);
        }
        return out;
    }

    void zero_grad() {
        for (Parameter<Scalar>* p : parameters()) p->zero_grad();
    }

    // Disable running-stat updates in every norm (used by gradient checking
    // so repeated forwards are pure).
    void set_update_running(bool on) {
        stem_norm_->update_running = on;
        for (auto& n : down_norm_) n->update_running = on;
        for (auto& n : up_norm_) n->update_running = on;
        auto set_block = [on](ResBlock<Scalar>& b) {
            b.norm1.update_running = on;
            b.norm2.update_running = on;
            if (b.proj_norm) b.proj_norm->update_running = on;
        };
        for (auto& stage : enc_blocks_)
            for (auto& b : stage) set_block(*b);
        for (auto& stage : dec_blocks_)
            for (auto& b : stage) set_block(*b);
    }

    // Voxelize, pad, run the network, and interpolate per-point logits for a
    // batch of clouds. Point rows are concatenated in cloud order.
    Matrix<Scalar> forward(std::span<const PointCloud> clouds, const GridSpec& base_spec, bool train) {
        if (clouds.empty()) throw InvalidInputError("UNet: empty batch");
        SparseTensor<Scalar> t0 = voxelize_batch<Scalar>(clouds, base_spec, cfg_.feature_mode);
        if (t0.channels() != cfg_.in_channels)
            throw ShapeError("UNet: voxelized channels " + std::to_string(t0.channels()) +
                             " do not match configured in_channels " + std::to_string(cfg_.in_channels));
        scaffolds_ = plan_levels(t0, clouds, cfg_);
        const SparseTensor<Scalar> x0 = pad_with_keys(t0, scaffolds_[0].keys);

        enc_feats_.assign(size_t(cfg_.levels), Matrix<Scalar>());
        Matrix<Scalar> x = stem_->forward(x0.features, scaffolds_[0], train);
        x = stem_norm_->forward(x, scaffolds_[0], train);
        x = stem_relu_.forward(x, scaffolds_[0], train);
        enc_feats_[0] = x;
        for (int ell = 0; ell + 1 < cfg_.levels; ++ell) {
            x = down_[size_t(ell)]->forward(x, scaffolds_[size_t(ell)], scaffolds_[size_t(ell) + 1]);
            x = down_norm_[size_t(ell)]->forward(x, scaffolds_[size_t(ell) + 1], train);
            x = down_relu_[size_t(ell)].forward(x, scaffolds_[size_t(ell) + 1], train);
            for (auto& b : enc_blocks_[size_t(ell)])
                x = b->forward(x, scaffolds_[size_t(ell) + 1], train);
            enc_feats_[size_t(ell) + 1] = x;
        }
        for (size_t s = 0; s < up_.size(); ++s) {
            const int ell = cfg_.levels - 2 - int(s);
            Matrix<Scalar> u =
                up_[s]->forward(x, scaffolds_[size_t(ell) + 1], scaffolds_[size_t(ell)]);
            u = up_norm_[s]->forward(u, scaffolds_[size_t(ell)], train);
            u = up_relu_[s].forward(u, scaffolds_[size_t(ell)], train);
            x = hconcat(u, enc_feats_[size_t(ell)]);
            for (auto& b : dec_blocks_[s]) x = b->forward(x, scaffolds_[size_t(ell)], train);
        }

        out_features_ = x;
        const SparseTensor<Scalar>& sc = scaffolds_[size_t(cfg_.s_out)];
        out_tensor_ = make_sparse_tensor<Scalar>(sc.spec, sc.keys, x, sc.origin);

        interp_ctx_.assign(clouds.size(), InterpContext{});
        points_per_cloud_.clear();
        Matrix<Scalar> pts;
        for (size_t b = 0; b < clouds.size(); ++b) {
            Matrix<Scalar> f = interpolate_batch(out_tensor_, clouds[b], cfg_.interp, &interp_ctx_[b],
                                                 std::int32_t(b));
            points_per_cloud_.push_back(f.rows);
            pts = b == 0 ? std::move(f) : vconcat_(pts, f);
        }
        return head_->forward(pts);
    }

    // Gradient w.r.t. the logits of the last forward; accumulates parameter
    // gradients. The return value (gradient w.r.t. voxelized input features)
    // is rarely needed but cheap to expose.
    Matrix<Scalar> backward(const Matrix<Scalar>& grad_logits) {
        Matrix<Scalar> g_pts = head_->backward(grad_logits);
        Matrix<Scalar> g_vox(out_tensor_.rows(), out_features_.cols);
        int row = 0;
        for (size_t b = 0; b < interp_ctx_.size(); ++b) {
            const Matrix<Scalar> gb = rows_slice(g_pts, row, row + points_per_cloud_[b]);
            row += points_per_cloud_[b];
            const Matrix<Scalar> gv = interpolate_backward(interp_ctx_[b], gb);
            for (size_t i = 0; i < g_vox.data.size(); ++i) g_vox.data[i] += gv.data[i];
        }

        Matrix<Scalar> x_grad = std::move(g_vox);
        skip_grads_.assign(size_t(cfg_.levels), Matrix<Scalar>());
        for (size_t si = up_.size(); si-- > 0;) {
            const int ell = cfg_.levels - 2 - int(si);
            for (size_t bi = dec_blocks_[si].size(); bi-- > 0;)
                x_grad = dec_blocks_[si][bi]->backward(x_grad);
            const int c = cfg_.channels[size_t(ell)];
            Matrix<Scalar> g_up = cols_slice(x_grad, 0, c);
            skip_grads_[size_t(ell)] = cols_slice(x_grad, c, 2 * c);
            g_up = up_relu_[si].backward(g_up);
            g_up = up_norm_[si]->backward(g_up);
            x_grad = up_[si]->backward(g_up);
        }

        for (int ell = cfg_.levels - 1; ell >= 1; --ell) {
            for (size_t bi = enc_blocks_[size_t(ell) - 1].size(); bi-- > 0;)
                x_grad = enc_blocks_[size_t(ell) - 1][bi]->backward(x_grad);
            x_grad = down_relu_[size_t(ell) - 1].backward(x_grad);
            x_grad = down_norm_[size_t(ell) - 1]->backward(x_grad);
            x_grad = down_[size_t(ell) - 1]->backward(x_grad);
            if (skip_grads_[size_t(ell) - 1].rows > 0) {
                if (!skip_grads_[size_t(ell) - 1].same_shape(x_grad))
                    throw ShapeError("UNet: skip gradient shape mismatch");
                for (size_t i = 0; i < x_grad.data.size(); ++i)
                    x_grad.data[i] += skip_grads_[size_t(ell) - 1].data[i];
            }
        }
        x_grad = stem_relu_.backward(x_grad);
        x_grad = stem_norm_->backward(x_grad);
        return stem_->backward(x_grad);
    }

    // State of the last forward, for inspection and tests.
    const SparseTensor<Scalar>& last_output_tensor() const { return out_tensor_; }
    const std::vector<SparseTensor<Scalar>>& last_scaffolds() const { return scaffolds_; }

  private:
    static Matrix<Scalar> vconcat_(const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
        if (a.cols != b.cols) throw ShapeError("vconcat: column mismatch");
        Matrix<Scalar> out(a.rows + b.rows, a.cols);
        std::copy(a.data.begin(), a.data.end(), out.data.begin());
        std::copy(b.data.begin(), b.data.end(), out.data.begin() + std::ptrdiff_t(a.data.size()));
        return out;
    }

    UNetConfig cfg_;
    std::unique_ptr<SubmanifoldConv<Scalar>> stem_;
    std::unique_ptr<BatchNorm<Scalar>> stem_norm_;
    VoxelReLU<Scalar> stem_relu_;
    std::vector<std::unique_ptr<DownConv<Scalar>>> down_;
    std::vector<std::unique_ptr<BatchNorm<Scalar>>> down_norm_;
    std::vector<VoxelReLU<Scalar>> down_relu_;
    std::vector<std::vector<std::unique_ptr<ResBlock<Scalar>>>> enc_blocks_;
    std::vector<std::unique_ptr<UpConv<Scalar>>> up_;
    std::vector<std::unique_ptr<BatchNorm<Scalar>>> up_norm_;
    std::vector<VoxelReLU<Scalar>> up_relu_;
    std::vector<std::vector<std::unique_ptr<ResBlock<Scalar>>>> dec_blocks_;
    std::unique_ptr<PointHead<Scalar>> head_;

    // caches for backward
    std::vector<SparseTensor<Scalar>> scaffolds_;
    std::vector<Matrix<Scalar>> enc_feats_;
    Matrix<Scalar> out_features_;
    SparseTensor<Scalar> out_tensor_;
    std::vector<InterpContext> interp_ctx_;
    std::vector<int> points_per_cloud_;
    std::vector<Matrix<Scalar>> skip_grads_;
};

// Argmax over logits; ties break to the lowest class index.
template <class Scalar>
std::vector<int> argmax_labels(const Matrix<Scalar>& logits) {
    std::vector<int> out(size_t(logits.rows), 0);
    for (int r = 0; r < logits.rows; ++r) {
        const Scalar* z = logits.row(r).data();
        int best = 0;
        for (int c = 1; c < logits.cols; ++c)
            if (z[c] > z[best]) best = c;
        out[size_t(r)] = best;
    }
    return out;
}

template <class Scalar>
std::vector<int> predict_points(UNet<Scalar>& model, const PointCloud& cloud, const GridSpec& base_spec) {
    const PointCloud* one = &cloud;
    const Matrix<Scalar> logits = model.forward(std::span<const PointCloud>(one, 1), base_spec, false);
    return argmax_labels(logits);
}

}  // namespace voxpad
