// Copyright Contributors to the voxpad Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "voxpad/conv.hpp"
#include "voxpad/rng.hpp"
#include "voxpad/sparse_tensor.hpp"

namespace voxpad {

//============================================================================
// Parameters
//============================================================================

template <class Scalar>
struct Parameter {
    std::string name;
    Matrix<Scalar> value;
    Matrix<Scalar> grad;

    Parameter(std::string n, int rows, int cols) : name(std::move(n)), value(rows, cols), grad(rows, cols) {}

    void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), Scalar(0)); }
    std::size_t size() const { return value.data.size(); }
};

// Fan-in-scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)). Draw order
// is the matrix storage order, so a fixed seed reproduces parameters exactly.
template <class Scalar>
void init_fan_in(Parameter<Scalar>& p, int fan_in, Rng& rng) {
    const double bound = fan_in > 0 ? 1.0 / std::sqrt(double(fan_in)) : 0.0;
    for (Scalar& v : p.value.data) v = Scalar(rng.uniform(-bound, bound));
}

//============================================================================
// Voxel modules
//
// Same-resolution layers over the features of a fixed scaffold (key set +
// origin flags). forward caches whatever backward needs; backward returns the
// gradient w.r.t. the input features and accumulates parameter gradients.
//============================================================================

template <class Scalar>
using BufferList = std::vector<std::pair<std::string, Matrix<Scalar>*>>;

template <class Scalar>
struct VoxelModule {
    virtual ~VoxelModule() = default;
    virtual Matrix<Scalar> forward(const Matrix<Scalar>& x, const SparseTensor<Scalar>& scaffold,
                                   bool train) = 0;
    virtual Matrix<Scalar> backward(const Matrix<Scalar>& grad_out) = 0;
    virtual void collect(std::vector<Parameter<Scalar>*>&) {}
    // non-learned state that still belongs in checkpoints (norm running stats)
    virtual void collect_buffers(BufferList<Scalar>&) {}
};

// Kernel-3 stride-1 submanifold convolution: outputs exist exactly at the
// input's active sites.
template <class Scalar>
struct SubmanifoldConv : VoxelModule<Scalar> {
    int cin, cout;
    Parameter<Scalar> weight;  // [27*cin, cout]
    Parameter<Scalar> bias;    // [1, cout]
    KernelMap map;
    Matrix<Scalar> x_cache;

    SubmanifoldConv(const std::string& name, int cin_, int cout_, Rng& rng)
        : cin(cin_), cout(cout_), weight(name + ".weight", 27 * cin_, cout_), bias(name + ".bias", 1, cout_) {
        init_fan_in(weight, 27 * cin, rng);
        init_fan_in(bias, 27 * cin, rng);
    }

    Matrix<Scalar> forward(const Matrix<Scalar>& x, const SparseTensor<Scalar>& scaffold, bool) override {
        map = build_kernel_map(scaffold, 3, 1);
        x_cache = x;
        return conv_forward(x, map, weight.value, std::span<const Scalar>(bias.value.data));
    }

    Matrix<Scalar> backward(const Matrix<Scalar>& grad_out) override {
        return conv_backward(grad_out, x_cache, map, weight.value, weight.grad,
                             std::span<Scalar>(bias.grad.data));
    }

    void collect(std::vector<Parameter<Scalar>*>& out) override {
        out.push_back(&weight);
        out.push_back(&bias);
    }
};

// Per-channel standardization over the active rows with learned scale/shift.
// Padded voxels are active sites and participate in the statistics by
// default; stats_include_padded=false restricts the statistics to original
// rows (normalization is still applied everywhere).
template <class Scalar>
struct BatchNorm : VoxelModule<Scalar> {
    std::string name;
    int channels;
    Parameter<Scalar> gamma, beta;
    Matrix<Scalar> running_mean, running_var;  // buffers, not parameters
    double eps = 1e-5;
    double momentum = 0.1;
    bool stats_include_padded = true;
    bool update_running = true;  // disabled by gradcheck to keep the loss pure

    // backward context
    Matrix<Scalar> xhat;
    std::vector<Scalar> inv_std, mean;
    std::vector<std::uint8_t> stat_mask;
    std::int64_t stat_count = 0;
    bool trained_pass = false;

    BatchNorm(const std::string& name_, int ch, bool include_padded = true)
        : name(name_), channels(ch), gamma(name_ + ".gamma", 1, ch), beta(name_ + ".beta", 1, ch),
          running_mean(1, ch), running_var(1, ch), stats_include_padded(include_padded) {
        std::fill(gamma.value.data.begin(), gamma.value.data.end(), Scalar(1));
        for (int c = 0; c < ch; ++c) running_var(0, c) = Scalar(1);
    }

    Matrix<Scalar> forward(const Matrix<Scalar>& x, const SparseTensor<Scalar>& scaffold,
                           bool train) override {
        if (x.cols != channels) throw ShapeError("BatchNorm: channel mismatch");
        const int n = x.rows;
        trained_pass = train;
        Matrix<Scalar> y(n, channels);
        if (!train) {
            xhat = Matrix<Scalar>(n, channels);
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < channels; ++c) {
                    const Scalar xh = (x(r, c) - running_mean(0, c)) /
                                      Scalar(std::sqrt(double(running_var(0, c)) + eps));
                    xhat(r, c) = xh;
                    y(r, c) = gamma.value(0, c) * xh + beta.value(0, c);
                }
            return y;
        }
        stat_mask.assign(size_t(n), 1);
        if (!stats_include_padded) {
            if (int(scaffold.origin.size()) != n) throw ShapeError("BatchNorm: scaffold mismatch");
            for (int r = 0; r < n; ++r)
                stat_mask[size_t(r)] = scaffold.origin[size_t(r)] == VoxelOrigin::Original ? 1 : 0;
        }
        stat_count = 0;
        for (auto m : stat_mask) stat_count += m;
        if (stat_count < 2)
            throw InvalidInputError("BatchNorm: training needs >= 2 rows in the statistics set");

        mean.assign(size_t(channels), Scalar(0));
        inv_std.assign(size_t(channels), Scalar(0));
        std::vector<double> mu(size_t(channels), 0.0), var(size_t(channels), 0.0);
        for (int r = 0; r < n; ++r) {
            if (!stat_mask[size_t(r)]) continue;
            const Scalar* row = x.row(r).data();
            for (int c = 0; c < channels; ++c) mu[size_t(c)] += double(row[c]);
        }
        for (int c = 0; c < channels; ++c) mu[size_t(c)] /= double(stat_count);
        for (int r = 0; r < n; ++r) {
            if (!stat_mask[size_t(r)]) continue;
            const Scalar* row = x.row(r).data();
            for (int c = 0; c < channels; ++c) {
                const double d = double(row[c]) - mu[size_t(c)];
                var[size_t(c)] += d * d;
            }
        }
        for (int c = 0; c < channels; ++c) var[size_t(c)] /= double(stat_count);

        xhat = Matrix<Scalar>(n, channels);
        for (int c = 0; c < channels; ++c) {
            mean[size_t(c)] = Scalar(mu[size_t(c)]);
            inv_std[size_t(c)] = Scalar(1.0 / std::sqrt(var[size_t(c)] + eps));
            if (update_running) {
                running_mean(0, c) =
                    Scalar((1.0 - momentum) * double(running_mean(0, c)) + momentum * mu[size_t(c)]);
                running_var(0, c) =
                    Scalar((1.0 - momentum) * double(running_var(0, c)) + momentum * var[size_t(c)]);
            }
        }
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < channels; ++c) {
                xhat(r, c) = (x(r, c) - mean[size_t(c)]) * inv_std[size_t(c)];
                y(r, c) = gamma.value(0, c) * xhat(r, c) + beta.value(0, c);
            }
        return y;
    }

    Matrix<Scalar> backward(const Matrix<Scalar>& grad_out) override {
        const int n = grad_out.rows;
        Matrix<Scalar> gx(n, channels);
        if (!trained_pass) {
            // eval-mode backward: the running stats are constants, so the map
            // is per-row affine; gamma/beta still accumulate their gradients
            if (!grad_out.same_shape(xhat)) throw ShapeError("BatchNorm: backward shape mismatch");
            for (int c = 0; c < channels; ++c) {
                double dgamma = 0.0, dbeta = 0.0;
                const Scalar istd = Scalar(1.0 / std::sqrt(double(running_var(0, c)) + eps));
                for (int r = 0; r < n; ++r) {
                    const double g = double(grad_out(r, c));
                    dgamma += g * double(xhat(r, c));
                    dbeta += g;
                    gx(r, c) = grad_out(r, c) * gamma.value(0, c) * istd;
                }
                gamma.grad(0, c) += Scalar(dgamma);
                beta.grad(0, c) += Scalar(dbeta);
            }
            return gx;
        }
        if (!grad_out.same_shape(xhat)) throw ShapeError("BatchNorm: backward shape mismatch");
        // Standard batch-norm backward, restricted to the statistics set:
        // rows outside it only see the direct gamma/inv_std path.
        const double ns = double(stat_count);
        for (int c = 0; c < channels; ++c) {
            double dgamma = 0.0, dbeta = 0.0;
            for (int r = 0; r < n; ++r) {
                const double g = double(grad_out(r, c));
                dgamma += g * double(xhat(r, c));
                dbeta += g;
            }
            // mean/var gradients accumulate over ALL rows (every output uses
            // mu/sigma) but flow back only into statistics rows.
            double dvar_acc = 0.0, dmu_acc = 0.0;
            const double g_scale = double(gamma.value(0, c));
            const double istd = double(inv_std[size_t(c)]);
            for (int r = 0; r < n; ++r) {
                const double gxh = double(grad_out(r, c)) * g_scale;
                dvar_acc += gxh * double(xhat(r, c));
                dmu_acc += gxh;
            }
            for (int r = 0; r < n; ++r) {
                const double gxh = double(grad_out(r, c)) * g_scale;
                double v = gxh * istd;
                if (stat_mask[size_t(r)]) {
                    v -= istd / ns * (dmu_acc + double(xhat(r, c)) * dvar_acc);
                }
                gx(r, c) = Scalar(v);
            }
            gamma.grad(0, c) += Scalar(dgamma);
            beta.grad(0, c) += Scalar(dbeta);
        }
        return gx;
    }

    void collect(std::vector<Parameter<Scalar>*>& out) override {
        out.push_back(&gamma);
        out.push_back(&beta);
    }

    void collect_buffers(BufferList<Scalar>& out) override {
        out.emplace_back(name + ".running_mean", &running_mean);
        out.emplace_back(name + ".running_var", &running_var);
    }
};

template <class Scalar>
struct VoxelReLU : VoxelModule<Scalar> {
    std::vector<std::uint8_t> mask;

    Matrix<Scalar> forward(const Matrix<Scalar>& x, const SparseTensor<Scalar>&, bool) override {
        Matrix<Scalar> y = x;
        mask.assign(x.data.size(), 0);
        for (size_t i = 0; i < x.data.size(); ++i) {
            if (x.data[i] > Scalar(0))
                mask[i] = 1;
            else
                y.data[i] = Scalar(0);
        }
        return y;
    }

    Matrix<Scalar> backward(const Matrix<Scalar>& grad_out) override {
        if (grad_out.data.size() != mask.size()) throw ShapeError("ReLU: backward shape mismatch");
        Matrix<Scalar> g = grad_out;
        for (size_t i = 0; i < g.data.size(); ++i)
            if (!mask[i]) g.data[i] = Scalar(0);
        return g;
    }
};

// Row-wise linear map y = x W + b (voxel or point features alike).
template <class Scalar>
struct RowLinear {
    Parameter<Scalar> weight, bias;
    Matrix<Scalar> x_cache;

    RowLinear(const std::string& name, int cin, int cout, Rng& rng)
        : weight(name + ".weight", cin, cout), bias(name + ".bias", 1, cout) {
        init_fan_in(weight, cin, rng);
        init_fan_in(bias, cin, rng);
    }

    Matrix<Scalar> forward(const Matrix<Scalar>& x) {
        if (x.cols != weight.value.rows) throw ShapeError("Linear: channel mismatch");
        x_cache = x;
        Matrix<Scalar> y(x.rows, weight.value.cols);
        for (int r = 0; r < x.rows; ++r) {
            const Scalar* xi = x.row(r).data();
            Scalar* yo = y.row(r).data();
            for (int c = 0; c < y.cols; ++c) yo[c] = bias.value(0, c);
            for (int ci = 0; ci < x.cols; ++ci) {
                const Scalar v = xi[ci];
                if (v == Scalar(0)) continue;
                const Scalar* wrow = &weight.value.data[size_t(ci) * size_t(y.cols)];
                for (int c = 0; c < y.cols; ++c) yo[c] += v * wrow[c];
            }
        }
        return y;
    }

    Matrix<Scalar> backward(const Matrix<Scalar>& grad_out) {
        const int cin = weight.value.rows, cout = weight.value.cols;
        if (grad_out.rows != x_cache.rows || grad_out.cols != cout)
            throw ShapeError("Linear: backward shape mismatch");
        Matrix<Scalar> gx(x_cache.rows, cin);
        for (int r = 0; r < grad_out.rows; ++r) {
            const Scalar* g = grad_out.row(r).data();
            const Scalar* xi = x_cache.row(r).data();
            Scalar* gxi = gx.row(r).data();
            for (int c = 0; c < cout; ++c) bias.grad(0, c) += g[c];
            for (int ci = 0; ci < cin; ++ci) {
                const Scalar* wrow = &weight.value.data[size_t(ci) * size_t(cout)];
                Scalar* gwrow = &weight.grad.data[size_t(ci) * size_t(cout)];
                Scalar acc = Scalar(0);
                for (int c = 0; c < cout; ++c) {
                    acc += wrow[c] * g[c];
                    gwrow[c] += xi[ci] * g[c];
                }
                gxi[ci] = acc;
            }
        }
        return gx;
    }

    void collect(std::vector<Parameter<Scalar>*>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }
};

// conv3-norm-relu-conv3-norm plus skip, relu after the addition. When input
// and output channel counts differ the skip goes through a linear projection
// with its own norm. Active key set is untouched (submanifold).
template <class Scalar>
struct ResBlock : VoxelModule<Scalar> {
    int cin, cout;
    SubmanifoldConv<Scalar> conv1, conv2;
    BatchNorm<Scalar> norm1, norm2;
    VoxelReLU<Scalar> relu_mid, relu_out;
    std::unique_ptr<RowLinear<Scalar>> proj;
    std::unique_ptr<BatchNorm<Scalar>> proj_norm;

    ResBlock(const std::string& name, int cin_, int cout_, Rng& rng, bool norm_include_padded = true)
        : cin(cin_), cout(cout_), conv1(name + ".conv1", cin_, cout_, rng),
          conv2(name + ".conv2", cout_, cout_, rng), norm1(name + ".norm1", cout_, norm_include_padded),
          norm2(name + ".norm2", cout_, norm_include_padded) {
        if (cin != cout) {
            proj = std::make_unique<RowLinear<Scalar>>(name + ".proj", cin, cout, rng);
            proj_norm = std::make_unique<BatchNorm<Scalar>>(name + ".proj_norm", cout, norm_include_padded);
        }
    }

    Matrix<Scalar> forward(const Matrix<Scalar>& x, const SparseTensor<Scalar>& scaffold,
                           bool train) override {
        Matrix<Scalar> h = conv1.forward(x, scaffold, train);
        h = norm1.forward(h, scaffold, train);
        h = relu_mid.forward(h, scaffold, train);
        h = conv2.forward(h, scaffold, train);
        h = norm2.forward(h, scaffold, train);
        Matrix<Scalar> skip = x;
        if (proj) {
            skip = proj->forward(x);
            skip = proj_norm->forward(skip, scaffold, train);
        }
        if (!h.same_shape(skip)) throw ShapeError("ResBlock: skip shape mismatch");
        for (size_t i = 0; i < h.data.size(); ++i) h.data[i] += skip.data[i];
        return relu_out.forward(h, scaffold, train);
    }

    Matrix<Scalar> backward(const Matrix<Scalar>& grad_out) override {
        Matrix<Scalar> g = relu_out.backward(grad_out);
        // g splits into the residual branch and the skip branch
        Matrix<Scalar> gr = norm2.backward(g);
        gr = conv2.backward(gr);
        gr = relu_mid.backward(gr);
        gr = norm1.backward(gr);
        gr = conv1.backward(gr);
        Matrix<Scalar> gs = g;
        if (proj) {
            gs = proj_norm->backward(gs);
            gs = proj->backward(gs);
        }
        if (!gr.same_shape(gs)) throw ShapeError("ResBlock: backward shape mismatch");
        for (size_t i = 0; i < gr.data.size(); ++i) gr.data[i] += gs.data[i];
        return gr;
    }

    void collect(std::vector<Parameter<Scalar>*>& out) override {
        conv1.collect(out);
        norm1.collect(out);
        conv2.collect(out);
        norm2.collect(out);
        if (proj) {
            proj->collect(out);
            proj_norm->collect(out);
        }
    }

    void collect_buffers(BufferList<Scalar>& out) override {
        norm1.collect_buffers(out);
        norm2.collect_buffers(out);
        if (proj_norm) proj_norm->collect_buffers(out);
    }
};

//============================================================================
// Resolution-changing convolutions (used by the U-Net between levels)
//============================================================================

// Kernel-2 stride-2 downsampling onto an explicit coarse scaffold; coarse
// rows with no active children stay at bias.
template <class Scalar>
struct DownConv {
    Parameter<Scalar> weight;  // [8*cin, cout]
    Parameter<Scalar> bias;
    KernelMap map;
    Matrix<Scalar> x_cache;

    DownConv(const std::string& name, int cin, int cout, Rng& rng)
        : weight(name + ".weight", 8 * cin, cout), bias(name + ".bias", 1, cout) {
        init_fan_in(weight, 8 * cin, rng);
        init_fan_in(bias, 8 * cin, rng);
    }

    Matrix<Scalar> forward(const Matrix<Scalar>& x, const SparseTensor<Scalar>& fine,
                           const SparseTensor<Scalar>& coarse) {
        map = build_kernel_map(fine, std::span<const VoxelKey>(coarse.keys),
                               std::span<const VoxelOrigin>(coarse.origin), coarse.spec, 2, 2);
        x_cache = x;
        return conv_forward(x, map, weight.value, std::span<const Scalar>(bias.value.data));
    }

    Matrix<Scalar> backward(const Matrix<Scalar>& grad_out) {
        return conv_backward(grad_out, x_cache, map, weight.value, weight.grad,
                             std::span<Scalar>(bias.grad.data));
    }

    void collect(std::vector<Parameter<Scalar>*>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }
};

// Transposed kernel-2 stride-2 upsampling onto the recorded finer scaffold.
template <class Scalar>
struct UpConv {
    Parameter<Scalar> weight;  // [8*cin, cout]
    Parameter<Scalar> bias;
    KernelMap map;
    Matrix<Scalar> x_cache;

    UpConv(const std::string& name, int cin, int cout, Rng& rng)
        : weight(name + ".weight", 8 * cin, cout), bias(name + ".bias", 1, cout) {
        // each fine output sees exactly one coarse parent tap
        init_fan_in(weight, cin, rng);
        init_fan_in(bias, cin, rng);
    }

    Matrix<Scalar> forward(const Matrix<Scalar>& x, const SparseTensor<Scalar>& coarse,
                           const SparseTensor<Scalar>& fine) {
        map = build_upsample_map(coarse, std::span<const VoxelKey>(fine.keys),
                                 std::span<const VoxelOrigin>(fine.origin));
        x_cache = x;
        return conv_forward(x, map, weight.value, std::span<const Scalar>(bias.value.data));
    }

    Matrix<Scalar> backward(const Matrix<Scalar>& grad_out) {
        return conv_backward(grad_out, x_cache, map, weight.value, weight.grad,
                             std::span<Scalar>(bias.grad.data));
    }

    void collect(std::vector<Parameter<Scalar>*>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }
};

//============================================================================
// Point-feature head modules
//============================================================================

template <class Scalar>
struct PointReLU {
    std::vector<std::uint8_t> mask;

    Matrix<Scalar> forward(const Matrix<Scalar>& x) {
        Matrix<Scalar> y = x;
        mask.assign(x.data.size(), 0);
        for (size_t i = 0; i < x.data.size(); ++i) {
            if (x.data[i] > Scalar(0))
                mask[i] = 1;
            else
                y.data[i] = Scalar(0);
        }
        return y;
    }

    Matrix<Scalar> backward(const Matrix<Scalar>& grad_out) {
        if (grad_out.data.size() != mask.size()) throw ShapeError("ReLU: backward shape mismatch");
        Matrix<Scalar> g = grad_out;
        for (size_t i = 0; i < g.data.size(); ++i)
            if (!mask[i]) g.data[i] = Scalar(0);
        return g;
    }
};

// The per-point head: Linear -> ReLU -> Linear over interpolated features.
template <class Scalar>
struct PointHead {
    RowLinear<Scalar> fc1, fc2;
    PointReLU<Scalar> relu;

    PointHead(const std::string& name, int cin, int hidden, int classes, Rng& rng)
        : fc1(name + ".fc1", cin, hidden, rng), fc2(name + ".fc2", hidden, classes, rng) {}

    Matrix<Scalar> forward(const Matrix<Scalar>& x) { return fc2.forward(relu.forward(fc1.forward(x))); }

    Matrix<Scalar> backward(const Matrix<Scalar>& grad_out) {
        return fc1.backward(relu.backward(fc2.backward(grad_out)));
    }

    void collect(std::vector<Parameter<Scalar>*>& out) {
        fc1.collect(out);
        fc2.collect(out);
    }
};

}  // namespace voxpad
