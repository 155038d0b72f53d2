// Copyright Contributors to the voxpad Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <span>

#include "voxpad/matrix.hpp"
#include "voxpad/error.hpp"

namespace voxpad {

// Mean per-point negative log-softmax. The gradient w.r.t. the logits is
// (softmax - onehot) / n, computed analytically. Log-sum-exp is stabilized by
// the row max.
template <class Scalar>
struct LossResult {
    double loss = 0.0;
    Matrix<Scalar> grad;  // same shape as logits
};

template <class Scalar>
LossResult<Scalar> cross_entropy(const Matrix<Scalar>& logits, std::span<const int> labels) {
    const int n = logits.rows, k = logits.cols;
    if (int(labels.size()) != n) throw ShapeError("cross_entropy: label count mismatch");
    LossResult<Scalar> res;
    res.grad = Matrix<Scalar>(n, k);
    if (n == 0) return res;
    double total = 0.0;
    for (int r = 0; r < n; ++r) {
        const int y = labels[size_t(r)];
        if (y < 0 || y >= k) throw InvalidInputError("cross_entropy: label out of range");
        const Scalar* z = logits.row(r).data();
        double zmax = double(z[0]);
        for (int c = 1; c < k; ++c) zmax = std::max(zmax, double(z[c]));
        double denom = 0.0;
        for (int c = 0; c < k; ++c) denom += std::exp(double(z[c]) - zmax);
        const double log_denom = std::log(denom) + zmax;
        total += log_denom - double(z[y]);
        Scalar* g = res.grad.row(r).data();
        for (int c = 0; c < k; ++c) {
            const double p = std::exp(double(z[c]) - log_denom);
            g[c] = Scalar((p - (c == y ? 1.0 : 0.0)) / double(n));
        }
    }
    res.loss = total / double(n);
    return res;
}

}  // namespace voxpad
