// Copyright Contributors to the voxpad Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "voxpad/layers.hpp"
#include "voxpad/rng.hpp"

namespace voxpad {

//============================================================================
// Finite-difference gradient checking (64-bit mode)
//
// Compares analytic parameter gradients against central differences
//   (loss(p+h) - loss(p-h)) / (2h)
// on a seeded subsample of entries per parameter. Relative error uses the
// guarded denominator max(1, |analytic|, |numeric|).
//============================================================================

struct GradCheckEntry {
    std::string param;
    int index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_err = 0.0;
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    int checked = 0;
    GradCheckEntry worst;

    bool pass(double tol) const { return max_rel_err <= tol; }
};

struct GradCheckOptions {
    double h = 1e-5;
    int samples_per_param = 16;  // <=0 checks every entry
    std::uint64_t seed = 7;
};

// `compute_grads()` must zero grads, run forward+backward, and return the
// loss; `forward_loss()` must return the loss without side effects. Both are
// evaluated at the current parameter values.
template <class ComputeGrads, class ForwardLoss>
GradCheckReport grad_check(std::span<Parameter<double>* const> params, ComputeGrads compute_grads,
                           ForwardLoss forward_loss, GradCheckOptions opt = {}) {
    compute_grads();
    Rng rng(opt.seed);
    GradCheckReport rep;
    for (Parameter<double>* p : params) {
        const int n = int(p->value.data.size());
        std::vector<int> idx;
        if (opt.samples_per_param <= 0 || n <= opt.samples_per_param) {
            idx.resize(size_t(n));
            for (int i = 0; i < n; ++i) idx[size_t(i)] = i;
        } else {
            for (int s = 0; s < opt.samples_per_param; ++s) idx.push_back(int(rng.below(std::uint64_t(n))));
        }
        for (int i : idx) {
            const double saved = p->value.data[size_t(i)];
            p->value.data[size_t(i)] = saved + opt.h;
            const double lp = forward_loss();
            p->value.data[size_t(i)] = saved - opt.h;
            const double lm = forward_loss();
            p->value.data[size_t(i)] = saved;
            const double numeric = (lp - lm) / (2.0 * opt.h);
            const double analytic = p->grad.data[size_t(i)];
            const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
            const double rel = std::abs(analytic - numeric) / denom;
            ++rep.checked;
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst = {p->name, i, analytic, numeric, rel};
            }
        }
    }
    return rep;
}

}  // namespace voxpad
