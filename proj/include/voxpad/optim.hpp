// Copyright Contributors to the voxpad Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "voxpad/layers.hpp"

namespace voxpad {

enum class LrSchedule { StepDecay, Constant };

struct TrainConfig {
    double learning_rate = 0.1;
    double momentum = 0.9;
    int epochs = 60;
    int batch_size = 24;  // clouds per step
    LrSchedule schedule = LrSchedule::StepDecay;
    std::uint64_t seed = 1;

    void validate() const {
        if (!(learning_rate > 0.0)) throw InvalidInputError("TrainConfig: learning rate must be > 0");
        if (momentum < 0.0 || momentum >= 1.0) throw InvalidInputError("TrainConfig: momentum in [0,1)");
        if (epochs < 0 || batch_size < 1) throw InvalidInputError("TrainConfig: bad epochs/batch size");
    }
};

// Step decay multiplies the base rate by 0.1 at 1/2 and again at 3/4 of the
// max epoch. Epochs are 0-based, so with base 0.1 and 60 epochs the rate is
// 0.1 for epochs 0..29, 0.01 for 30..44, and 0.001 from 45 on.
inline double lr_at(const TrainConfig& cfg, int epoch) {
    if (cfg.schedule == LrSchedule::Constant) return cfg.learning_rate;
    double lr = cfg.learning_rate;
    const int half = (cfg.epochs + 1) / 2;
    const int three_quarters = (3 * cfg.epochs + 3) / 4;
    if (epoch >= half) lr *= 0.1;
    if (epoch >= three_quarters) lr *= 0.1;
    return lr;
}

// Momentum SGD: v = m*v + g; p -= lr*v. A NaN or infinite gradient aborts
// with a diagnostic naming the parameter.
template <class Scalar>
class SgdOptimizer {
  public:
    explicit SgdOptimizer(std::vector<Parameter<Scalar>*> params, TrainConfig cfg)
        : params_(std::move(params)), cfg_(cfg) {
        cfg_.validate();
        velocity_.reserve(params_.size());
        for (const Parameter<Scalar>* p : params_)
            velocity_.emplace_back(p->value.rows, p->value.cols);
    }

    void zero_grad() {
        for (Parameter<Scalar>* p : params_) p->zero_grad();
    }

    void step(int epoch) {
        const Scalar lr = Scalar(lr_at(cfg_, epoch));
        const Scalar m = Scalar(cfg_.momentum);
        for (size_t i = 0; i < params_.size(); ++i) {
            Parameter<Scalar>& p = *params_[i];
            Matrix<Scalar>& v = velocity_[i];
            for (size_t j = 0; j < p.value.data.size(); ++j) {
                const Scalar g = p.grad.data[j];
                if (!std::isfinite(double(g)))
                    throw NumericalError("sgd_step: non-finite gradient in " + p.name);
                v.data[j] = m * v.data[j] + g;
                p.value.data[j] -= lr * v.data[j];
            }
        }
    }

    const std::vector<Parameter<Scalar>*>& params() const { return params_; }

  private:
    std::vector<Parameter<Scalar>*> params_;
    TrainConfig cfg_;
    std::vector<Matrix<Scalar>> velocity_;
};

}  // namespace voxpad
