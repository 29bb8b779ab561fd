#pragma once

#include <cstdint>
#include <vector>

#include "poseforge/tensor.hpp"

namespace poseforge {

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double decay_factor = 1.0;  // lr multiplier applied once per decay_epoch boundary
    int decay_epoch = 0;        // 0 disables decay
};

struct AdamState {
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
    std::int64_t step_count = 0;
    int epoch = 0;  // set by the training loop; drives lr decay
    AdamHyper hyper;

    static AdamState init(const std::vector<Tensor>& params, AdamHyper hyper);
    double effective_lr() const;
};

// Bias-corrected Adam update, in place.
void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state);

}  // namespace poseforge
