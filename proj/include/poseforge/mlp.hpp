#pragma once

#include <vector>

#include "poseforge/rng.hpp"
#include "poseforge/tape.hpp"
#include "poseforge/tensor.hpp"

namespace poseforge {

enum class Head { Linear, Tanh, Sigmoid };

// Fully connected stack with leaky-relu hidden activations.
// Parameters are stored flat as [W1, b1, W2, b2, ...] so optimizer and
// checkpoint code can treat every model the same way.
struct Mlp {
    std::vector<int> dims;
    std::vector<Tensor> params;

    static Mlp init(const std::vector<int>& dims, Rng& rng);
    int layers() const { return static_cast<int>(dims.size()) - 1; }
};

struct MlpNodes {
    std::vector<int> ids;  // leaf ids matching Mlp::params order
};

MlpNodes mlp_leaves(Tape& tape, const Mlp& mlp);

// input is [B x dims.front()]; returns [B x dims.back()].
int mlp_apply(Tape& tape, const Mlp& mlp, const MlpNodes& nodes, int input, Head head,
              double slope = 0.2);

// Xavier-uniform weight, zero bias.
Tensor xavier_init(int fan_in, int fan_out, Rng& rng);

// Gradients of `loss` for the given leaves, in leaf order.
std::vector<Tensor> collect_grads(Tape& tape, int loss, const std::vector<int>& leaf_ids);

}  // namespace poseforge
