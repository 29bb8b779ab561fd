#include "poseforge/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace poseforge {

Tensor xavier_init(int fan_in, int fan_out, Rng& rng) {
    double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return rng.uniform_tensor({fan_in, fan_out}, -a, a);
}

Mlp Mlp::init(const std::vector<int>& dims, Rng& rng) {
    if (dims.size() < 2) throw std::invalid_argument("mlp needs at least one layer");
    Mlp m;
    m.dims = dims;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        m.params.push_back(xavier_init(dims[l], dims[l + 1], rng));
        m.params.push_back(Tensor::zeros({dims[l + 1]}));
    }
    return m;
}

MlpNodes mlp_leaves(Tape& tape, const Mlp& mlp) {
    MlpNodes nodes;
    nodes.ids.reserve(mlp.params.size());
    for (const Tensor& p : mlp.params) nodes.ids.push_back(tape.leaf(p));
    return nodes;
}

int mlp_apply(Tape& tape, const Mlp& mlp, const MlpNodes& nodes, int input, Head head, double slope) {
    int x = input;
    const int L = mlp.layers();
    for (int l = 0; l < L; ++l) {
        x = tape.add_rowvec(tape.matmul(x, nodes.ids[static_cast<std::size_t>(2 * l)]),
                            nodes.ids[static_cast<std::size_t>(2 * l) + 1]);
        if (l + 1 < L) {
            x = tape.leaky_relu(x, slope);
        } else {
            switch (head) {
                case Head::Linear: break;
                case Head::Tanh: x = tape.tanh(x); break;
                case Head::Sigmoid: x = tape.sigmoid(x); break;
            }
        }
    }
    return x;
}

std::vector<Tensor> collect_grads(Tape& tape, int loss, const std::vector<int>& leaf_ids) {
    auto grads = tape.backward(loss, leaf_ids);
    std::vector<Tensor> out;
    out.reserve(leaf_ids.size());
    for (int id : leaf_ids) out.push_back(std::move(grads.at(id)));
    return out;
}

}  // namespace poseforge
