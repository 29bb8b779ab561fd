#include "poseforge/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace poseforge {

AdamState AdamState::init(const std::vector<Tensor>& params, AdamHyper hyper) {
    AdamState st;
    st.hyper = hyper;
    st.first_moment.reserve(params.size());
    st.second_moment.reserve(params.size());
    for (const Tensor& p : params) {
        st.first_moment.push_back(Tensor::zeros(p.shape()));
        st.second_moment.push_back(Tensor::zeros(p.shape()));
    }
    return st;
}

double AdamState::effective_lr() const {
    if (hyper.decay_epoch <= 0) return hyper.lr;
    return hyper.lr * std::pow(hyper.decay_factor, epoch / hyper.decay_epoch);
}

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size())
        throw std::invalid_argument("adam_step: parameter/gradient/state count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].same_shape(grads[i]) || !params[i].same_shape(state.first_moment[i]))
            throw std::invalid_argument("adam_step: shape mismatch at parameter " + std::to_string(i));
        require_finite(grads[i], "adam gradient");
    }

    state.step_count += 1;
    const AdamHyper& h = state.hyper;
    const double lr = state.effective_lr();
    const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step_count));

    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params[i];
        const Tensor& g = grads[i];
        Tensor& m = state.first_moment[i];
        Tensor& v = state.second_moment[i];
        for (std::int64_t j = 0; j < p.size(); ++j) {
            m[j] = h.beta1 * m[j] + (1.0 - h.beta1) * g[j];
            v[j] = h.beta2 * v[j] + (1.0 - h.beta2) * g[j] * g[j];
            double mhat = m[j] / bc1;
            double vhat = v[j] / bc2;
            p[j] -= lr * mhat / (std::sqrt(vhat) + h.eps);
        }
    }
}

}  // namespace poseforge
