#include "poseforge/skel2img.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace poseforge {

namespace {

constexpr double kBceGuard = 1e-12;

Tensor conv_init(int in_ch, int out_ch, int k, Rng& rng) {
    double a = std::sqrt(6.0 / (static_cast<double>(in_ch) * k * k + static_cast<double>(out_ch) * k * k));
    return rng.uniform_tensor({out_ch, in_ch, k, k}, -a, a);
}

void push_conv_params(std::vector<Tensor>& params, const TransformerF::ConvSpec& c, Rng& rng) {
    params.push_back(conv_init(c.in_ch, c.out_ch, c.k, rng));
    params.push_back(Tensor::zeros({c.out_ch}));
}

}  // namespace

TransformerF TransformerF::init(int J, int w, int h, Rng& rng) {
    if (w != h) throw std::invalid_argument("transformer expects square images");
    TransformerF f;
    f.J = J;
    f.width = w;
    f.height = h;
    const int in = 3 + J;

    if (w == 128) {
        int ch[8] = {8, 12, 16, 24, 32, 32, 48, 48};
        int prev = in;
        for (int l = 0; l < 8; ++l) {
            f.enc.push_back({prev, ch[l], 5, l % 2 == 0 ? 2 : 1});
            prev = ch[l];
        }
        // Resolutions after each encoder conv: 64,64,32,32,16,16,8,8.
        f.dec.push_back({5, {{48 + 32, 32, 5, 1}, {32, 32, 5, 1}}});
        f.dec.push_back({3, {{32 + 24, 24, 5, 1}, {24, 24, 5, 1}}});
        f.dec.push_back({1, {{24 + 12, 16, 5, 1}, {16, 16, 5, 1}}});
        f.dec.push_back({-1, {{16 + in, 3, 5, 1}}});
        f.has_final = false;
    } else if (w == 32) {
        int ch[4] = {6, 8, 12, 16};
        int prev = in;
        for (int l = 0; l < 4; ++l) {
            f.enc.push_back({prev, ch[l], 5, l % 2 == 0 ? 2 : 1});
            prev = ch[l];
        }
        // Resolutions after each encoder conv: 16,16,8,8.
        f.dec.push_back({1, {{16 + 8, 12, 5, 1}, {12, 8, 5, 1}}});
        f.dec.push_back({-1, {{8 + in, 10, 5, 1}, {10, 8, 5, 1}}});
        f.final_conv = {8, 3, 3, 1};
        f.has_final = true;
    } else {
        throw std::invalid_argument("transformer supports 32x32 and 128x128 resolutions");
    }

    for (const ConvSpec& c : f.enc) push_conv_params(f.params, c, rng);
    for (const DecBlock& b : f.dec)
        for (const ConvSpec& c : b.convs) push_conv_params(f.params, c, rng);
    if (f.has_final) push_conv_params(f.params, f.final_conv, rng);
    return f;
}

S2iNodes f_leaves(Tape& tape, const TransformerF& f) {
    S2iNodes nodes;
    for (const Tensor& p : f.params) nodes.ids.push_back(tape.leaf(p));
    return nodes;
}

int f_apply(Tape& t, const TransformerF& f, const S2iNodes& nodes, int input) {
    const Tensor& in_val = t.val(input);
    if (in_val.rank() != 4 || in_val.dim(1) != f.input_channels() || in_val.dim(2) != f.height ||
        in_val.dim(3) != f.width)
        throw std::invalid_argument("f_apply: input must be [B," + std::to_string(f.input_channels()) +
                                    "," + std::to_string(f.height) + "," + std::to_string(f.width) + "]");

    std::size_t cursor = 0;
    auto conv = [&](int x, int stride, bool activate) {
        int y = t.chan_bias(t.conv2d(x, nodes.ids[cursor], stride), nodes.ids[cursor + 1]);
        cursor += 2;
        return activate ? t.leaky_relu(y, 0.2) : y;
    };

    std::vector<int> enc_acts;
    int x = input;
    for (const auto& spec : f.enc) {
        x = conv(x, spec.stride, true);
        enc_acts.push_back(x);
    }

    for (std::size_t bi = 0; bi < f.dec.size(); ++bi) {
        const auto& block = f.dec[bi];
        x = t.upsample_nn2(x);
        int skip = block.skip >= 0 ? enc_acts[static_cast<std::size_t>(block.skip)] : input;
        x = t.concat(x, skip, 1);
        for (std::size_t ci = 0; ci < block.convs.size(); ++ci) {
            bool last_conv_of_net = !f.has_final && bi + 1 == f.dec.size() && ci + 1 == block.convs.size();
            x = conv(x, 1, !last_conv_of_net);
        }
    }
    if (f.has_final) x = conv(x, 1, false);
    return t.sigmoid(x);
}

Tensor f_forward(const HeatMapStack& heat, const Tensor& ref, const TransformerF& f) {
    if (heat.joints() != f.J) throw std::invalid_argument("f_forward: heat map joint count mismatch");
    if (ref.rank() != 3 || ref.dim(0) != 3) throw std::invalid_argument("f_forward: reference must be {3,h,w}");
    if (ref.dim(1) != heat.height() || ref.dim(2) != heat.width())
        throw std::invalid_argument("f_forward: heat/reference size mismatch");
    if (ref.dim(1) != f.height || ref.dim(2) != f.width)
        throw std::invalid_argument("f_forward: size does not match the network");

    Tensor input({1, 3 + f.J, f.height, f.width});
    std::copy(ref.data(), ref.data() + ref.size(), input.data());
    std::copy(heat.maps.data(), heat.maps.data() + heat.maps.size(), input.data() + ref.size());

    Tape t;
    S2iNodes nodes = f_leaves(t, f);
    int out = f_apply(t, f, nodes, t.leaf(input));
    return t.val(out).reshaped({3, f.height, f.width});
}

PerceptionNet PerceptionNet::init(std::uint64_t seed) {
    Rng rng(seed);
    PerceptionNet phi;
    int prev = 3;
    for (int l = 0; l < 5; ++l) {
        phi.params.push_back(conv_init(prev, 6, 3, rng));
        phi.params.push_back(Tensor::zeros({6}));
        prev = 6;
    }
    return phi;
}

namespace {

std::vector<int> phi_apply(Tape& t, const PerceptionNet& phi, const std::vector<int>& leaves, int image) {
    std::vector<int> taps;
    int x = image;
    for (int l = 0; l < phi.layers(); ++l) {
        x = t.tanh(t.chan_bias(t.conv2d(x, leaves[static_cast<std::size_t>(2 * l)], 1),
                               leaves[static_cast<std::size_t>(2 * l) + 1]));
        taps.push_back(x);
    }
    return taps;
}

std::vector<int> phi_leaf_ids(Tape& t, const PerceptionNet& phi) {
    std::vector<int> ids;
    for (const Tensor& p : phi.params) ids.push_back(t.leaf(p));
    return ids;
}

}  // namespace

std::vector<Tensor> phi_taps(const PerceptionNet& phi, const Tensor& image) {
    Tape t;
    Tensor batched = image.rank() == 3 ? image.reshaped({1, image.dim(0), image.dim(1), image.dim(2)}) : image;
    auto ids = phi_leaf_ids(t, phi);
    auto taps = phi_apply(t, phi, ids, t.leaf(batched));
    std::vector<Tensor> out;
    for (int tap : taps) out.push_back(t.val(tap));
    return out;
}

double bce_loss(const Tensor& pred, const Tensor& truth) {
    if (!pred.same_shape(truth)) throw std::invalid_argument("bce_loss: shape mismatch");
    double s = 0;
    for (std::int64_t i = 0; i < pred.size(); ++i) {
        double y = truth[i];
        if (y < 0.0 || y > 1.0) throw std::invalid_argument("bce_loss: truth outside [0,1]");
        double p = std::clamp(pred[i], kBceGuard, 1.0 - kBceGuard);
        s += (1.0 - y) * std::log(1.0 - p) + y * std::log(p);
    }
    return -s / static_cast<double>(pred.size());
}

int bce_node(Tape& t, int pred, int truth_leaf) {
    int p = t.clamp(pred, kBceGuard, 1.0 - kBceGuard);
    int one_minus_y = t.shift(t.scale(truth_leaf, -1.0), 1.0);
    int one_minus_p = t.shift(t.scale(p, -1.0), 1.0);
    int term = t.add(t.mul(one_minus_y, t.log(one_minus_p)), t.mul(truth_leaf, t.log(p)));
    return t.scale(t.mean(term), -1.0);
}

int feature_match_node(Tape& t, const PerceptionNet& phi, const std::vector<int>& phi_leaves,
                       int pred, const std::vector<Tensor>& truth_taps) {
    auto taps = phi_apply(t, phi, phi_leaves, pred);
    int loss = -1;
    for (std::size_t l = 0; l < taps.size(); ++l) {
        int diff = t.abs(t.sub(taps[l], t.leaf(truth_taps[l])));
        int term = t.mean(diff);  // lambda_l = 1 / tap element count
        loss = loss < 0 ? term : t.add(loss, term);
    }
    return loss;
}

double feature_match_loss(const Tensor& pred, const Tensor& truth, const PerceptionNet& phi) {
    Tensor pb = pred.rank() == 3 ? pred.reshaped({1, pred.dim(0), pred.dim(1), pred.dim(2)}) : pred;
    Tape t;
    auto ids = phi_leaf_ids(t, phi);
    int node = feature_match_node(t, phi, ids, t.leaf(pb), phi_taps(phi, truth));
    return t.val(node)[0];
}

S2iResult train_s2i(const std::vector<S2iPair>& pairs, const S2iTrainConfig& cfg, std::uint64_t seed) {
    if (pairs.empty()) throw std::invalid_argument("train_s2i: empty dataset");
    const Tensor& ref0 = pairs.front().ref;
    if (ref0.rank() != 3 || ref0.dim(0) != 3) throw std::invalid_argument("train_s2i: images must be {3,h,w}");
    const int h = ref0.dim(1);
    const int w = ref0.dim(2);
    const int J = pairs.front().pose.joints();
    const double sigma = cfg.sigma > 0 ? cfg.sigma : default_heatmap_sigma(w);
    for (const S2iPair& p : pairs)
        if (!p.ref.same_shape(ref0) || !p.truth.same_shape(ref0) || p.pose.joints() != J)
            throw std::invalid_argument("train_s2i: inconsistent pair shapes");

    Rng rng(seed);
    Rng init_rng = rng.fork(1);
    S2iResult out{TransformerF::init(J, w, h, init_rng), PerceptionNet::init(cfg.phi_seed), {}};

    const int N = static_cast<int>(pairs.size());
    const int B = std::min(cfg.batch, N);

    // Inputs and truth activations are fixed; build them once.
    std::vector<Tensor> inputs, truth_tap_cache;
    inputs.reserve(pairs.size());
    std::vector<std::vector<Tensor>> taps_per_pair(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        Tensor input({3 + J, h, w});
        std::copy(pairs[i].ref.data(), pairs[i].ref.data() + pairs[i].ref.size(), input.data());
        HeatMapStack heat = heatmap_encode(pairs[i].pose, sigma, w, h);
        std::copy(heat.maps.data(), heat.maps.data() + heat.maps.size(), input.data() + pairs[i].ref.size());
        inputs.push_back(std::move(input));
        taps_per_pair[i] = phi_taps(out.phi, pairs[i].truth);
    }

    AdamState state = AdamState::init(out.f.params, cfg.adam);
    const int steps_per_epoch = std::max(1, N / B);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        state.epoch = epoch;
        double bce_sum = 0, fm_sum = 0;
        for (int step = 0; step < steps_per_epoch; ++step) {
            std::vector<int> idx(static_cast<std::size_t>(B));
            for (int b = 0; b < B; ++b) idx[static_cast<std::size_t>(b)] = rng.uniform_int(N);

            Tensor in_batch({B, 3 + J, h, w});
            Tensor truth_batch({B, 3, h, w});
            for (int b = 0; b < B; ++b) {
                const Tensor& in = inputs[static_cast<std::size_t>(idx[static_cast<std::size_t>(b)])];
                std::copy(in.data(), in.data() + in.size(), in_batch.data() + static_cast<std::int64_t>(b) * in.size());
                const Tensor& tr = pairs[static_cast<std::size_t>(idx[static_cast<std::size_t>(b)])].truth;
                std::copy(tr.data(), tr.data() + tr.size(), truth_batch.data() + static_cast<std::int64_t>(b) * tr.size());
            }
            std::vector<Tensor> truth_taps;
            for (int l = 0; l < out.phi.layers(); ++l) {
                const Tensor& tap0 = taps_per_pair[static_cast<std::size_t>(idx[0])][static_cast<std::size_t>(l)];
                Tensor stacked({B, tap0.dim(1), tap0.dim(2), tap0.dim(3)});
                for (int b = 0; b < B; ++b) {
                    const Tensor& tap = taps_per_pair[static_cast<std::size_t>(idx[static_cast<std::size_t>(b)])][static_cast<std::size_t>(l)];
                    std::copy(tap.data(), tap.data() + tap.size(), stacked.data() + static_cast<std::int64_t>(b) * tap.size());
                }
                truth_taps.push_back(std::move(stacked));
            }

            Tape t;
            S2iNodes nodes = f_leaves(t, out.f);
            auto phi_ids = phi_leaf_ids(t, out.phi);
            int pred = f_apply(t, out.f, nodes, t.leaf(in_batch));
            int bce = bce_node(t, pred, t.leaf(truth_batch));
            int fm = feature_match_node(t, out.phi, phi_ids, pred, truth_taps);
            int loss = t.add(bce, t.scale(fm, cfg.lambda));

            auto grads = collect_grads(t, loss, nodes.ids);
            adam_step(out.f.params, grads, state);
            bce_sum += t.val(bce)[0];
            fm_sum += t.val(fm)[0];
        }
        out.epoch_loss.emplace_back(bce_sum / steps_per_epoch, fm_sum / steps_per_epoch);
    }
    return out;
}

}  // namespace poseforge
