#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "poseforge/adam.hpp"
#include "poseforge/heatmap.hpp"
#include "poseforge/mlp.hpp"

namespace poseforge {

// Convolutional encoder-decoder with skip connections mapping a
// (reference image | joint heat maps) stack to a pixel image. The decoder
// upsamples with nearest neighbor before each convolution. At 32x32 the
// encoder has 4 convs (strides 2,1,2,1) and the decoder two
// (upsample,conv,conv) blocks plus a final 3x3 conv; at 128x128 the full
// 8-conv / 3x(up,conv,conv)+1x(up,conv) shape is used.
struct TransformerF {
    struct ConvSpec {
        int in_ch, out_ch, k, stride;
    };
    struct DecBlock {
        int skip;  // encoder layer index providing the skip, -1 for the input stack
        std::vector<ConvSpec> convs;
    };

    int J = 7;
    int width = 32;
    int height = 32;
    std::vector<ConvSpec> enc;
    std::vector<DecBlock> dec;
    ConvSpec final_conv{0, 0, 0, 0};
    bool has_final = false;
    std::vector<Tensor> params;  // [w, b] per conv: enc order, dec order, final

    static TransformerF init(int J, int w, int h, Rng& rng);
    int input_channels() const { return 3 + J; }
};

struct S2iNodes {
    std::vector<int> ids;
};

S2iNodes f_leaves(Tape& tape, const TransformerF& f);

// input [B, 3+J, h, w] -> image [B, 3, h, w] in (0,1).
int f_apply(Tape& tape, const TransformerF& f, const S2iNodes& nodes, int input);

// Single-sample forward: (heat maps, reference image) -> {3,h,w} image.
Tensor f_forward(const HeatMapStack& heat, const Tensor& ref, const TransformerF& f);

// Fixed, seeded convolutional feature extractor; stands in for a pretrained
// perception network. Taps after each of the 5 tanh activations with
// per-layer weights 1/(tap element count).
struct PerceptionNet {
    std::vector<Tensor> params;  // [w, b] per conv, 3x3, channels 3->6->6->6->6->6
    static PerceptionNet init(std::uint64_t seed);
    int layers() const { return 5; }
};

// -(1/k) sum[(1-y) log(1-p) + y log p]; pred is guard-clamped away from {0,1}.
double bce_loss(const Tensor& pred, const Tensor& truth);
int bce_node(Tape& tape, int pred, int truth_leaf);

double feature_match_loss(const Tensor& pred, const Tensor& truth, const PerceptionNet& phi);
// Tape version against precomputed truth activations.
int feature_match_node(Tape& tape, const PerceptionNet& phi, const std::vector<int>& phi_leaves,
                       int pred, const std::vector<Tensor>& truth_taps);
std::vector<Tensor> phi_taps(const PerceptionNet& phi, const Tensor& image);

struct S2iPair {
    PoseVector pose;
    Tensor ref;    // {3,h,w}
    Tensor truth;  // {3,h,w}
};

struct S2iTrainConfig {
    double lambda = 0.01;
    AdamHyper adam{0.001, 0.9, 0.999, 1e-8, 1.0, 0};
    int batch = 10;
    int epochs = 30;
    double sigma = 0.0;  // heat-map sigma; 0 picks the resolution default
    std::uint64_t phi_seed = 77;
};

struct S2iResult {
    TransformerF f;
    PerceptionNet phi;
    std::vector<std::pair<double, double>> epoch_loss;  // per-epoch mean (bce, feature-match)
};

S2iResult train_s2i(const std::vector<S2iPair>& pairs, const S2iTrainConfig& cfg, std::uint64_t seed);

}  // namespace poseforge
