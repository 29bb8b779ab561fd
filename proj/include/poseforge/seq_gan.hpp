#pragma once

#include <cstdint>
#include <vector>

#include "poseforge/adam.hpp"
#include "poseforge/pose_gan.hpp"

namespace poseforge {

// Recurrent latent-shift generator. Conditioning (z0 | c) seeds the hidden
// and cell state; the n-dim noise vector is the per-step input. Emits T-1
// m-dim shifts; the latent path is their clamped running sum from z0.
struct SequenceGenerator {
    int n = 64;
    int m = 8;
    int hidden = 64;
    int C = 1;
    // wx [n x 4H], wh [H x 4H], b [4H], wh0 [(m+C) x H], bh0 [H],
    // wc0 [(m+C) x H], bc0 [H], wout [H x m], bout [m]
    std::vector<Tensor> params;

    static SequenceGenerator init(int n, int m, int hidden, int C, Rng& rng);
};

// Bidirectional recurrent discriminator over pose sequences. Step input is
// (delta-pose | pose | one-hot class); the classifier head sees the
// concatenated final forward/backward states.
struct SequenceDiscriminator {
    int J = 7;
    int C = 1;
    int hidden = 64;
    // fwd wx [(4J+C) x 4H], fwd wh, fwd b, bwd wx, bwd wh, bwd b,
    // whead [2H x 1], bhead [1]
    std::vector<Tensor> params;

    static SequenceDiscriminator init(int J, int C, int hidden, Rng& rng);
};

struct SeqTrainConfig {
    double l2_shift_weight = 0.1;
    double latent_clamp = 1.0;
    int batch = 32;
    AdamHyper adam{5e-5, 0.5, 0.9, 1e-8, 0.5, 30};
    int epochs = 40;
    int gen_steps_per_disc = 1;
    int hidden = 64;
    int noise_dim = 64;
};

// z_{t+1} = clamp(z_t + s_t, -clamp_range, clamp_range).
// z0 is [m], shifts is [T-1 x m]; returns the path [T x m].
Tensor integrate_shifts(const Tensor& z0, const Tensor& shifts, double clamp_range = 1.0);

// Full generator stack on one noise draw: z [n], z0 [m] -> T decoded frames.
PoseSequence gps_forward(const SequenceGenerator& gps, const Tensor& z, const Tensor& z0,
                         const ClassId& c, const SinglePoseGenerator& g0, int T);

// As above but the latent path is decoded with a different class label;
// used for mismatched-conditioning evaluation baselines.
PoseSequence gps_forward_mismatched(const SequenceGenerator& gps, const Tensor& z, const Tensor& z0,
                                    const ClassId& seq_class, const ClassId& decode_class,
                                    const SinglePoseGenerator& g0, int T);

// Discriminator probability that the sequence is real, in (0,1).
double dps_forward(const SequenceDiscriminator& dps, const PoseSequence& v, const ClassId& c);

// --- tape-side builders (shared with the inverter) ---

struct SeqGenNodes {
    std::vector<int> ids;
};
struct SeqDiscNodes {
    std::vector<int> ids;
};

SeqGenNodes gps_leaves(Tape& tape, const SequenceGenerator& gps);
SeqDiscNodes dps_leaves(Tape& tape, const SequenceDiscriminator& dps);

struct SeqGenGraph {
    std::vector<int> shifts;  // T-1 nodes, [B x m]
    std::vector<int> latents; // T nodes, [B x m]
    std::vector<int> frames;  // T nodes, [B x 2J]
};

// Unrolls the generator and decodes every latent through g0 with class c.
SeqGenGraph gps_apply(Tape& tape, const SequenceGenerator& gps, const SeqGenNodes& nodes,
                      const SinglePoseGenerator& g0, const MlpNodes& g0_nodes, int z, int z0,
                      int c, int T, double clamp_range = 1.0);

// Probability node [B x 1] from T frame nodes.
int dps_apply(Tape& tape, const SequenceDiscriminator& dps, const SeqDiscNodes& nodes,
              const std::vector<int>& frames, int c);

struct SeqGanResult {
    SequenceGenerator gps;
    SequenceDiscriminator dps;
    std::vector<StepRecord> history;
};

// Normal-GAN minimax with non-saturating generator loss plus an L2 penalty
// on the emitted shifts. g0 stays frozen.
SeqGanResult train_sequence(const std::vector<PoseSequence>& data, const SinglePoseGenerator& g0,
                            const SeqTrainConfig& cfg, std::uint64_t seed);

}  // namespace poseforge
