#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "poseforge/adam.hpp"
#include "poseforge/mlp.hpp"
#include "poseforge/skeleton.hpp"

namespace poseforge {

// Conditional single-pose generator: (z0 | one-hot class) -> pose in [-1,1].
struct SinglePoseGenerator {
    Mlp mlp;  // [m+C, hidden..., 2J], tanh output
    int m = 8;
    int C = 1;
    int J = 7;

    static SinglePoseGenerator init(int m, int C, int J, const std::vector<int>& hidden, Rng& rng);
};

// Conditional critic: (pose | one-hot class) -> unbounded score.
struct PoseCritic {
    Mlp mlp;  // [2J+C, hidden..., 1], linear output
    int J = 7;
    int C = 1;

    static PoseCritic init(int C, int J, const std::vector<int>& hidden, Rng& rng);
};

struct WganTrainConfig {
    double gp_weight = 10.0;
    int critic_iters_per_gen = 5;
    int batch = 64;
    AdamHyper adam{0.001, 0.5, 0.9, 1e-8, 0.5, 30};
    int epochs = 60;
    std::vector<int> hidden = {128, 128};
};

PoseVector g0_forward(const SinglePoseGenerator& g0, const Tensor& z0, const ClassId& c);

// Batched decode: z0 rows [B x m], onehot rows [B x C] -> poses [B x 2J].
Tensor g0_forward_batch(const SinglePoseGenerator& g0, const Tensor& z0, const Tensor& onehot);

// Tape-side builders shared with the sequence model and the inverter.
MlpNodes g0_leaves(Tape& tape, const SinglePoseGenerator& g0);
int g0_apply(Tape& tape, const SinglePoseGenerator& g0, const MlpNodes& nodes, int zc);
MlpNodes d0_leaves(Tape& tape, const PoseCritic& d0);
int d0_apply(Tape& tape, const PoseCritic& d0, const MlpNodes& nodes, int poses, int onehot);

// Improved-WGAN critic loss:
//   mean D(fake|c) - mean D(real|c) + gp * mean (|grad_xhat D(xhat|c)| - 1)^2
// with xhat = eps*real + (1-eps)*fake, eps ~ U(0,1) per sample. The penalty
// gradient is a first-class tape node, so its own gradient w.r.t. the critic
// parameters is exact.
struct CriticLossResult {
    Tape tape;
    int loss = -1;
    int penalty = -1;     // scalar penalty node (without gp weight)
    MlpNodes d_nodes;
    double value() const { return tape.val(loss)[0]; }
};
CriticLossResult critic_loss(const PoseCritic& d0, const std::vector<PoseVector>& real,
                             const std::vector<PoseVector>& fake, const std::vector<ClassId>& cls,
                             const WganTrainConfig& cfg, Rng& rng);

// Generator loss: -mean D(G(z0|c)|c).
struct GeneratorLossResult {
    Tape tape;
    int loss = -1;
    MlpNodes g_nodes;
    double value() const { return tape.val(loss)[0]; }
};
GeneratorLossResult generator_loss(const SinglePoseGenerator& g0, const PoseCritic& d0,
                                   const Tensor& z0, const std::vector<ClassId>& cls);

struct StepRecord {
    enum class Kind { Critic, Generator } kind;
    double loss;
};

struct PoseGanResult {
    SinglePoseGenerator g0;
    PoseCritic d0;
    std::vector<StepRecord> history;
};

// Alternates critic_iters_per_gen critic updates per generator update.
// Deterministic given the seed.
PoseGanResult train_single_pose(const std::vector<std::pair<PoseVector, ClassId>>& data,
                                const WganTrainConfig& cfg, std::uint64_t seed, int m = 8);

// Median per-sample gradient norm of the critic over random interpolates;
// the gradient penalty pulls this toward 1.
double median_interpolate_grad_norm(const PoseCritic& d0,
                                    const std::vector<std::pair<PoseVector, ClassId>>& data,
                                    const SinglePoseGenerator& g0, int samples, std::uint64_t seed);

}  // namespace poseforge
