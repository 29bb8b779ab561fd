#pragma once

#include <cstdint>
#include <vector>

#include "poseforge/lbfgsb.hpp"
#include "poseforge/seq_gan.hpp"

namespace poseforge {

// Frame indices with pinned pose vectors; the optimization constraint set.
struct ConstraintSet {
    std::vector<std::pair<int, PoseVector>> entries;  // unique, sorted frame indices
    ClassId cls;

    void validate(int T, int J) const;
    bool constrains(int t) const;
};

// The inversion variable: initial pose latent plus sequence noise.
struct LatentState {
    Tensor z0;  // [m]
    Tensor z;   // [n]

    Tensor packed() const;  // [m+n]
    static LatentState unpack(const Tensor& x, int m, int n);
};

struct InversionConfig {
    double alpha = 0.1;   // perceptual weight
    int restarts = 3;
    int pool = 64;
    LbfgsbConfig lbfgsb{10, 300, 1e-6};
    double z_bound = 3.0;  // |z| box; z0 stays in the prior's [-1,1]
    int T = 16;
    std::uint64_t seed = 0;
};

struct InverterModels {
    const SinglePoseGenerator* g0 = nullptr;
    const SequenceGenerator* gps = nullptr;
    const SequenceDiscriminator* dps = nullptr;
};

// Sum of |G(z)_i - I_i| over constrained frames and all coordinates.
double contextual_loss(const LatentState& state, const ConstraintSet& constraints,
                       const InverterModels& models, int T);

// -log D(G(z)); the discriminator output is clamped away from {0,1}.
double perceptual_loss(const LatentState& state, const ClassId& cls, const InverterModels& models,
                       int T);

// Best-of-pool initialization: draws candidates from the priors and returns
// the one with the lowest combined objective.
LatentState initialize(const ConstraintSet& constraints, const InverterModels& models,
                       const InversionConfig& cfg);

struct CompletionResult {
    PoseSequence sequence;       // blended, constrained frames bit-equal to inputs
    LatentState latent;          // best restart's optimum
    double objective = 0.0;
    double contextual = 0.0;     // at the optimum, before blending
    bool converged = false;      // false when every restart failed to improve
    std::vector<double> restart_objectives;
    std::vector<double> restart_contextuals;
    std::vector<std::vector<double>> restart_traces;  // accepted objective values
};

// Pool initialization, K L-BFGS-B restarts on the combined objective with
// analytic gradients through the whole generator stack, then temporal
// Poisson blending.
CompletionResult complete(const ConstraintSet& constraints, const InverterModels& models,
                          const InversionConfig& cfg);

// Prediction: pins frames 0..prefix.size()-1 and completes.
CompletionResult predict(const std::vector<PoseVector>& prefix, const ClassId& cls,
                         const InverterModels& models, const InversionConfig& cfg);

// Per coordinate, solves min |grad_t x - grad_t g|^2 with x pinned at the
// constrained frames (tridiagonal normal equations, unique solution).
PoseSequence poisson_blend(const PoseSequence& generated, const ConstraintSet& constraints);

// Max residual of the blend optimality system; test hook.
double poisson_blend_residual(const PoseSequence& generated, const PoseSequence& blended,
                              const ConstraintSet& constraints);

}  // namespace poseforge
