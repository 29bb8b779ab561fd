#pragma once

#include <functional>
#include <vector>

#include "poseforge/tensor.hpp"

namespace poseforge {

// Per-coordinate box; +/-infinity allowed.
struct BoundBox {
    Tensor lower;
    Tensor upper;

    static BoundBox unbounded(int n);
    static BoundBox uniform(int n, double lo, double hi);
    bool contains(const Tensor& x) const;
    Tensor project(const Tensor& x) const;
};

struct LbfgsbConfig {
    int memory = 10;
    int max_iters = 200;
    double grad_tol = 1e-5;
};

enum class LbfgsbStatus { Converged, IterationLimit, LineSearchFailure };

struct LbfgsbResult {
    Tensor x;
    double f = 0.0;
    LbfgsbStatus status = LbfgsbStatus::Converged;
    int iterations = 0;
    std::vector<double> accepted_objectives;  // f at x0 plus each accepted iterate
};

// Objective fills `grad` and returns f(x). Called only at feasible points.
using Objective = std::function<double(const Tensor& x, Tensor& grad)>;

// Bound-constrained limited-memory quasi-Newton minimization: gradient
// projection identifies the active set, an L-BFGS model drives the free
// subspace, and steps are accepted by backtracking along the projection arc.
LbfgsbResult lbfgsb_minimize(const Objective& objective, const Tensor& x0, const BoundBox& bounds,
                             const LbfgsbConfig& config = {});

}  // namespace poseforge
