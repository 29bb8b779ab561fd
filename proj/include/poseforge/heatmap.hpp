#pragma once

#include "poseforge/skeleton.hpp"
#include "poseforge/tensor.hpp"

namespace poseforge {

// J per-joint Gaussian probability maps, stacked as a {J, h, w} tensor.
struct HeatMapStack {
    Tensor maps;
    double sigma = 0.0;

    int joints() const { return maps.dim(0); }
    int height() const { return maps.dim(1); }
    int width() const { return maps.dim(2); }
};

// 1.5 px at 32x32, scaled proportionally.
double default_heatmap_sigma(int w);

// Map pose coordinates from [-1,1] to pixel space and evaluate
// exp(-|p - l|^2 / sigma^2) at every pixel center (i+0.5, j+0.5).
HeatMapStack heatmap_encode(const PoseVector& pose, double sigma, int w, int h);

}  // namespace poseforge
