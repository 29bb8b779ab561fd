#pragma once

#include "poseforge/skeleton.hpp"
#include "poseforge/tensor.hpp"

namespace poseforge {

struct StickStyle {
    double bone_width = 1.6;    // pixels
    double joint_radius = 1.8;  // pixels

    static StickStyle scaled_for(int w) {
        double f = static_cast<double>(w) / 32.0;
        return {1.6 * f, 1.8 * f};
    }
};

// Anti-aliased stick figure on a black background, {3, h, w} in [0,1].
// Signed-distance coverage with a one-pixel falloff keeps the training
// target smooth under small pose changes.
Tensor render_stick_figure(const PoseVector& pose, const SkeletonSpec& spec, int w, int h,
                           const StickStyle& style = {});

}  // namespace poseforge
