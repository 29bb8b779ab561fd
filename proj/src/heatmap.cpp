#include "poseforge/heatmap.hpp"

#include <cmath>
#include <stdexcept>

namespace poseforge {

double default_heatmap_sigma(int w) { return 1.5 * static_cast<double>(w) / 32.0; }

HeatMapStack heatmap_encode(const PoseVector& pose, double sigma, int w, int h) {
    if (sigma <= 0.0) throw std::invalid_argument("heatmap sigma must be positive");
    if (w < 1 || h < 1) throw std::invalid_argument("heatmap size must be at least 1x1");
    const int J = pose.joints();
    HeatMapStack stack;
    stack.sigma = sigma;
    stack.maps = Tensor({J, h, w});
    const double inv_s2 = 1.0 / (sigma * sigma);
    for (int j = 0; j < J; ++j) {
        double lx = (pose.x(j) + 1.0) * 0.5 * w;
        double ly = (pose.y(j) + 1.0) * 0.5 * h;
        double* map = stack.maps.data() + static_cast<std::int64_t>(j) * h * w;
        for (int r = 0; r < h; ++r) {
            double py = r + 0.5;
            for (int c = 0; c < w; ++c) {
                double px = c + 0.5;
                double d2 = (px - lx) * (px - lx) + (py - ly) * (py - ly);
                map[r * w + c] = std::exp(-d2 * inv_s2);
            }
        }
    }
    return stack;
}

}  // namespace poseforge
