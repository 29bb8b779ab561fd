#include "poseforge/render.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace poseforge {

namespace {

double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
    double vx = bx - ax, vy = by - ay;
    double wx = px - ax, wy = py - ay;
    double vv = vx * vx + vy * vy;
    double t = vv > 0 ? std::clamp((wx * vx + wy * vy) / vv, 0.0, 1.0) : 0.0;
    double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

double coverage(double dist, double radius) {
    // 1 inside, linear falloff over one pixel.
    return std::clamp(1.0 - (dist - radius), 0.0, 1.0);
}

}  // namespace

Tensor render_stick_figure(const PoseVector& pose, const SkeletonSpec& spec, int w, int h,
                           const StickStyle& style) {
    for (double c : pose.coords)
        if (!std::isfinite(c)) throw std::invalid_argument("render_stick_figure: non-finite pose");
    const int J = pose.joints();
    if (J != spec.joint_count) throw std::invalid_argument("render_stick_figure: pose/skeleton mismatch");

    std::vector<double> jx(static_cast<std::size_t>(J)), jy(static_cast<std::size_t>(J));
    for (int j = 0; j < J; ++j) {
        jx[static_cast<std::size_t>(j)] = (pose.x(j) + 1.0) * 0.5 * w;
        jy[static_cast<std::size_t>(j)] = (pose.y(j) + 1.0) * 0.5 * h;
    }

    Tensor img({3, h, w});
    double pad = std::max(style.bone_width, style.joint_radius) + 1.5;
    for (int r = 0; r < h; ++r) {
        double py = r + 0.5;
        for (int c = 0; c < w; ++c) {
            double px = c + 0.5;
            double v = 0.0;
            for (auto [a, b] : spec.bones) {
                double lo_x = std::min(jx[static_cast<std::size_t>(a)], jx[static_cast<std::size_t>(b)]) - pad;
                double hi_x = std::max(jx[static_cast<std::size_t>(a)], jx[static_cast<std::size_t>(b)]) + pad;
                double lo_y = std::min(jy[static_cast<std::size_t>(a)], jy[static_cast<std::size_t>(b)]) - pad;
                double hi_y = std::max(jy[static_cast<std::size_t>(a)], jy[static_cast<std::size_t>(b)]) + pad;
                if (px < lo_x || px > hi_x || py < lo_y || py > hi_y) continue;
                double dist = segment_distance(px, py, jx[static_cast<std::size_t>(a)], jy[static_cast<std::size_t>(a)],
                                               jx[static_cast<std::size_t>(b)], jy[static_cast<std::size_t>(b)]);
                v = std::max(v, coverage(dist, style.bone_width * 0.5));
            }
            for (int j = 0; j < J; ++j) {
                double dx = px - jx[static_cast<std::size_t>(j)];
                double dy = py - jy[static_cast<std::size_t>(j)];
                if (std::abs(dx) > pad || std::abs(dy) > pad) continue;
                v = std::max(v, coverage(std::sqrt(dx * dx + dy * dy), style.joint_radius));
            }
            img[(static_cast<std::int64_t>(0) * h + r) * w + c] = v;
            img[(static_cast<std::int64_t>(1) * h + r) * w + c] = v;
            img[(static_cast<std::int64_t>(2) * h + r) * w + c] = v;
        }
    }
    return img;
}

}  // namespace poseforge
