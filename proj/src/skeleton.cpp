#include "poseforge/skeleton.hpp"

#include <cmath>
#include <stdexcept>

namespace poseforge {

SkeletonSpec SkeletonSpec::default7() {
    SkeletonSpec s;
    s.joint_count = 7;
    s.joint_names = {"hip", "neck", "head", "lhand", "rhand", "lfoot", "rfoot"};
    s.bones = {{0, 1}, {1, 2}, {1, 3}, {1, 4}, {0, 5}, {0, 6}};
    s.hip_index = 0;
    s.reference_bone = {0, 1};
    return s;
}

void SkeletonSpec::validate() const {
    if (joint_count < 2) throw std::invalid_argument("skeleton needs at least 2 joints");
    if (hip_index < 0 || hip_index >= joint_count) throw std::invalid_argument("hip index out of range");
    if (static_cast<int>(bones.size()) != joint_count - 1)
        throw std::invalid_argument("bones must form a spanning tree (J-1 edges)");
    std::vector<char> reached(static_cast<std::size_t>(joint_count), 0);
    reached[static_cast<std::size_t>(hip_index)] = 1;
    // Bones are parent->child; a tree rooted at the hip reaches every joint.
    bool progress = true;
    while (progress) {
        progress = false;
        for (auto [p, c] : bones) {
            if (p < 0 || p >= joint_count || c < 0 || c >= joint_count)
                throw std::invalid_argument("bone joint index out of range");
            if (reached[static_cast<std::size_t>(p)] && !reached[static_cast<std::size_t>(c)]) {
                reached[static_cast<std::size_t>(c)] = 1;
                progress = true;
            }
        }
    }
    for (char r : reached)
        if (!r) throw std::invalid_argument("bones do not form a tree rooted at the hip");
}

Tensor ClassId::one_hot() const {
    if (index < 0 || index >= count) throw std::invalid_argument("class index out of range");
    Tensor t({count});
    t[index] = 1.0;
    return t;
}

double pose_distance(const PoseVector& a, const PoseVector& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.coords.size(); ++i) {
        double d = a.coords[i] - b.coords[i];
        s += d * d;
    }
    return std::sqrt(s);
}

PoseVector normalize_pose(const PoseVector& raw, const SkeletonSpec& spec) {
    const int J = raw.joints();
    if (J != spec.joint_count) throw std::invalid_argument("pose joint count does not match skeleton");
    auto [ra, rb] = spec.reference_bone;
    double hx = raw.x(spec.hip_index);
    double hy = raw.y(spec.hip_index);
    double bx = raw.x(rb) - raw.x(ra);
    double by = raw.y(rb) - raw.y(ra);
    double len = std::sqrt(bx * bx + by * by);
    if (len <= 0.0) throw std::invalid_argument("zero-length reference bone");
    PoseVector out(J);
    for (int j = 0; j < J; ++j) out.set(j, (raw.x(j) - hx) / len, (raw.y(j) - hy) / len);
    return out;
}

}  // namespace poseforge
