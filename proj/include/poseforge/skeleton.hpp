#pragma once

#include <string>
#include <utility>
#include <vector>

#include "poseforge/tensor.hpp"

namespace poseforge {

// Bone topology plus the conventions normalization relies on.
struct SkeletonSpec {
    int joint_count = 0;
    std::vector<std::string> joint_names;
    std::vector<std::pair<int, int>> bones;  // parent, child
    int hip_index = 0;
    std::pair<int, int> reference_bone{0, 1};  // used for scale

    // 7 joints (hip, neck, head, hands, feet), 6 bones, hip->neck reference.
    static SkeletonSpec default7();

    void validate() const;  // bones must form a tree rooted at hip_index, J >= 2
};

// 2J joint coordinates, laid out (x1,y1,...,xJ,yJ), normalized image space.
struct PoseVector {
    std::vector<double> coords;

    PoseVector() = default;
    explicit PoseVector(int joints) : coords(static_cast<std::size_t>(2 * joints), 0.0) {}
    explicit PoseVector(std::vector<double> c) : coords(std::move(c)) {}

    int joints() const { return static_cast<int>(coords.size() / 2); }
    double x(int j) const { return coords[static_cast<std::size_t>(2 * j)]; }
    double y(int j) const { return coords[static_cast<std::size_t>(2 * j) + 1]; }
    void set(int j, double px, double py) {
        coords[static_cast<std::size_t>(2 * j)] = px;
        coords[static_cast<std::size_t>(2 * j) + 1] = py;
    }
    Tensor as_tensor() const { return Tensor({static_cast<int>(coords.size())}, coords); }

    friend bool operator==(const PoseVector& a, const PoseVector& b) { return a.coords == b.coords; }
};

// Index into the class vocabulary with its one-hot encoding.
struct ClassId {
    int index = 0;
    int count = 1;

    Tensor one_hot() const;

    friend bool operator==(const ClassId& a, const ClassId& b) { return a.index == b.index && a.count == b.count; }
};

struct PoseSequence {
    std::vector<PoseVector> frames;
    ClassId label;
    double fps = 16.0;

    int length() const { return static_cast<int>(frames.size()); }
    int joints() const { return frames.empty() ? 0 : frames.front().joints(); }

    friend bool operator==(const PoseSequence& a, const PoseSequence& b) {
        return a.frames == b.frames && a.label == b.label && a.fps == b.fps;
    }
};

double pose_distance(const PoseVector& a, const PoseVector& b);  // L2

// Translate the hip to the origin and uniformly scale the reference bone to
// length 1. Throws on a zero-length reference bone.
PoseVector normalize_pose(const PoseVector& raw, const SkeletonSpec& spec);

}  // namespace poseforge
