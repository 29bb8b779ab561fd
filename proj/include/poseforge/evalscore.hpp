#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "poseforge/adam.hpp"
#include "poseforge/mlp.hpp"
#include "poseforge/synthdata.hpp"

namespace poseforge {

// Two-stream action classifier over pose sequences: one MLP on poses, one
// on frame deltas, fused by averaging class log-probabilities.
struct ActionClassifier {
    Mlp pose_stream;    // [2J, hidden, C]
    Mlp motion_stream;  // [2J, hidden, C]
    int J = 7;
    int C = 1;
};

struct ClassifierTrainConfig {
    int hidden = 64;
    int epochs = 60;
    int batch = 64;
    AdamHyper adam{1e-3, 0.9, 0.999, 1e-8, 1.0, 0};
};

ActionClassifier train_classifier(const Dataset& ds, std::uint64_t seed,
                                  const ClassifierTrainConfig& cfg = {});

// Pose-stream class distribution for a single frame.
Tensor frame_class_dist(const ActionClassifier& clf, const PoseVector& pose);
// Fused two-stream distribution for a whole sequence.
Tensor video_class_dist(const ActionClassifier& clf, const PoseSequence& seq);
double video_accuracy(const ActionClassifier& clf, const std::vector<PoseSequence>& seqs);

// exp(mean KL(p(y|x) || p(y))) per split; returns (mean, std) across splits.
std::pair<double, double> inception_score(const std::vector<Tensor>& dists, int splits);

struct ScoreReport {
    double frame_is_mean = 0.0, frame_is_std = 0.0;
    double video_is_mean = 0.0, video_is_std = 0.0;
    std::vector<double> per_timestep;  // frame-IS curve, length T
};

ScoreReport score_sequences(const std::vector<PoseSequence>& seqs, const ActionClassifier& clf,
                            int splits = 10);

}  // namespace poseforge
