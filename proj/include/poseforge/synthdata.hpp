#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "poseforge/rng.hpp"
#include "poseforge/skeleton.hpp"

namespace poseforge {

enum class Split { Train, Test };

struct Dataset {
    std::vector<PoseSequence> sequences;
    std::vector<Split> split;  // parallel to sequences
    std::vector<std::string> classes;

    std::vector<PoseSequence> train_view() const;
    std::vector<PoseSequence> test_view() const;

    friend bool operator==(const Dataset& a, const Dataset& b) {
        return a.sequences == b.sequences && a.split == b.split && a.classes == b.classes;
    }
};

enum class TrackKind { Hold, Sine, Ramp, RampHold };

struct JitterRange {
    double lo = 0.0;
    double hi = 0.0;
    double sample(Rng& rng) const { return lo + (hi - lo) * rng.uniform01(); }
};

// One coordinate trajectory: base value plus a parameterized primitive whose
// amplitude/frequency/phase are drawn per sequence from jitter ranges.
struct CoordTrack {
    double base = 0.0;
    TrackKind kind = TrackKind::Hold;
    JitterRange amplitude{0.0, 0.0};
    JitterRange frequency{1.0, 1.0};  // cycles over the sequence
    JitterRange phase{0.0, 0.0};      // radians
    double ramp_fraction = 0.5;       // RampHold ramps over this fraction, then holds
};

struct MotionClassSpec {
    std::string name;
    std::vector<CoordTrack> tracks;   // 2J, (x,y) interleaved
    JitterRange frame_noise{0.0, 0.0};  // iid per-frame coordinate noise amplitude
};

// march, wave, crouch, crouch-hold, sway for the default 7-joint skeleton.
std::vector<MotionClassSpec> default_class_specs(const SkeletonSpec& skeleton);

// Deterministic procedural dataset; every sequence is normalized and its
// coordinates stay within [-1,1].
Dataset generate_dataset(const std::vector<MotionClassSpec>& specs, const SkeletonSpec& skeleton,
                         int per_class, int T, std::uint64_t seed);

// Keeps frames at nearest-index stride fps/target_fps.
PoseSequence subsample_fps(const PoseSequence& seq, double target_fps);

// Line-delimited records: {"class": str, "fps": real, "frames": [[...],...]}
// plus a "split" tag on save. The loader accepts records without the tag
// (external pose ingestion) and defaults them to the training split.
void save_sequences(const Dataset& ds, const std::string& path);
Dataset load_sequences(const std::string& path);

// Moves the last sequence of any test-less class to the test split.
void ensure_both_splits(Dataset& ds);

}  // namespace poseforge
