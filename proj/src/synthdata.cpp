#include "poseforge/synthdata.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

namespace poseforge {

namespace {

constexpr double kPi = 3.14159265358979323846;

double track_value(const CoordTrack& track, double t01, double amp, double freq, double phase) {
    switch (track.kind) {
        case TrackKind::Hold: return track.base;
        case TrackKind::Sine: return track.base + amp * std::sin(2.0 * kPi * freq * t01 + phase);
        case TrackKind::Ramp: return track.base + amp * t01;
        case TrackKind::RampHold:
            return track.base + amp * std::min(t01 / std::max(track.ramp_fraction, 1e-9), 1.0);
    }
    return track.base;
}

CoordTrack hold(double base) { return {base, TrackKind::Hold, {}, {}, {}, 0.5}; }

CoordTrack sine(double base, double amp_lo, double amp_hi, double f_lo, double f_hi) {
    return {base, TrackKind::Sine, {amp_lo, amp_hi}, {f_lo, f_hi}, {0.0, 2.0 * kPi}, 0.5};
}

CoordTrack ramp(double base, double amp_lo, double amp_hi) {
    return {base, TrackKind::Ramp, {amp_lo, amp_hi}, {1.0, 1.0}, {0.0, 0.0}, 0.5};
}

CoordTrack ramp_hold(double base, double amp_lo, double amp_hi, double frac) {
    return {base, TrackKind::RampHold, {amp_lo, amp_hi}, {1.0, 1.0}, {0.0, 0.0}, frac};
}

}  // namespace

std::vector<PoseSequence> Dataset::train_view() const {
    std::vector<PoseSequence> out;
    for (std::size_t i = 0; i < sequences.size(); ++i)
        if (split[i] == Split::Train) out.push_back(sequences[i]);
    return out;
}

std::vector<PoseSequence> Dataset::test_view() const {
    std::vector<PoseSequence> out;
    for (std::size_t i = 0; i < sequences.size(); ++i)
        if (split[i] == Split::Test) out.push_back(sequences[i]);
    return out;
}

std::vector<MotionClassSpec> default_class_specs(const SkeletonSpec& skeleton) {
    if (skeleton.joint_count != 7)
        throw std::invalid_argument("default class specs are written for the 7-joint skeleton");
    // Joint order: hip, neck, head, lhand, rhand, lfoot, rfoot. y grows downward,
    // the base figure is upright with the torso at unit length.
    auto base_tracks = [] {
        std::vector<CoordTrack> t(14);
        t[0] = hold(0.0);    t[1] = hold(0.0);     // hip
        t[2] = hold(0.0);    t[3] = hold(-1.0);    // neck
        t[4] = hold(0.0);    t[5] = hold(-0.85);   // head
        t[6] = hold(-0.55);  t[7] = hold(-0.55);   // lhand
        t[8] = hold(0.55);   t[9] = hold(-0.55);   // rhand
        t[10] = hold(-0.22); t[11] = hold(0.75);   // lfoot
        t[12] = hold(0.22);  t[13] = hold(0.75);   // rfoot
        return t;
    };

    std::vector<MotionClassSpec> specs;

    MotionClassSpec march{"march", base_tracks(), {0.0, 0.004}};
    march.tracks[6] = sine(-0.55, 0.10, 0.18, 2.0, 3.0);   // hands swing in x
    march.tracks[8] = sine(0.55, 0.10, 0.18, 2.0, 3.0);
    march.tracks[11] = sine(0.75, 0.10, 0.16, 2.0, 3.0);   // feet lift in y
    march.tracks[13] = sine(0.75, 0.10, 0.16, 2.0, 3.0);
    specs.push_back(std::move(march));

    MotionClassSpec wave{"wave", base_tracks(), {0.0, 0.004}};
    wave.tracks[8] = sine(0.45, 0.05, 0.10, 2.0, 4.0);     // raised arm, small x wobble
    wave.tracks[9] = sine(-0.80, 0.08, 0.14, 2.0, 4.0);    // waving in y
    specs.push_back(std::move(wave));

    MotionClassSpec crouch{"crouch", base_tracks(), {0.0, 0.004}};
    crouch.tracks[7] = ramp(-0.55, 0.22, 0.30);            // hands sink
    crouch.tracks[9] = ramp(-0.55, 0.22, 0.30);
    crouch.tracks[11] = ramp(0.75, -0.32, -0.24);          // feet rise toward the hip
    crouch.tracks[13] = ramp(0.75, -0.32, -0.24);
    specs.push_back(std::move(crouch));

    MotionClassSpec crouch_hold{"crouch-hold", base_tracks(), {0.0, 0.004}};
    crouch_hold.tracks[6] = ramp_hold(-0.55, 0.22, 0.30, 0.3);   // hands tuck inward
    crouch_hold.tracks[8] = ramp_hold(0.55, -0.30, -0.22, 0.3);
    crouch_hold.tracks[11] = ramp_hold(0.75, -0.32, -0.24, 0.3);
    crouch_hold.tracks[13] = ramp_hold(0.75, -0.32, -0.24, 0.3);
    specs.push_back(std::move(crouch_hold));

    MotionClassSpec sway{"sway", base_tracks(), {0.0, 0.004}};
    sway.tracks[2] = sine(0.0, 0.18, 0.28, 1.0, 2.0);      // torso oscillates in x
    sway.tracks[4] = sine(0.0, 0.22, 0.32, 1.0, 2.0);
    sway.tracks[6] = sine(-0.55, 0.10, 0.18, 1.0, 2.0);
    sway.tracks[8] = sine(0.55, 0.10, 0.18, 1.0, 2.0);
    specs.push_back(std::move(sway));

    return specs;
}

Dataset generate_dataset(const std::vector<MotionClassSpec>& specs, const SkeletonSpec& skeleton,
                         int per_class, int T, std::uint64_t seed) {
    if (per_class < 2) throw std::invalid_argument("generate_dataset: need at least 2 sequences per class");
    if (T < 1) throw std::invalid_argument("generate_dataset: T must be at least 1");
    skeleton.validate();

    Rng rng(seed);
    Dataset ds;
    const int C = static_cast<int>(specs.size());
    for (const auto& spec : specs) ds.classes.push_back(spec.name);

    const int n_test = std::max(1, per_class / 5);
    for (int c = 0; c < C; ++c) {
        const MotionClassSpec& spec = specs[static_cast<std::size_t>(c)];
        if (static_cast<int>(spec.tracks.size()) != 2 * skeleton.joint_count)
            throw std::invalid_argument("class " + spec.name + " has wrong track count");
        for (int s = 0; s < per_class; ++s) {
            std::vector<double> amp(spec.tracks.size()), freq(spec.tracks.size()), phase(spec.tracks.size());
            for (std::size_t k = 0; k < spec.tracks.size(); ++k) {
                amp[k] = spec.tracks[k].amplitude.sample(rng);
                freq[k] = spec.tracks[k].frequency.sample(rng);
                phase[k] = spec.tracks[k].phase.sample(rng);
            }
            double noise_amp = spec.frame_noise.sample(rng);

            PoseSequence seq;
            seq.label = ClassId{c, C};
            seq.fps = 16.0;
            for (int t = 0; t < T; ++t) {
                double t01 = T > 1 ? static_cast<double>(t) / (T - 1) : 0.0;
                PoseVector raw(skeleton.joint_count);
                for (std::size_t k = 0; k < spec.tracks.size(); ++k)
                    raw.coords[k] = track_value(spec.tracks[k], t01, amp[k], freq[k], phase[k]) +
                                    noise_amp * (2.0 * rng.uniform01() - 1.0);
                // The hip and reference bone stay pinned so the figures are
                // already normalized up to rounding.
                PoseVector norm = normalize_pose(raw, skeleton);
                for (double v : norm.coords)
                    if (v < -1.0 || v > 1.0)
                        throw std::logic_error("class " + spec.name + " leaves [-1,1] after normalization");
                seq.frames.push_back(std::move(norm));
            }
            ds.sequences.push_back(std::move(seq));
            ds.split.push_back(s >= per_class - n_test ? Split::Test : Split::Train);
        }
    }
    return ds;
}

PoseSequence subsample_fps(const PoseSequence& seq, double target_fps) {
    if (target_fps > seq.fps) throw std::invalid_argument("subsample_fps: target fps above source fps");
    if (target_fps <= 0) throw std::invalid_argument("subsample_fps: target fps must be positive");
    PoseSequence out;
    out.label = seq.label;
    out.fps = target_fps;
    const double stride = seq.fps / target_fps;
    for (int k = 0;; ++k) {
        int idx = static_cast<int>(std::llround(k * stride));
        if (idx >= seq.length()) break;
        out.frames.push_back(seq.frames[static_cast<std::size_t>(idx)]);
    }
    return out;
}

void save_sequences(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
        const PoseSequence& seq = ds.sequences[i];
        nlohmann::json rec;
        rec["class"] = ds.classes.at(static_cast<std::size_t>(seq.label.index));
        rec["fps"] = seq.fps;
        nlohmann::json frames = nlohmann::json::array();
        for (const PoseVector& f : seq.frames) frames.push_back(f.coords);
        rec["frames"] = std::move(frames);
        rec["split"] = ds.split[i] == Split::Test ? "test" : "train";
        out << rec.dump() << "\n";
    }
    if (!out) throw std::runtime_error("write failure on " + path);
}

Dataset load_sequences(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);

    Dataset ds;
    std::map<std::string, int> class_index;
    std::string line;
    int line_no = 0;
    struct Pending {
        PoseSequence seq;
        std::string cls;
        Split split;
    };
    std::vector<Pending> pending;

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw std::runtime_error(path + " line " + std::to_string(line_no) + ": " + e.what());
        }
        auto fail = [&](const std::string& msg) {
            throw std::runtime_error(path + " line " + std::to_string(line_no) + ": " + msg);
        };
        if (!rec.contains("class") || !rec["class"].is_string()) fail("missing string field 'class'");
        if (!rec.contains("fps") || !rec["fps"].is_number()) fail("missing numeric field 'fps'");
        if (!rec.contains("frames") || !rec["frames"].is_array()) fail("missing array field 'frames'");
        if (rec["frames"].empty()) fail("empty frame list");

        Pending p;
        p.cls = rec["class"].get<std::string>();
        p.seq.fps = rec["fps"].get<double>();
        p.split = Split::Train;
        if (rec.contains("split")) {
            std::string s = rec["split"].get<std::string>();
            if (s != "train" && s != "test") fail("split must be 'train' or 'test'");
            p.split = s == "test" ? Split::Test : Split::Train;
        }

        int J = -1;
        int frame_no = 0;
        for (const auto& frame : rec["frames"]) {
            if (!frame.is_array()) fail("frame " + std::to_string(frame_no) + " is not an array");
            std::vector<double> coords;
            for (const auto& v : frame) {
                if (!v.is_number()) fail("frame " + std::to_string(frame_no) + " has a non-numeric value");
                double d = v.get<double>();
                if (!std::isfinite(d)) fail("frame " + std::to_string(frame_no) + " has a non-finite value");
                coords.push_back(d);
            }
            if (coords.size() % 2 != 0) fail("frame " + std::to_string(frame_no) + " has odd coordinate count");
            if (J < 0)
                J = static_cast<int>(coords.size() / 2);
            else if (static_cast<int>(coords.size() / 2) != J)
                fail("frame " + std::to_string(frame_no) + " joint count differs from frame 0");
            p.seq.frames.push_back(PoseVector(std::move(coords)));
            ++frame_no;
        }
        if (!class_index.count(p.cls)) {
            class_index[p.cls] = static_cast<int>(ds.classes.size());
            ds.classes.push_back(p.cls);
        }
        pending.push_back(std::move(p));
    }
    if (pending.empty()) throw std::runtime_error(path + ": no sequences found");

    const int C = static_cast<int>(ds.classes.size());
    for (Pending& p : pending) {
        p.seq.label = ClassId{class_index.at(p.cls), C};
        ds.sequences.push_back(std::move(p.seq));
        ds.split.push_back(p.split);
    }
    return ds;
}

void ensure_both_splits(Dataset& ds) {
    const int C = static_cast<int>(ds.classes.size());
    for (int c = 0; c < C; ++c) {
        bool has_test = false, has_train = false;
        for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
            if (ds.sequences[i].label.index != c) continue;
            (ds.split[i] == Split::Test ? has_test : has_train) = true;
        }
        if (!has_test) {
            for (std::size_t i = ds.sequences.size(); i-- > 0;) {
                if (ds.sequences[i].label.index == c && ds.split[i] == Split::Train) {
                    ds.split[i] = Split::Test;
                    break;
                }
            }
        }
    }
}

}  // namespace poseforge
