#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "poseforge/evalscore.hpp"
#include "poseforge/inverter.hpp"
#include "poseforge/pose_gan.hpp"
#include "poseforge/seq_gan.hpp"
#include "poseforge/skel2img.hpp"

namespace poseforge {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One bag of dimensions and per-stage settings shared by every subcommand.
// Loaded from a JSON config file; individual CLI flags override fields.
struct RunConfig {
    int J = 7;
    int m = 8;
    int n = 64;
    int T = 16;
    int C = 5;
    int width = 32;
    int height = 32;
    std::uint64_t seed = 1;

    int per_class = 40;
    int splits = 10;

    WganTrainConfig pose;
    SeqTrainConfig seq;
    S2iTrainConfig s2i;
    InversionConfig inversion;
    ClassifierTrainConfig classifier;

    static RunConfig load(const std::string& path);  // JSON; missing fields keep defaults
    void validate() const;                           // throws ConfigError on inconsistent dims

    // Cross-checks a loaded model against the configured dimensions.
    void expect(bool ok, const std::string& what) const {
        if (!ok) throw ConfigError("config mismatch: " + what);
    }
};

}  // namespace poseforge
