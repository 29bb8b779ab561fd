#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "poseforge/evalscore.hpp"
#include "poseforge/pose_gan.hpp"
#include "poseforge/seq_gan.hpp"
#include "poseforge/skel2img.hpp"

namespace poseforge {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Binary model container: "PFG1" magic, format version, model kind tag,
// dimension header, little-endian f64 parameter payload, trailing CRC-32.
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;
    enum Kind : std::uint32_t { PoseGan = 1, SeqGan = 2, Skel2Img = 3, Classifier = 4 };

    std::uint32_t kind = 0;
    std::vector<std::uint32_t> dims;
    std::vector<double> payload;
};

void write_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint read_checkpoint(const std::string& path);  // validates magic, version, checksum

// Typed wrappers. Loaders rebuild the architecture from the dim header and
// fail with CheckpointError on any mismatch.
void save_pose_gan(const std::string& path, const SinglePoseGenerator& g0, const PoseCritic& d0);
std::pair<SinglePoseGenerator, PoseCritic> load_pose_gan(const std::string& path);

void save_seq_gan(const std::string& path, const SequenceGenerator& gps, const SequenceDiscriminator& dps);
std::pair<SequenceGenerator, SequenceDiscriminator> load_seq_gan(const std::string& path);

void save_skel2img(const std::string& path, const TransformerF& f);
TransformerF load_skel2img(const std::string& path);

void save_classifier(const std::string& path, const ActionClassifier& clf);
ActionClassifier load_classifier(const std::string& path);

}  // namespace poseforge
