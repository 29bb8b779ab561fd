#pragma once

#include <string>
#include <vector>

#include "poseforge/tensor.hpp"

namespace poseforge {

// Accepts {3,h,w} or {h,w} tensors with values in [0,1].
void write_png(const std::string& path, const Tensor& image);

// Animated grayscale GIF; delay in hundredths of a second. RGB frames are
// converted via the channel mean.
void write_gif(const std::string& path, const std::vector<Tensor>& frames, int delay_cs = 8);

}  // namespace poseforge
