#pragma once

#include <utility>

#include "temple/frame.hpp"
#include "temple/grouper.hpp"

namespace temple {

enum class KeyframeAnchor { kOneThird, kTwoThirds };

const char* to_string(KeyframeAnchor a);
KeyframeAnchor anchor_from_string(const std::string& s);

struct Keyframe {
  int clip_id = 0;
  int frame_index = 0;
  KeyframeAnchor anchor = KeyframeAnchor::kOneThird;
  double sharpness = 0.0;
};

struct KeyframerConfig {
  int window_frames = 2;  // search radius around each anchor
};

// Sharpness score: grayscale the frame (Y = 0.299R + 0.587G + 0.114B),
// apply the 3x3 Laplacian kernel over interior pixels, return the
// population variance of the response. Constant frames score exactly 0.
double laplacian_variance(const Frame& frame);

// Anchor frames at one-third and two-thirds of the clip span.
std::pair<int, int> anchor_indices(const SceneBoundary& scene);

// For each anchor, the sharpest frame within +-window_frames (clamped to
// the scene); ties go to the smaller frame index.
std::pair<Keyframe, Keyframe> select_keyframes(const FrameSequence& seq, const Clip& clip,
                                               const KeyframerConfig& cfg);

}  // namespace temple
