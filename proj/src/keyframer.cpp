#include "temple/keyframer.hpp"

#include <algorithm>
#include <vector>

#include "temple/error.hpp"

namespace temple {

const char* to_string(KeyframeAnchor a) {
  return a == KeyframeAnchor::kOneThird ? "one_third" : "two_thirds";
}

KeyframeAnchor anchor_from_string(const std::string& s) {
  if (s == "one_third") return KeyframeAnchor::kOneThird;
  if (s == "two_thirds") return KeyframeAnchor::kTwoThirds;
  throw InputError("unknown keyframe anchor: " + s);
}

double laplacian_variance(const Frame& frame) {
  if (frame.width < 3 || frame.height < 3) {
    throw InputError("laplacian_variance: frame smaller than 3x3");
  }

  std::vector<double> gray(static_cast<std::size_t>(frame.width) * frame.height);
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      const std::uint8_t* px = frame.pixel(x, y);
      gray[static_cast<std::size_t>(y) * frame.width + x] = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
    }
  }

  const auto at = [&](int x, int y) { return gray[static_cast<std::size_t>(y) * frame.width + x]; };
  double sum = 0.0, sum2 = 0.0;
  const std::int64_t n = static_cast<std::int64_t>(frame.width - 2) * (frame.height - 2);
  for (int y = 1; y < frame.height - 1; ++y) {
    for (int x = 1; x < frame.width - 1; ++x) {
      const double resp = at(x, y - 1) + at(x, y + 1) + at(x - 1, y) + at(x + 1, y) - 4.0 * at(x, y);
      sum += resp;
      sum2 += resp * resp;
    }
  }
  const double mean = sum / n;
  return std::max(0.0, sum2 / n - mean * mean);
}

std::pair<int, int> anchor_indices(const SceneBoundary& scene) {
  const int len = scene.end_frame - scene.start_frame + 1;
  const int a1 = std::clamp(scene.start_frame + len / 3, scene.start_frame, scene.end_frame);
  const int a2 = std::clamp(scene.start_frame + 2 * len / 3, scene.start_frame, scene.end_frame);
  return {a1, a2};
}

namespace {

Keyframe pick_sharpest(const FrameSequence& seq, const Clip& clip, int anchor_frame, KeyframeAnchor tag,
                       int window) {
  const int lo = std::max(clip.scene.start_frame, anchor_frame - window);
  const int hi = std::min(clip.scene.end_frame, anchor_frame + window);
  Keyframe best;
  best.clip_id = clip.clip_id;
  best.anchor = tag;
  best.frame_index = lo;
  best.sharpness = laplacian_variance(seq.frames[lo]);
  for (int i = lo + 1; i <= hi; ++i) {
    const double s = laplacian_variance(seq.frames[i]);
    if (s > best.sharpness) {
      best.sharpness = s;
      best.frame_index = i;
    }
  }
  return best;
}

}  // namespace

std::pair<Keyframe, Keyframe> select_keyframes(const FrameSequence& seq, const Clip& clip,
                                               const KeyframerConfig& cfg) {
  if (clip.scene.start_frame < 0 || clip.scene.end_frame >= static_cast<int>(seq.frames.size()) ||
      clip.scene.start_frame > clip.scene.end_frame) {
    throw InputError("select_keyframes: clip scene invalid for sequence");
  }
  const auto [a1, a2] = anchor_indices(clip.scene);
  return {pick_sharpest(seq, clip, a1, KeyframeAnchor::kOneThird, cfg.window_frames),
          pick_sharpest(seq, clip, a2, KeyframeAnchor::kTwoThirds, cfg.window_frames)};
}

}  // namespace temple
