#pragma once

#include <filesystem>
#include <vector>

#include "temple/frame.hpp"

namespace temple {

// A detected scene: inclusive frame span plus the matching time span.
// end_s counts the full duration of the last frame, so a one-frame scene at
// 2 FPS lasts 0.5 s.
struct SceneBoundary {
  int scene_id = 0;
  int start_frame = 0;
  int end_frame = 0;
  double start_s = 0.0;
  double end_s = 0.0;
};

inline double scene_duration_s(const SceneBoundary& s) { return s.end_s - s.start_s; }

struct SegmenterConfig {
  double min_monochrome_s = 0.2;
  double max_scene_s = 16.0;
  double cut_threshold = 0.30;          // normalized frame-difference score
  double monochrome_stddev_eps = 4.0;   // per-channel stddev bound, 8-bit units
};

enum class VideoVerdict { kKeep, kRejectLongScene, kRejectEmpty };

const char* to_string(VideoVerdict v);

struct SceneFilterOutcome {
  std::vector<SceneBoundary> kept_scenes;
  int dropped_monochrome = 0;
  VideoVerdict video_verdict = VideoVerdict::kKeep;
};

// Mean absolute RGB difference normalized to [0, 1]. Frames of differing
// dimensions count as maximally different.
double frame_difference(const Frame& a, const Frame& b);

// Built-in detector: a cut is declared between adjacent frames whose
// difference score reaches cfg.cut_threshold; scenes are the maximal runs
// between cuts and tile the whole frame range.
std::vector<SceneBoundary> detect_boundaries(const FrameSequence& seq, const SegmenterConfig& cfg);

// Externally computed boundaries: lines of `start_frame,end_frame`
// (inclusive), validated against the sequence length.
std::vector<SceneBoundary> import_boundaries(const std::filesystem::path& path, const FrameSequence& seq);

// True iff every frame in the scene has per-channel pixel standard
// deviation <= cfg.monochrome_stddev_eps.
bool is_monochrome(const FrameSequence& seq, const SceneBoundary& scene, const SegmenterConfig& cfg);

// Drops monochrome scenes shorter than min_monochrome_s; rejects the whole
// video when any detected scene runs longer than max_scene_s, or when
// nothing remains.
SceneFilterOutcome filter_scenes(const FrameSequence& seq, const std::vector<SceneBoundary>& scenes,
                                 const SegmenterConfig& cfg);

}  // namespace temple
