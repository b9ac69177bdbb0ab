#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "temple/frame.hpp"

namespace temple {

struct VideoEntry {
  std::string video_id;
  std::string source;  // frame directory or media path handed to the decoder
  double duration_s = 0.0;
  std::optional<double> fps_native;
  std::optional<std::string> bucket;  // funnel row label; derived from duration when absent
};

struct IngestConfig {
  double sample_fps = 2.0;
  int max_pixels = 90'000;
  int max_frames = 100;
  double min_duration_s = 60.0;
  double max_duration_s = 180.0;
  // Subprocess template with {input}, {fps}, {outdir} placeholders. Empty
  // means frame-directory sources only; no codec runs in-process.
  std::string decoder_command;
};

// Line-delimited manifest, one JSON object per line:
//   {"video_id": str, "source": str, "duration_s": float}
// Optional keys: fps_native, bucket. Duplicate ids and malformed lines are
// rejected with the offending line number.
std::vector<VideoEntry> load_manifest(const std::filesystem::path& path);

bool within_duration_window(const VideoEntry& entry, const IngestConfig& cfg);

// Funnel row label: explicit manifest bucket if present, else a whole-minute
// range ("1-2m" for 60 <= duration < 120).
std::string duration_bucket(const VideoEntry& entry);

// Largest (w, h) with w <= s*width, h <= s*height for s = sqrt(max_pixels /
// (width*height)), computed in integer arithmetic so the floor never drifts
// with double rounding. Identity when already under budget; dims clamped
// to >= 1.
std::pair<int, int> scaled_dims(int width, int height, int max_pixels);

// Bilinear downscale to scaled_dims. Frames already under budget pass
// through untouched.
Frame downscale_frame(const Frame& frame, int max_pixels);

FrameSequence sample_frames(const VideoEntry& entry, const IngestConfig& cfg);

// -- image and directory helpers (OpenCV-backed) --

Frame load_image_rgb(const std::filesystem::path& path);
void save_image_rgb(const std::filesystem::path& path, const Frame& frame);
std::vector<std::uint8_t> encode_png(const Frame& frame);

// Files named frame_%06d.png (or .jpg), consecutive from 0.
std::vector<std::filesystem::path> list_frame_files(const std::filesystem::path& dir);

}  // namespace temple
