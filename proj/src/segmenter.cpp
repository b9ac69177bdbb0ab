#include "temple/segmenter.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "temple/error.hpp"

namespace temple {

const char* to_string(VideoVerdict v) {
  switch (v) {
    case VideoVerdict::kKeep: return "keep";
    case VideoVerdict::kRejectLongScene: return "reject_long_scene";
    case VideoVerdict::kRejectEmpty: return "reject_empty";
  }
  return "unknown";
}

double frame_difference(const Frame& a, const Frame& b) {
  if (a.width != b.width || a.height != b.height) return 1.0;
  std::int64_t sum = 0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i) {
    sum += std::abs(static_cast<int>(a.rgb[i]) - static_cast<int>(b.rgb[i]));
  }
  return static_cast<double>(sum) / (static_cast<double>(a.rgb.size()) * 255.0);
}

namespace {

SceneBoundary make_scene(int id, int start, int end, double fps) {
  SceneBoundary s;
  s.scene_id = id;
  s.start_frame = start;
  s.end_frame = end;
  s.start_s = start / fps;
  s.end_s = (end + 1) / fps;
  return s;
}

}  // namespace

std::vector<SceneBoundary> detect_boundaries(const FrameSequence& seq, const SegmenterConfig& cfg) {
  if (seq.frames.empty()) throw InputError("detect_boundaries: empty frame sequence");

  std::vector<SceneBoundary> scenes;
  int start = 0;
  for (std::size_t i = 1; i < seq.frames.size(); ++i) {
    if (frame_difference(seq.frames[i - 1], seq.frames[i]) >= cfg.cut_threshold) {
      scenes.push_back(make_scene(static_cast<int>(scenes.size()), start, static_cast<int>(i) - 1, seq.sample_fps));
      start = static_cast<int>(i);
    }
  }
  scenes.push_back(
      make_scene(static_cast<int>(scenes.size()), start, static_cast<int>(seq.frames.size()) - 1, seq.sample_fps));
  return scenes;
}

std::vector<SceneBoundary> import_boundaries(const std::filesystem::path& path, const FrameSequence& seq) {
  std::ifstream in(path);
  if (!in) throw InputError("boundary file not found: " + path.string());

  std::vector<SceneBoundary> scenes;
  std::string line;
  int lineno = 0;
  const int last_frame = static_cast<int>(seq.frames.size()) - 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    int start = 0, end = 0;
    char extra = 0;
    if (std::sscanf(line.c_str(), "%d,%d%c", &start, &end, &extra) != 2) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": expected `start_frame,end_frame`");
    }
    if (start < 0 || end > last_frame) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": span " + std::to_string(start) + ".." +
                       std::to_string(end) + " outside frame range 0.." + std::to_string(last_frame));
    }
    if (start > end) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": start_frame > end_frame");
    }
    if (!scenes.empty() && start <= scenes.back().end_frame) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": scene " +
                       std::to_string(scenes.size()) + " overlaps scene " + std::to_string(scenes.size() - 1));
    }
    scenes.push_back(make_scene(static_cast<int>(scenes.size()), start, end, seq.sample_fps));
  }
  return scenes;
}

bool is_monochrome(const FrameSequence& seq, const SceneBoundary& scene, const SegmenterConfig& cfg) {
  if (scene.start_frame < 0 || scene.end_frame >= static_cast<int>(seq.frames.size()) ||
      scene.start_frame > scene.end_frame) {
    throw InputError("is_monochrome: scene span invalid for sequence");
  }
  for (int i = scene.start_frame; i <= scene.end_frame; ++i) {
    const Frame& f = seq.frames[i];
    const double n = static_cast<double>(f.pixel_count());
    for (int c = 0; c < 3; ++c) {
      double sum = 0.0, sum2 = 0.0;
      for (std::size_t p = c; p < f.rgb.size(); p += 3) {
        const double v = f.rgb[p];
        sum += v;
        sum2 += v * v;
      }
      const double mean = sum / n;
      const double var = std::max(0.0, sum2 / n - mean * mean);
      if (std::sqrt(var) > cfg.monochrome_stddev_eps) return false;
    }
  }
  return true;
}

SceneFilterOutcome filter_scenes(const FrameSequence& seq, const std::vector<SceneBoundary>& scenes,
                                 const SegmenterConfig& cfg) {
  SceneFilterOutcome out;
  for (const SceneBoundary& s : scenes) {
    if (scene_duration_s(s) > cfg.max_scene_s) {
      out.video_verdict = VideoVerdict::kRejectLongScene;
      out.kept_scenes.clear();
      out.dropped_monochrome = 0;
      return out;
    }
  }
  for (const SceneBoundary& s : scenes) {
    if (scene_duration_s(s) < cfg.min_monochrome_s && is_monochrome(seq, s, cfg)) {
      ++out.dropped_monochrome;
      continue;
    }
    out.kept_scenes.push_back(s);
  }
  out.video_verdict = out.kept_scenes.empty() ? VideoVerdict::kRejectEmpty : VideoVerdict::kKeep;
  return out;
}

}  // namespace temple
