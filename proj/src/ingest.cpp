#include "temple/ingest.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "temple/error.hpp"
#include "temple/subprocess.hpp"

namespace fs = std::filesystem;

namespace temple {

std::vector<VideoEntry> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("manifest not found: " + path.string());

  std::vector<VideoEntry> entries;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": malformed manifest line: " + e.what());
    }
    VideoEntry e;
    try {
      e.video_id = j.at("video_id").get<std::string>();
      e.source = j.at("source").get<std::string>();
      e.duration_s = j.at("duration_s").get<double>();
      if (j.contains("fps_native")) e.fps_native = j.at("fps_native").get<double>();
      if (j.contains("bucket")) e.bucket = j.at("bucket").get<std::string>();
    } catch (const nlohmann::json::exception& e2) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": malformed manifest line: " + e2.what());
    }
    if (e.video_id.empty())
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": empty video_id");
    if (!(e.duration_s > 0.0))
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": duration_s must be > 0 for video " + e.video_id);
    if (!seen.insert(e.video_id).second)
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": duplicate video_id: " + e.video_id);
    entries.push_back(std::move(e));
  }
  return entries;
}

bool within_duration_window(const VideoEntry& entry, const IngestConfig& cfg) {
  return entry.duration_s >= cfg.min_duration_s && entry.duration_s <= cfg.max_duration_s;
}

std::string duration_bucket(const VideoEntry& entry) {
  if (entry.bucket) return *entry.bucket;
  const int m = static_cast<int>(entry.duration_s / 60.0);
  return std::to_string(m) + "-" + std::to_string(m + 1) + "m";
}

namespace {

// Largest n >= 0 with n^2 * den <= num; exact for the ranges we see.
int floor_sqrt_ratio(std::int64_t num, std::int64_t den) {
  using u128 = unsigned __int128;
  std::int64_t n = static_cast<std::int64_t>(std::sqrt(static_cast<double>(num) / static_cast<double>(den)));
  n = std::max<std::int64_t>(n - 2, 0);
  while (static_cast<u128>(n + 1) * static_cast<u128>(n + 1) * static_cast<u128>(den) <=
         static_cast<u128>(num)) {
    ++n;
  }
  return static_cast<int>(n);
}

double bilinear_sample(const Frame& src, double sx, double sy, int channel) {
  sx = std::clamp(sx, 0.0, static_cast<double>(src.width - 1));
  sy = std::clamp(sy, 0.0, static_cast<double>(src.height - 1));
  const int x0 = static_cast<int>(sx);
  const int y0 = static_cast<int>(sy);
  const int x1 = std::min(x0 + 1, src.width - 1);
  const int y1 = std::min(y0 + 1, src.height - 1);
  const double fx = sx - x0;
  const double fy = sy - y0;
  const double v00 = src.pixel(x0, y0)[channel];
  const double v10 = src.pixel(x1, y0)[channel];
  const double v01 = src.pixel(x0, y1)[channel];
  const double v11 = src.pixel(x1, y1)[channel];
  return (v00 * (1 - fx) + v10 * fx) * (1 - fy) + (v01 * (1 - fx) + v11 * fx) * fy;
}

}  // namespace

std::pair<int, int> scaled_dims(int width, int height, int max_pixels) {
  if (max_pixels < 1) throw InputError("max_pixels must be >= 1");
  const std::int64_t pixels = static_cast<std::int64_t>(width) * height;
  if (pixels <= max_pixels) return {width, height};
  // floor(s*w) = floor(sqrt(max_pixels * w / h)), likewise for h.
  int nw = floor_sqrt_ratio(static_cast<std::int64_t>(max_pixels) * width, height);
  int nh = floor_sqrt_ratio(static_cast<std::int64_t>(max_pixels) * height, width);
  return {std::max(nw, 1), std::max(nh, 1)};
}

Frame downscale_frame(const Frame& frame, int max_pixels) {
  const auto [nw, nh] = scaled_dims(frame.width, frame.height, max_pixels);
  if (nw == frame.width && nh == frame.height) return frame;

  Frame out;
  out.index = frame.index;
  out.timestamp_s = frame.timestamp_s;
  out.width = nw;
  out.height = nh;
  out.rgb.resize(static_cast<std::size_t>(nw) * nh * 3);
  const double xs = static_cast<double>(frame.width) / nw;
  const double ys = static_cast<double>(frame.height) / nh;
  for (int y = 0; y < nh; ++y) {
    for (int x = 0; x < nw; ++x) {
      const double sx = (x + 0.5) * xs - 0.5;
      const double sy = (y + 0.5) * ys - 0.5;
      std::uint8_t* dst = out.pixel(x, y);
      for (int c = 0; c < 3; ++c) {
        const double v = bilinear_sample(frame, sx, sy, c);
        dst[c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0l, 255l));
      }
    }
  }
  return out;
}

namespace {

FrameSequence frames_from_dir(const VideoEntry& entry, const fs::path& dir, const IngestConfig& cfg) {
  const auto files = list_frame_files(dir);
  if (files.empty()) throw InputError("no frames produced for video " + entry.video_id + " in " + dir.string());

  FrameSequence seq;
  seq.video_id = entry.video_id;
  seq.sample_fps = cfg.sample_fps;
  const int count = std::min<int>(static_cast<int>(files.size()), cfg.max_frames);
  seq.frames.reserve(count);
  for (int k = 0; k < count; ++k) {
    Frame f = load_image_rgb(files[k]);
    f = downscale_frame(f, cfg.max_pixels);
    f.index = k;
    f.timestamp_s = static_cast<double>(k) / cfg.sample_fps;
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

}  // namespace

FrameSequence sample_frames(const VideoEntry& entry, const IngestConfig& cfg) {
  if (!(cfg.sample_fps > 0)) throw InputError("sample_fps must be > 0");
  if (cfg.max_frames < 2) throw InputError("max_frames must be >= 2");

  const fs::path source(entry.source);
  if (fs::is_directory(source)) return frames_from_dir(entry, source, cfg);

  if (cfg.decoder_command.empty()) {
    throw InputError("source is not a frame directory and no decoder_command is configured: " + entry.source);
  }
  if (!fs::exists(source)) throw InputError("source not found: " + entry.source);

  TempDir outdir("temple-decode");
  std::string cmd = cfg.decoder_command;
  replace_all(cmd, "{input}", shell_quote(source.string()));
  replace_all(cmd, "{fps}", format_double(cfg.sample_fps));
  replace_all(cmd, "{outdir}", shell_quote(outdir.path().string()));

  const SubprocessResult res = run_shell(cmd);
  if (res.exit_code != 0) {
    throw InputError("decoder failed for video " + entry.video_id + " (exit " + std::to_string(res.exit_code) +
                     "): " + res.stderr_text);
  }
  return frames_from_dir(entry, outdir.path(), cfg);
}

std::vector<fs::path> list_frame_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (int k = 0;; ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%06d", k);
    bool found = false;
    for (const char* ext : {".png", ".jpg"}) {
      fs::path p = dir / (std::string(name) + ext);
      if (fs::exists(p)) {
        files.push_back(p);
        found = true;
        break;
      }
    }
    if (!found) break;
  }
  return files;
}

}  // namespace temple
