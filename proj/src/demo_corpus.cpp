#include "temple/demo_corpus.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "temple/config.hpp"
#include "temple/error.hpp"
#include "temple/frame.hpp"
#include "temple/ingest.hpp"
#include "temple/rng.hpp"

namespace temple {

namespace {

namespace fs = std::filesystem;

constexpr int kW = 32;
constexpr int kH = 24;
constexpr double kFps = 2.0;
constexpr int kNoise = 10;  // uniform +-10 per pixel and channel

struct Rgb {
  int r, g, b;
};

// Adjacent palette entries differ by >= 380 total channel units, so scene
// cuts clear the 0.30 threshold even against worst-case noise.
constexpr std::array<Rgb, 8> kPalette = {{{230, 40, 40},
                                          {40, 40, 230},
                                          {40, 230, 40},
                                          {230, 40, 230},
                                          {230, 230, 40},
                                          {40, 230, 230},
                                          {230, 120, 40},
                                          {120, 40, 230}}};
constexpr Rgb kGray = {200, 200, 200};

Frame noisy_frame(const std::string& video_id, int scene, int frame_idx, const Rgb& base) {
  SplitMix64 rng(fnv1a64(video_id + "/" + std::to_string(scene) + "/" + std::to_string(frame_idx)));
  Frame f;
  f.width = kW;
  f.height = kH;
  f.rgb.resize(static_cast<std::size_t>(kW) * kH * 3);
  for (std::size_t i = 0; i < f.rgb.size(); i += 3) {
    const int channels[3] = {base.r, base.g, base.b};
    for (int c = 0; c < 3; ++c) {
      const int n = static_cast<int>(rng.below(2 * kNoise + 1)) - kNoise;
      f.rgb[i + static_cast<std::size_t>(c)] =
          static_cast<std::uint8_t>(std::min(255, std::max(0, channels[c] + n)));
    }
  }
  return f;
}

Frame solid_frame(const Rgb& base) {
  return make_frame(kW, kH, static_cast<std::uint8_t>(base.r), static_cast<std::uint8_t>(base.g),
                    static_cast<std::uint8_t>(base.b));
}

// One scene = a run of frames sharing a base color.
struct SceneSpecDemo {
  Rgb base;
  int frames = 6;
  bool solid = false;
};

void write_video(const fs::path& frames_root, const std::string& video_id,
                 const std::vector<SceneSpecDemo>& scenes) {
  const fs::path dir = frames_root / video_id;
  fs::create_directories(dir);
  int frame_idx = 0;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    for (int k = 0; k < scenes[s].frames; ++k) {
      const Frame f = scenes[s].solid
                          ? solid_frame(scenes[s].base)
                          : noisy_frame(video_id, static_cast<int>(s), frame_idx, scenes[s].base);
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%06d.png", frame_idx);
      save_image_rgb(dir / name, f);
      ++frame_idx;
    }
  }
}

// The fragmented video alternates between a low and a high color lattice;
// any low/high pair is >= 345 channel units apart and every color maps to a
// unique histogram-bin triple, so it splits into 33 one-clip groups.
Rgb lattice_color(int k) {
  const int i = k / 2;
  const int base = (k % 2 == 0) ? 20 : 185;
  return {base + 25 * (i % 3), base + 25 * ((i / 3) % 3), base + 25 * ((i / 9) % 3)};
}

struct VideoPlan {
  std::string video_id;
  std::string bucket;
  std::vector<SceneSpecDemo> scenes;
};

std::vector<VideoPlan> corpus_plan() {
  std::vector<VideoPlan> plan;

  auto good_scenes = [&](bool with_gray_insert) {
    std::vector<SceneSpecDemo> scenes;
    for (int k = 0; k < 6; ++k) scenes.push_back({kPalette[static_cast<std::size_t>(k)], 6, false});
    if (with_gray_insert) {
      // A 0.5 s solid scene: monochrome, but long enough to survive the
      // short-transition filter.
      scenes.insert(scenes.begin() + 2, {kGray, 1, true});
    }
    return scenes;
  };

  for (int i = 0; i < 12; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "good_%02d", i);
    plan.push_back({id, i < 5 ? "demo-a" : "demo-b", good_scenes(i == 0)});
  }
  for (int i = 0; i < 5; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "long_%02d", i);
    // 36 frames, one base color: a single 18 s scene.
    plan.push_back({id, i < 3 ? "demo-a" : "demo-b",
                    {{kPalette[static_cast<std::size_t>(i % 8)], 36, false}}});
  }
  for (int i = 0; i < 2; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "sparse_%02d", i);
    std::vector<SceneSpecDemo> scenes;
    for (int k = 0; k < 3; ++k) scenes.push_back({kPalette[static_cast<std::size_t>(k)], 6, false});
    plan.push_back({id, i == 0 ? "demo-a" : "demo-b", scenes});
  }
  {
    std::vector<SceneSpecDemo> scenes;
    for (int k = 0; k < 33; ++k) scenes.push_back({lattice_color(k), 2, true});
    plan.push_back({"complex_00", "demo-a", scenes});
  }
  return plan;
}

}  // namespace

DemoPaths write_demo_corpus(const fs::path& dir) {
  const fs::path root = fs::absolute(dir);
  const fs::path frames_root = root / "frames";
  fs::create_directories(frames_root);

  const std::vector<VideoPlan> plan = corpus_plan();

  const fs::path manifest_path = root / "manifest.jsonl";
  {
    std::ofstream out(manifest_path, std::ios::binary);
    if (!out) throw InputError("cannot open demo manifest for writing: " + manifest_path.string());
    for (const VideoPlan& v : plan) {
      write_video(frames_root, v.video_id, v.scenes);
      int frames = 0;
      for (const SceneSpecDemo& s : v.scenes) frames += s.frames;
      nlohmann::ordered_json j;
      j["video_id"] = v.video_id;
      j["source"] = (frames_root / v.video_id).string();
      j["duration_s"] = frames / kFps;
      j["bucket"] = v.bucket;
      out << j.dump() << "\n";
    }
    if (!out) throw InputError("failed writing demo manifest: " + manifest_path.string());
  }

  PipelineConfig cfg;
  cfg.paths.manifest = manifest_path.string();
  cfg.paths.out_dir = (root / "out").string();
  cfg.ingest.min_duration_s = 5.0;
  cfg.ingest.max_duration_s = 60.0;

  const fs::path config_path = root / "config.json";
  {
    std::ofstream out(config_path, std::ios::binary);
    if (!out) throw InputError("cannot open demo config for writing: " + config_path.string());
    out << config_to_json(cfg).dump(2) << "\n";
    if (!out) throw InputError("failed writing demo config: " + config_path.string());
  }

  return {root, manifest_path, config_path};
}

}  // namespace temple
