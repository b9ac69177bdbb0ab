#pragma once

#include <filesystem>
#include <string>

namespace temple {

struct DemoPaths {
  std::filesystem::path root;
  std::filesystem::path manifest;
  std::filesystem::path config;
};

// Writes a fully synthetic 20-video corpus (32x24 px frame directories, 2
// FPS) with engineered outcomes: 12 videos survive selection, 5 fail the
// scene filters (an 18 s single scene), 2 fail the group gate as too sparse
// (3 scenes) and 1 as too fragmented (33 scenes). Buckets demo-a/demo-b
// split 10/7/5 and 10/8/7 across the funnel. Also emits a ready-to-run
// config next to the manifest.
DemoPaths write_demo_corpus(const std::filesystem::path& dir);

}  // namespace temple
