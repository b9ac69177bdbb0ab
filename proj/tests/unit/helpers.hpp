#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "temple/frame.hpp"
#include "temple/rng.hpp"

namespace testutil {

inline void write_text(const std::filesystem::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary);
  out << body;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Gray checkerboard: `amplitude` and 0 alternating per pixel.
inline temple::Frame checker_frame(int w, int h, std::uint8_t amplitude) {
  temple::Frame f = temple::make_frame(w, h, 0, 0, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if ((x + y) % 2 == 0) {
        auto* px = f.pixel(x, y);
        px[0] = px[1] = px[2] = amplitude;
      }
    }
  }
  return f;
}

inline temple::Frame noise_frame(int w, int h, std::uint64_t seed) {
  temple::SplitMix64 rng(seed);
  temple::Frame f = temple::make_frame(w, h, 0, 0, 0);
  for (auto& b : f.rgb) b = static_cast<std::uint8_t>(rng.below(256));
  return f;
}

inline temple::FrameSequence solid_sequence(const std::string& video_id, double fps,
                                            const std::vector<std::array<std::uint8_t, 3>>& colors,
                                            int w = 8, int h = 6) {
  temple::FrameSequence seq;
  seq.video_id = video_id;
  seq.sample_fps = fps;
  for (std::size_t i = 0; i < colors.size(); ++i) {
    temple::Frame f = temple::make_frame(w, h, colors[i][0], colors[i][1], colors[i][2]);
    f.index = static_cast<int>(i);
    f.timestamp_s = static_cast<double>(i) / fps;
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

}  // namespace testutil
