#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace temple {

// One sampled video frame: 8-bit RGB, row-major, 3 bytes per pixel.
struct Frame {
  int index = 0;
  double timestamp_s = 0.0;
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  std::uint8_t* pixel(int x, int y) { return rgb.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
  const std::uint8_t* pixel(int x, int y) const {
    return rgb.data() + 3 * (static_cast<std::size_t>(y) * width + x);
  }
  std::int64_t pixel_count() const { return static_cast<std::int64_t>(width) * height; }
};

struct FrameSequence {
  std::string video_id;
  double sample_fps = 2.0;
  std::vector<Frame> frames;
};

inline Frame make_frame(int width, int height, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  Frame f;
  f.width = width;
  f.height = height;
  f.rgb.resize(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i + 2 < f.rgb.size(); i += 3) {
    f.rgb[i] = r;
    f.rgb[i + 1] = g;
    f.rgb[i + 2] = b;
  }
  return f;
}

}  // namespace temple
