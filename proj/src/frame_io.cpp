#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "temple/error.hpp"
#include "temple/ingest.hpp"

namespace fs = std::filesystem;

namespace temple {

Frame load_image_rgb(const fs::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw InputError("cannot decode image: " + path.string());

  Frame f;
  f.width = bgr.cols;
  f.height = bgr.rows;
  f.rgb.resize(static_cast<std::size_t>(f.width) * f.height * 3);
  for (int y = 0; y < f.height; ++y) {
    const cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < f.width; ++x) {
      std::uint8_t* px = f.pixel(x, y);
      px[0] = row[x][2];
      px[1] = row[x][1];
      px[2] = row[x][0];
    }
  }
  return f;
}

namespace {

cv::Mat to_bgr(const Frame& frame) {
  cv::Mat bgr(frame.height, frame.width, CV_8UC3);
  for (int y = 0; y < frame.height; ++y) {
    cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < frame.width; ++x) {
      const std::uint8_t* px = frame.pixel(x, y);
      row[x] = cv::Vec3b(px[2], px[1], px[0]);
    }
  }
  return bgr;
}

}  // namespace

void save_image_rgb(const fs::path& path, const Frame& frame) {
  if (!cv::imwrite(path.string(), to_bgr(frame))) {
    throw InputError("cannot write image: " + path.string());
  }
}

std::vector<std::uint8_t> encode_png(const Frame& frame) {
  std::vector<std::uint8_t> buf;
  if (!cv::imencode(".png", to_bgr(frame), buf)) throw InputError("png encoding failed");
  return buf;
}

}  // namespace temple
