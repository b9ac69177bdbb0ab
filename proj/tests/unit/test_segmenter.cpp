#include <array>
#include <vector>

#include "doctest.h"
#include "temple/error.hpp"
#include "temple/segmenter.hpp"
#include "temple/subprocess.hpp"

#include "helpers.hpp"

using namespace temple;
using testutil::solid_sequence;

namespace {

using Color = std::array<std::uint8_t, 3>;
constexpr Color kRed{200, 20, 20};
constexpr Color kBlue{20, 20, 200};
constexpr Color kGreen{20, 200, 20};

}  // namespace

TEST_SUITE("segmenter") {

TEST_CASE("frame_difference is the normalized mean absolute rgb gap") {
  const Frame black = make_frame(4, 4, 0, 0, 0);
  const Frame white = make_frame(4, 4, 255, 255, 255);
  CHECK(frame_difference(black, black) == 0.0);
  CHECK(frame_difference(black, white) == 1.0);

  // One channel shifted by 51 over the whole frame: 51/(3*255) per pixel triple.
  const Frame a = make_frame(4, 4, 100, 50, 50);
  const Frame b = make_frame(4, 4, 151, 50, 50);
  CHECK(frame_difference(a, b) == doctest::Approx(51.0 / 765.0));

  const Frame other = make_frame(5, 4, 0, 0, 0);
  CHECK(frame_difference(black, other) == 1.0);  // dimension mismatch counts as a full cut
}

TEST_CASE("detect_boundaries tiles the sequence with cuts at large differences") {
  const FrameSequence seq = solid_sequence("v", 2.0, {kRed, kRed, kRed, kBlue, kBlue, kGreen});
  const SegmenterConfig cfg;
  const auto scenes = detect_boundaries(seq, cfg);
  REQUIRE(scenes.size() == 3);
  CHECK(scenes[0].scene_id == 0);
  CHECK(scenes[0].start_frame == 0);
  CHECK(scenes[0].end_frame == 2);
  CHECK(scenes[1].start_frame == 3);
  CHECK(scenes[1].end_frame == 4);
  CHECK(scenes[2].start_frame == 5);
  CHECK(scenes[2].end_frame == 5);

  // Scene spans tile the full frame range with no gaps.
  CHECK(scenes[0].start_s == 0.0);
  CHECK(scenes[0].end_s == doctest::Approx(1.5));
  CHECK(scenes[1].start_s == doctest::Approx(1.5));
  CHECK(scenes[2].end_s == doctest::Approx(3.0));
}

TEST_CASE("detect_boundaries declares a cut exactly at the threshold") {
  // 115 units on one channel = 115/765 ~ 0.1503 difference.
  FrameSequence seq = solid_sequence("v", 2.0, {{100, 0, 0}, {215, 0, 0}});
  SegmenterConfig cfg;
  cfg.cut_threshold = 115.0 / 765.0;
  CHECK(detect_boundaries(seq, cfg).size() == 2);  // >= threshold cuts
  cfg.cut_threshold = 116.0 / 765.0;
  CHECK(detect_boundaries(seq, cfg).size() == 1);
}

TEST_CASE("detect_boundaries handles trivial sequences") {
  const FrameSequence one = solid_sequence("v", 2.0, {kRed});
  const auto scenes = detect_boundaries(one, SegmenterConfig{});
  REQUIRE(scenes.size() == 1);
  CHECK(scenes[0].start_frame == 0);
  CHECK(scenes[0].end_frame == 0);
  CHECK(scenes[0].end_s == 0.5);  // a single frame at 2 FPS lasts half a second

  CHECK_THROWS_AS(detect_boundaries(FrameSequence{}, SegmenterConfig{}), InputError);
}

TEST_CASE("a 34-frame single-scene video at 2 FPS spans 17 s") {
  std::vector<std::array<std::uint8_t, 3>> colors(34, kRed);
  const FrameSequence seq = solid_sequence("v", 2.0, colors);
  const auto scenes = detect_boundaries(seq, SegmenterConfig{});
  REQUIRE(scenes.size() == 1);
  CHECK(scene_duration_s(scenes[0]) == doctest::Approx(17.0));
}

TEST_CASE("import_boundaries validates spans against the sequence") {
  TempDir dir("temple-test");
  const FrameSequence seq = solid_sequence("v", 2.0, {kRed, kRed, kBlue, kBlue, kGreen, kGreen});
  const auto p = dir.path() / "v.csv";

  SUBCASE("valid file with a gap between scenes") {
    testutil::write_text(p, "0,1\n4,5\n");
    const auto scenes = import_boundaries(p, seq);
    REQUIRE(scenes.size() == 2);
    CHECK(scenes[0].end_frame == 1);
    CHECK(scenes[1].start_frame == 4);
    CHECK(scenes[1].start_s == 2.0);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(import_boundaries(dir.path() / "nope.csv", seq), InputError);
  }
  SUBCASE("malformed line") {
    testutil::write_text(p, "0,1\nbogus\n");
    CHECK_THROWS_WITH_AS(import_boundaries(p, seq), doctest::Contains(":2:"), InputError);
  }
  SUBCASE("span outside the frame range") {
    testutil::write_text(p, "0,6\n");
    CHECK_THROWS_WITH_AS(import_boundaries(p, seq), doctest::Contains("outside frame range"), InputError);
  }
  SUBCASE("inverted span") {
    testutil::write_text(p, "3,1\n");
    CHECK_THROWS_AS(import_boundaries(p, seq), InputError);
  }
  SUBCASE("overlapping scenes") {
    testutil::write_text(p, "0,2\n2,4\n");
    CHECK_THROWS_WITH_AS(import_boundaries(p, seq), doctest::Contains("overlaps"), InputError);
  }
}

TEST_CASE("is_monochrome compares per-channel stddev to the epsilon") {
  SegmenterConfig cfg;  // eps = 4.0
  FrameSequence seq = solid_sequence("v", 2.0, {kRed});
  SceneBoundary scene;
  scene.start_frame = 0;
  scene.end_frame = 0;
  CHECK(is_monochrome(seq, scene, cfg));

  // Half the pixels differ by 8 on one channel: stddev is exactly 4.
  Frame& f = seq.frames[0];
  for (int y = 0; y < f.height; ++y) {
    for (int x = 0; x < f.width; ++x) {
      if ((x + y) % 2 == 0) f.pixel(x, y)[0] = kRed[0] + 8;
    }
  }
  CHECK(is_monochrome(seq, scene, cfg));  // boundary is inclusive

  cfg.monochrome_stddev_eps = 3.9;
  CHECK_FALSE(is_monochrome(seq, scene, cfg));

  scene.end_frame = 7;
  CHECK_THROWS_AS(is_monochrome(seq, scene, cfg), InputError);
}

TEST_CASE("filter_scenes drops short monochrome scenes") {
  // 10 FPS: a single-frame scene lasts 0.1 s < 0.2 s minimum.
  const FrameSequence seq = solid_sequence("v", 10.0, {kRed, kRed, {128, 128, 128}, kBlue, kBlue});
  const auto scenes = detect_boundaries(seq, SegmenterConfig{});
  REQUIRE(scenes.size() == 3);

  const auto out = filter_scenes(seq, scenes, SegmenterConfig{});
  CHECK(out.video_verdict == VideoVerdict::kKeep);
  CHECK(out.dropped_monochrome == 1);
  REQUIRE(out.kept_scenes.size() == 2);
  CHECK(out.kept_scenes[0].start_frame == 0);
  CHECK(out.kept_scenes[1].start_frame == 3);
}

TEST_CASE("filter_scenes keeps short scenes that are not monochrome") {
  FrameSequence seq = solid_sequence("v", 10.0, {kRed, kRed, {128, 128, 128}, kBlue, kBlue});
  seq.frames[2] = testutil::noise_frame(8, 6, 5);  // busy single-frame scene
  seq.frames[2].index = 2;

  auto scene = [](int id, int s, int e) {
    SceneBoundary b;
    b.scene_id = id;
    b.start_frame = s;
    b.end_frame = e;
    b.start_s = s / 10.0;
    b.end_s = (e + 1) / 10.0;
    return b;
  };
  const std::vector<SceneBoundary> scenes = {scene(0, 0, 1), scene(1, 2, 2), scene(2, 3, 4)};
  const auto out = filter_scenes(seq, scenes, SegmenterConfig{});
  CHECK(out.dropped_monochrome == 0);
  CHECK(out.kept_scenes.size() == scenes.size());
}

TEST_CASE("filter_scenes rejects the whole video on an over-long scene") {
  std::vector<std::array<std::uint8_t, 3>> colors(34, kRed);  // 17 s at 2 FPS
  colors.push_back(kBlue);
  const FrameSequence seq = solid_sequence("v", 2.0, colors);
  const auto scenes = detect_boundaries(seq, SegmenterConfig{});
  REQUIRE(scenes.size() == 2);

  const auto out = filter_scenes(seq, scenes, SegmenterConfig{});  // max_scene_s = 16
  CHECK(out.video_verdict == VideoVerdict::kRejectLongScene);
  CHECK(out.kept_scenes.empty());
  CHECK(out.dropped_monochrome == 0);
}

TEST_CASE("filter_scenes rejects a video left with nothing") {
  const FrameSequence seq = solid_sequence("v", 10.0, {kRed});
  const auto scenes = detect_boundaries(seq, SegmenterConfig{});
  const auto out = filter_scenes(seq, scenes, SegmenterConfig{});
  CHECK(out.video_verdict == VideoVerdict::kRejectEmpty);
  CHECK(out.kept_scenes.empty());
}

TEST_CASE("filter_scenes is idempotent on its kept scenes") {
  const FrameSequence seq = solid_sequence("v", 10.0, {kRed, kRed, {128, 128, 128}, kBlue, kBlue});
  const auto scenes = detect_boundaries(seq, SegmenterConfig{});
  const auto once = filter_scenes(seq, scenes, SegmenterConfig{});
  const auto twice = filter_scenes(seq, once.kept_scenes, SegmenterConfig{});
  CHECK(twice.video_verdict == VideoVerdict::kKeep);
  CHECK(twice.dropped_monochrome == 0);
  REQUIRE(twice.kept_scenes.size() == once.kept_scenes.size());
  for (std::size_t i = 0; i < once.kept_scenes.size(); ++i) {
    CHECK(twice.kept_scenes[i].start_frame == once.kept_scenes[i].start_frame);
    CHECK(twice.kept_scenes[i].end_frame == once.kept_scenes[i].end_frame);
  }
}

TEST_CASE("verdict names are stable") {
  CHECK(std::string(to_string(VideoVerdict::kKeep)) == "keep");
  CHECK(std::string(to_string(VideoVerdict::kRejectLongScene)) == "reject_long_scene");
  CHECK(std::string(to_string(VideoVerdict::kRejectEmpty)) == "reject_empty");
}

}  // TEST_SUITE
