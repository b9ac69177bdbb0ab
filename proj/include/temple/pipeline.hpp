#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "temple/captioner.hpp"
#include "temple/config.hpp"
#include "temple/frame.hpp"
#include "temple/pairset.hpp"

namespace temple {

// One clip of a video that survived selection, with its keyframe picks.
struct CuratedClip {
  int clip_id = 0;
  int start_frame = 0;
  int end_frame = 0;
  double start_s = 0.0;
  double end_s = 0.0;
  int keyframe_one_third = 0;
  int keyframe_two_thirds = 0;
};

struct CuratedVideo {
  std::string video_id;
  std::string source;
  double duration_s = 0.0;
  std::string bucket;
  double sample_fps = 2.0;
  int frame_count = 0;
  int group_count = 0;
  std::vector<CuratedClip> clips;
};

struct FailureRecord {
  std::string video_id;
  std::string stage;
  std::string message;
};

struct SelectResult {
  std::vector<CuratedVideo> curated;   // manifest order
  std::vector<FunnelEvent> events;     // manifest order, one group per video
  std::vector<FailureRecord> failures;
};

// Steps 1-3 of selection over every manifest entry: duration window, scene
// segmentation + filters, similarity-group gate, then keyframe extraction.
// Per-video errors become failure records; the run continues.
SelectResult run_select(const PipelineConfig& cfg, int jobs);

void write_curated(const std::filesystem::path& path, const std::vector<CuratedVideo>& videos);
std::vector<CuratedVideo> read_curated(const std::filesystem::path& path);

struct CaptionedVideo {
  std::string video_id;
  std::vector<ClipCaption> clip_captions;
  std::string video_caption;
};

// Contextualized captioning of one curated video: one backend call per clip
// plus one aggregation call.
CaptionedVideo caption_video(const CuratedVideo& video, const FrameSequence& seq, CaptionBackend& backend,
                             const BackendConfig& bcfg, const PromptTemplates& templates);

struct CaptionRunResult {
  std::vector<CaptionedVideo> captioned;
  std::vector<FailureRecord> failures;
};

// Captions every curated video (frames are re-sampled from the source).
CaptionRunResult run_caption(const PipelineConfig& cfg, const std::vector<CuratedVideo>& curated,
                             int jobs);

void write_captions(const std::filesystem::path& path, const std::vector<CaptionedVideo>& videos);
std::vector<CaptionedVideo> read_captions(const std::filesystem::path& path);

struct PlannedPair {
  std::string video_id;
  PerturbationKind kind = PerturbationKind::kDrop;
  int r = 2;
  int variant = 0;
  std::uint64_t seed = 0;
};

// The full video x kind x level x variant grid with derived seeds; what
// --dry-run prints and build_pairs executes.
std::vector<PlannedPair> plan_pairs(const PipelineConfig& cfg, const std::vector<CuratedVideo>& curated);

struct SkipRecord {
  std::string pair_id;
  std::string video_id;
  std::string reason;
};

struct BuildResult {
  std::map<int, std::vector<PreferencePair>, std::greater<int>> pairs_by_level;
  std::vector<SkipRecord> skips;
  std::vector<FailureRecord> failures;
};

BuildResult build_pairs(const PipelineConfig& cfg, const std::vector<CuratedVideo>& curated,
                        const std::vector<CaptionedVideo>& captioned, int jobs);

// Emits pairs_r<r>.jsonl per level plus manifest.json
// {"levels", "files", "counts", "config_hash"}; skips and failures land in
// sibling JSONL files.
void write_dataset(const std::filesystem::path& dataset_dir, const PipelineConfig& cfg,
                   const BuildResult& result);

void write_failures(const std::filesystem::path& path, const std::vector<FailureRecord>& failures);

// Re-checks every dataset invariant: manifest shape, per-file level purity,
// pair_id uniqueness and format, chosen != rejected, counts. Throws
// InvariantError naming the offending pair_id (InputError for unreadable
// files).
void validate_dataset(const std::filesystem::path& dataset_dir);

}  // namespace temple
