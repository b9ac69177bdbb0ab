#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "temple/perturber.hpp"

namespace temple {

struct PreferencePair {
  std::string pair_id;
  std::string video_id;
  std::string instruction;
  std::string chosen;
  std::string rejected;
  PerturbationKind kind = PerturbationKind::kDrop;
  int r = 2;
  std::uint64_t seed = 0;
  std::string created_by;
};

std::string make_pair_id(const std::string& video_id, PerturbationKind kind, int r, std::uint64_t seed);

// Wire format, field order fixed: pair_id, video_id, instruction, chosen,
// rejected, kind, r, seed (decimal string to survive 64-bit range), created_by.
nlohmann::ordered_json pair_record(const PreferencePair& pair);
PreferencePair pair_from_record(const nlohmann::json& record);

struct CurriculumStage {
  int stage_index = 0;
  int r = 0;
  std::string dataset_path;
  int steps = 500;
};

// Stages sorted by strictly decreasing r; duplicate or invalid levels are
// rejected. dataset_path_for(level) names the per-level split file.
std::vector<CurriculumStage> make_schedule(std::vector<int> levels, int budget_per_stage,
                                           const std::filesystem::path& dataset_dir);
std::string dataset_filename(int level);

enum class FunnelStep { kOriginal, kStep1, kStep2 };
const char* to_string(FunnelStep step);
FunnelStep funnel_step_from_string(const std::string& s);

struct FunnelEvent {
  std::string video_id;
  std::string bucket;
  FunnelStep step = FunnelStep::kOriginal;
  bool passed = true;
  std::string reason;
};

void write_funnel_events(const std::filesystem::path& path, const std::vector<FunnelEvent>& events);
std::vector<FunnelEvent> read_funnel_events(const std::filesystem::path& path);

struct FunnelCounts {
  std::size_t original = 0;
  std::size_t after_step1 = 0;
  std::size_t after_step2 = 0;
};

struct FunnelReport {
  std::map<std::string, FunnelCounts> buckets;  // keyed by source bucket, sorted
  FunnelCounts total;
  std::map<int, std::size_t> pairs_per_level;
  std::string generated_at;
  std::string config_hash;
};

// Aggregates pass counts per bucket and step. Throws InvariantError on
// inconsistent logs: duplicate (video, step) events, step events for videos
// that already failed, or counts that grow across steps.
FunnelReport funnel_stats(const std::vector<FunnelEvent>& events);

std::string render_funnel_table(const FunnelReport& report);
nlohmann::ordered_json funnel_report_json(const FunnelReport& report);

// RFC 3339 UTC "now"; honors SOURCE_DATE_EPOCH so archived reports can be
// reproduced byte-for-byte.
std::string utc_timestamp_now();

}  // namespace temple
