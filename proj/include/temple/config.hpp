#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "temple/captioner.hpp"
#include "temple/dpo.hpp"
#include "temple/grouper.hpp"
#include "temple/ingest.hpp"
#include "temple/keyframer.hpp"
#include "temple/perturber.hpp"
#include "temple/segmenter.hpp"

namespace temple {

struct PathsConfig {
  std::string manifest;        // video manifest (JSONL); required by pipeline commands
  std::string out_dir = "out";
  std::string boundaries_dir;  // optional per-video `<video_id>.csv` scene sidecars
  std::string embeddings_dir;  // optional per-video `<video_id>.txt` embedding sidecars
};

struct PerturberConfig {
  std::vector<int> levels = {16, 8, 4, 2};
  std::vector<PerturbationKind> kinds = {PerturbationKind::kDrop, PerturbationKind::kShuffle,
                                         PerturbationKind::kReverse};
  std::uint64_t global_seed = 1;
  int variants_per_kind = 1;  // independent seeded variants per video x kind x level
};

struct CaptionerSection {
  BackendConfig backend;
  PromptTemplates templates;
  std::string instruction =
      "Describe this video in detail, paying close attention to the order of events.";
};

struct PairsetSection {
  int budget_per_stage = 500;
};

struct PipelineConfig {
  PathsConfig paths;
  IngestConfig ingest;
  SegmenterConfig segmenter;
  GrouperConfig grouper;
  KeyframerConfig keyframer;
  PerturberConfig perturber;
  CaptionerSection captioner;
  PairsetSection pairset;
  DpoConfig dpo;
};

PipelineConfig default_config();

// Strict schema: unknown keys are rejected with their section named, values
// are range-checked (levels distinct and >= 2, tau in (0,1], ...).
PipelineConfig config_from_json(const nlohmann::json& j, const std::string& origin);
PipelineConfig load_config(const std::filesystem::path& path);

// Canonical form: every field present, fixed order. The 16-hex-digit FNV-1a
// hash of this rendering is embedded in manifests and reports.
nlohmann::ordered_json config_to_json(const PipelineConfig& cfg);
std::string config_hash(const PipelineConfig& cfg);

}  // namespace temple
