#include "temple/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <functional>
#include <memory>
#include <set>
#include <thread>

#include "temple/error.hpp"
#include "temple/rng.hpp"
#include "temple/version.hpp"

namespace temple {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// Runs fn(i) for i in [0, n) on up to `jobs` threads. fn must confine its
// writes to slot i so the merged result is independent of scheduling.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (std::thread& t : pool) t.join();
}

fs::path sidecar_path(const std::string& dir, const std::string& video_id, const char* ext) {
  if (dir.empty()) return {};
  fs::path p = fs::path(dir) / (video_id + ext);
  if (!fs::exists(p)) return {};
  return p;
}

struct VideoOutcome {
  std::vector<FunnelEvent> events;
  std::vector<CuratedVideo> curated;  // 0 or 1 entries
  std::vector<FailureRecord> failures;
};

VideoOutcome select_one(const VideoEntry& entry, const PipelineConfig& cfg) {
  VideoOutcome out;
  const std::string bucket = duration_bucket(entry);
  auto event = [&](FunnelStep step, bool passed, const std::string& reason) {
    out.events.push_back({entry.video_id, bucket, step, passed, reason});
  };

  if (!within_duration_window(entry, cfg.ingest)) {
    event(FunnelStep::kOriginal, false, "duration_outside_window");
    return out;
  }
  event(FunnelStep::kOriginal, true, "");

  FrameSequence seq;
  try {
    seq = sample_frames(entry, cfg.ingest);

    std::vector<SceneBoundary> scenes;
    const fs::path boundary_file = sidecar_path(cfg.paths.boundaries_dir, entry.video_id, ".csv");
    if (!boundary_file.empty()) {
      scenes = import_boundaries(boundary_file, seq);
    } else {
      scenes = detect_boundaries(seq, cfg.segmenter);
    }

    const SceneFilterOutcome filtered = filter_scenes(seq, scenes, cfg.segmenter);
    if (filtered.video_verdict != VideoVerdict::kKeep) {
      event(FunnelStep::kStep1, false, to_string(filtered.video_verdict));
      return out;
    }
    event(FunnelStep::kStep1, true, "");

    const std::vector<Clip> clips = make_clips(filtered.kept_scenes);
    std::vector<ClipEmbedding> embeddings;
    const fs::path embedding_file = sidecar_path(cfg.paths.embeddings_dir, entry.video_id, ".txt");
    if (!embedding_file.empty()) {
      embeddings = import_embeddings(embedding_file, clips);
    } else {
      embeddings = builtin_embeddings(seq, clips);
    }

    const std::vector<ClipGroup> groups = group_clips(embeddings, cfg.grouper);
    const GroupGate gate = gate_group_count(groups, cfg.grouper);
    if (gate != GroupGate::kKeep) {
      event(FunnelStep::kStep2, false, to_string(gate));
      return out;
    }
    event(FunnelStep::kStep2, true, "");

    CuratedVideo video;
    video.video_id = entry.video_id;
    video.source = entry.source;
    video.duration_s = entry.duration_s;
    video.bucket = bucket;
    video.sample_fps = seq.sample_fps;
    video.frame_count = static_cast<int>(seq.frames.size());
    video.group_count = static_cast<int>(groups.size());
    for (const Clip& clip : clips) {
      const auto [kf1, kf2] = select_keyframes(seq, clip, cfg.keyframer);
      CuratedClip cc;
      cc.clip_id = clip.clip_id;
      cc.start_frame = clip.scene.start_frame;
      cc.end_frame = clip.scene.end_frame;
      cc.start_s = clip.scene.start_s;
      cc.end_s = clip.scene.end_s;
      cc.keyframe_one_third = kf1.frame_index;
      cc.keyframe_two_thirds = kf2.frame_index;
      video.clips.push_back(cc);
    }
    out.curated.push_back(std::move(video));
  } catch (const std::exception& e) {
    // The video is dropped, the corpus run is not.
    if (out.events.size() == 1) {
      event(FunnelStep::kStep1, false, "error");
    }
    out.failures.push_back({entry.video_id, "select", e.what()});
  }
  return out;
}

}  // namespace

SelectResult run_select(const PipelineConfig& cfg, int jobs) {
  if (cfg.paths.manifest.empty()) throw InputError("config has no paths.manifest");
  const std::vector<VideoEntry> entries = load_manifest(cfg.paths.manifest);

  std::vector<VideoOutcome> outcomes(entries.size());
  parallel_for(entries.size(), jobs,
               [&](std::size_t i) { outcomes[i] = select_one(entries[i], cfg); });

  SelectResult result;
  for (VideoOutcome& out : outcomes) {
    for (auto& e : out.events) result.events.push_back(std::move(e));
    for (auto& v : out.curated) result.curated.push_back(std::move(v));
    for (auto& f : out.failures) result.failures.push_back(std::move(f));
  }
  return result;
}

void write_curated(const fs::path& path, const std::vector<CuratedVideo>& videos) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open curated manifest for writing: " + path.string());
  for (const CuratedVideo& v : videos) {
    ordered_json j;
    j["video_id"] = v.video_id;
    j["source"] = v.source;
    j["duration_s"] = v.duration_s;
    j["bucket"] = v.bucket;
    j["sample_fps"] = v.sample_fps;
    j["frame_count"] = v.frame_count;
    j["group_count"] = v.group_count;
    ordered_json clips = ordered_json::array();
    for (const CuratedClip& c : v.clips) {
      clips.push_back({{"clip_id", c.clip_id},
                       {"start_frame", c.start_frame},
                       {"end_frame", c.end_frame},
                       {"start_s", c.start_s},
                       {"end_s", c.end_s},
                       {"keyframe_one_third", c.keyframe_one_third},
                       {"keyframe_two_thirds", c.keyframe_two_thirds}});
    }
    j["clips"] = clips;
    out << j.dump() << "\n";
  }
  if (!out) throw InputError("failed writing curated manifest: " + path.string());
}

std::vector<CuratedVideo> read_curated(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open curated manifest: " + path.string());
  std::vector<CuratedVideo> videos;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      CuratedVideo v;
      v.video_id = j.at("video_id").get<std::string>();
      v.source = j.at("source").get<std::string>();
      v.duration_s = j.at("duration_s").get<double>();
      v.bucket = j.at("bucket").get<std::string>();
      v.sample_fps = j.at("sample_fps").get<double>();
      v.frame_count = j.at("frame_count").get<int>();
      v.group_count = j.at("group_count").get<int>();
      for (const json& cj : j.at("clips")) {
        CuratedClip c;
        c.clip_id = cj.at("clip_id").get<int>();
        c.start_frame = cj.at("start_frame").get<int>();
        c.end_frame = cj.at("end_frame").get<int>();
        c.start_s = cj.at("start_s").get<double>();
        c.end_s = cj.at("end_s").get<double>();
        c.keyframe_one_third = cj.at("keyframe_one_third").get<int>();
        c.keyframe_two_thirds = cj.at("keyframe_two_thirds").get<int>();
        v.clips.push_back(c);
      }
      videos.push_back(std::move(v));
    } catch (const json::exception& e) {
      throw InputError(path.string() + ":" + std::to_string(line_no) +
                       ": bad curated record: " + e.what());
    }
  }
  return videos;
}

CaptionedVideo caption_video(const CuratedVideo& video, const FrameSequence& seq, CaptionBackend& backend,
                             const BackendConfig& bcfg, const PromptTemplates& templates) {
  if (video.clips.empty()) throw InputError("curated video " + video.video_id + " has no clips");

  auto clip_frames = [&](const CuratedClip& c) {
    const int n = static_cast<int>(seq.frames.size());
    if (c.keyframe_one_third >= n || c.keyframe_two_thirds >= n) {
      throw InputError("curated clip " + std::to_string(c.clip_id) + " of " + video.video_id +
                       " references frame beyond the sampled sequence (stale curated manifest?)");
    }
    ClipFrames cf;
    cf.clip_id = c.clip_id;
    cf.first = &seq.frames[static_cast<std::size_t>(c.keyframe_one_third)];
    cf.second = &seq.frames[static_cast<std::size_t>(c.keyframe_two_thirds)];
    return cf;
  };

  CaptionedVideo out;
  out.video_id = video.video_id;
  for (std::size_t i = 0; i < video.clips.size(); ++i) {
    std::optional<ClipFrames> prev;
    std::optional<std::string> prev_caption;
    if (i > 0) {
      prev = clip_frames(video.clips[i - 1]);
      prev_caption = out.clip_captions.back().text;
    }
    out.clip_captions.push_back(
        caption_clip(prev, clip_frames(video.clips[i]), prev_caption, backend, bcfg, templates));
  }
  out.video_caption = aggregate_captions(out.clip_captions, backend, bcfg, templates);
  return out;
}

CaptionRunResult run_caption(const PipelineConfig& cfg, const std::vector<CuratedVideo>& curated,
                             int jobs) {
  const std::unique_ptr<CaptionBackend> backend = make_backend(cfg.captioner.backend);
  const int effective_jobs = std::min(jobs, cfg.captioner.backend.concurrency_limit);

  struct Slot {
    std::vector<CaptionedVideo> ok;
    std::vector<FailureRecord> failed;
  };
  std::vector<Slot> slots(curated.size());
  parallel_for(curated.size(), effective_jobs, [&](std::size_t i) {
    const CuratedVideo& video = curated[i];
    try {
      VideoEntry entry;
      entry.video_id = video.video_id;
      entry.source = video.source;
      entry.duration_s = video.duration_s;
      const FrameSequence seq = sample_frames(entry, cfg.ingest);
      slots[i].ok.push_back(
          caption_video(video, seq, *backend, cfg.captioner.backend, cfg.captioner.templates));
    } catch (const std::exception& e) {
      slots[i].failed.push_back({video.video_id, "caption", e.what()});
    }
  });

  CaptionRunResult result;
  for (Slot& s : slots) {
    for (auto& v : s.ok) result.captioned.push_back(std::move(v));
    for (auto& f : s.failed) result.failures.push_back(std::move(f));
  }
  return result;
}

void write_captions(const fs::path& path, const std::vector<CaptionedVideo>& videos) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open captions file for writing: " + path.string());
  for (const CaptionedVideo& v : videos) {
    ordered_json j;
    j["video_id"] = v.video_id;
    ordered_json caps = ordered_json::array();
    for (const ClipCaption& c : v.clip_captions) {
      ordered_json cj;
      cj["clip_id"] = c.clip_id;
      cj["text"] = c.text;
      if (c.context_clip_id) {
        cj["context_clip_id"] = *c.context_clip_id;
      } else {
        cj["context_clip_id"] = nullptr;
      }
      caps.push_back(std::move(cj));
    }
    j["clip_captions"] = caps;
    j["video_caption"] = v.video_caption;
    out << j.dump() << "\n";
  }
  if (!out) throw InputError("failed writing captions file: " + path.string());
}

std::vector<CaptionedVideo> read_captions(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open captions file: " + path.string());
  std::vector<CaptionedVideo> videos;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      CaptionedVideo v;
      v.video_id = j.at("video_id").get<std::string>();
      for (const json& cj : j.at("clip_captions")) {
        ClipCaption c;
        c.clip_id = cj.at("clip_id").get<int>();
        c.text = cj.at("text").get<std::string>();
        if (!cj.at("context_clip_id").is_null()) {
          c.context_clip_id = cj.at("context_clip_id").get<int>();
        }
        v.clip_captions.push_back(std::move(c));
      }
      v.video_caption = j.at("video_caption").get<std::string>();
      videos.push_back(std::move(v));
    } catch (const json::exception& e) {
      throw InputError(path.string() + ":" + std::to_string(line_no) +
                       ": bad caption record: " + e.what());
    }
  }
  return videos;
}

std::vector<PlannedPair> plan_pairs(const PipelineConfig& cfg, const std::vector<CuratedVideo>& curated) {
  std::vector<int> levels = cfg.perturber.levels;
  std::sort(levels.begin(), levels.end(), std::greater<int>());

  std::vector<PlannedPair> plan;
  for (const CuratedVideo& video : curated) {
    for (const PerturbationKind kind : cfg.perturber.kinds) {
      for (const int r : levels) {
        for (int v = 0; v < cfg.perturber.variants_per_kind; ++v) {
          PlannedPair p;
          p.video_id = video.video_id;
          p.kind = kind;
          p.r = r;
          p.variant = v;
          const std::string label =
              v == 0 ? std::string(to_string(kind)) : std::string(to_string(kind)) + "/" + std::to_string(v);
          p.seed = derive_seed(cfg.perturber.global_seed, video.video_id, label, r);
          plan.push_back(std::move(p));
        }
      }
    }
  }
  return plan;
}

BuildResult build_pairs(const PipelineConfig& cfg, const std::vector<CuratedVideo>& curated,
                        const std::vector<CaptionedVideo>& captioned, int jobs) {
  const std::unique_ptr<CaptionBackend> backend = make_backend(cfg.captioner.backend);
  const int effective_jobs = std::min(jobs, cfg.captioner.backend.concurrency_limit);

  std::map<std::string, const CaptionedVideo*> captions_by_id;
  for (const CaptionedVideo& v : captioned) captions_by_id[v.video_id] = &v;

  std::vector<int> levels = cfg.perturber.levels;
  std::sort(levels.begin(), levels.end(), std::greater<int>());

  struct Slot {
    std::vector<PreferencePair> pairs;
    std::vector<SkipRecord> skips;
    std::vector<FailureRecord> failures;
  };
  std::vector<Slot> slots(curated.size());

  parallel_for(curated.size(), effective_jobs, [&](std::size_t i) {
    const CuratedVideo& video = curated[i];
    Slot& slot = slots[i];

    const auto it = captions_by_id.find(video.video_id);
    if (it == captions_by_id.end()) {
      slot.failures.push_back({video.video_id, "build-pairs", "no captions for video"});
      return;
    }
    const CaptionedVideo& cv = *it->second;

    std::vector<int> ids;
    ids.reserve(video.clips.size());
    for (const CuratedClip& c : video.clips) ids.push_back(c.clip_id);

    try {
      for (const PerturbationKind kind : cfg.perturber.kinds) {
        for (const int r : levels) {
          for (int v = 0; v < cfg.perturber.variants_per_kind; ++v) {
            const std::string label = v == 0 ? std::string(to_string(kind))
                                             : std::string(to_string(kind)) + "/" + std::to_string(v);
            PerturbationSpec spec;
            spec.kind = kind;
            spec.r = r;
            spec.seed = derive_seed(cfg.perturber.global_seed, video.video_id, label, r);

            const PerturbedSequence perturbed = apply_perturbation(ids, spec);
            const auto outcome =
                generate_response_pair(cv.clip_captions, cv.video_caption, perturbed,
                                       cfg.captioner.instruction, *backend, cfg.captioner.backend,
                                       cfg.captioner.templates);
            const std::string pair_id = make_pair_id(video.video_id, kind, r, spec.seed);
            if (std::holds_alternative<DegeneratePair>(outcome)) {
              slot.skips.push_back({pair_id, video.video_id, std::get<DegeneratePair>(outcome).reason});
              continue;
            }
            const ResponsePair& rp = std::get<ResponsePair>(outcome);
            PreferencePair pair;
            pair.pair_id = pair_id;
            pair.video_id = video.video_id;
            pair.instruction = rp.instruction;
            pair.chosen = rp.chosen;
            pair.rejected = rp.rejected;
            pair.kind = kind;
            pair.r = r;
            pair.seed = spec.seed;
            pair.created_by = pipeline_version();
            slot.pairs.push_back(std::move(pair));
          }
        }
      }
    } catch (const std::exception& e) {
      slot.pairs.clear();  // a failed video contributes no partial pairs
      slot.failures.push_back({video.video_id, "build-pairs", e.what()});
    }
  });

  BuildResult result;
  for (const int r : levels) result.pairs_by_level[r];  // every level gets a split
  for (Slot& slot : slots) {
    for (auto& p : slot.pairs) result.pairs_by_level[p.r].push_back(std::move(p));
    for (auto& s : slot.skips) result.skips.push_back(std::move(s));
    for (auto& f : slot.failures) result.failures.push_back(std::move(f));
  }
  for (auto& [r, pairs] : result.pairs_by_level) {
    std::stable_sort(pairs.begin(), pairs.end(), [](const PreferencePair& a, const PreferencePair& b) {
      if (a.video_id != b.video_id) return a.video_id < b.video_id;
      return std::string(to_string(a.kind)) < to_string(b.kind);
    });
  }
  return result;
}

void write_dataset(const fs::path& dataset_dir, const PipelineConfig& cfg, const BuildResult& result) {
  fs::create_directories(dataset_dir);

  ordered_json files = ordered_json::object();
  ordered_json counts = ordered_json::object();
  std::vector<int> levels;
  for (const auto& [r, pairs] : result.pairs_by_level) {
    levels.push_back(r);
    const std::string filename = dataset_filename(r);
    const fs::path path = dataset_dir / filename;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open dataset file for writing: " + path.string());
    for (const PreferencePair& pair : pairs) out << pair_record(pair).dump() << "\n";
    if (!out) throw InputError("failed writing dataset file: " + path.string());
    files[std::to_string(r)] = filename;
    counts[std::to_string(r)] = pairs.size();
  }

  ordered_json manifest;
  manifest["levels"] = levels;
  manifest["files"] = files;
  manifest["counts"] = counts;
  manifest["config_hash"] = config_hash(cfg);
  {
    const fs::path path = dataset_dir / "manifest.json";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open manifest for writing: " + path.string());
    out << manifest.dump(2) << "\n";
    if (!out) throw InputError("failed writing manifest: " + path.string());
  }

  {
    const fs::path path = dataset_dir / "skips.jsonl";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open skips file for writing: " + path.string());
    for (const SkipRecord& s : result.skips) {
      ordered_json j;
      j["pair_id"] = s.pair_id;
      j["video_id"] = s.video_id;
      j["reason"] = s.reason;
      out << j.dump() << "\n";
    }
  }
  write_failures(dataset_dir / "failures.jsonl", result.failures);
}

void write_failures(const fs::path& path, const std::vector<FailureRecord>& failures) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open failures file for writing: " + path.string());
  for (const FailureRecord& f : failures) {
    ordered_json j;
    j["video_id"] = f.video_id;
    j["stage"] = f.stage;
    j["message"] = f.message;
    out << j.dump() << "\n";
  }
}

void validate_dataset(const fs::path& dataset_dir) {
  const fs::path manifest_path = dataset_dir / "manifest.json";
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw InputError("cannot open dataset manifest: " + manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(manifest_path.string() + ": invalid JSON: " + e.what());
  }

  for (const char* key : {"levels", "files", "counts", "config_hash"}) {
    if (!manifest.contains(key)) {
      throw InvariantError("dataset manifest is missing key '" + std::string(key) + "'");
    }
  }
  if (manifest.size() != 4) throw InvariantError("dataset manifest has unexpected extra keys");
  const std::string hash = manifest.at("config_hash").get<std::string>();
  if (hash.size() != 16 || hash.find_first_not_of("0123456789abcdef") != std::string::npos) {
    throw InvariantError("dataset manifest config_hash is not 16 lowercase hex digits");
  }

  const std::vector<int> levels = manifest.at("levels").get<std::vector<int>>();
  if (levels.empty()) throw InvariantError("dataset manifest lists no levels");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] < 2) throw InvariantError("dataset level " + std::to_string(levels[i]) + " is < 2");
    if (i > 0 && levels[i] >= levels[i - 1]) {
      throw InvariantError("dataset manifest levels are not strictly decreasing");
    }
  }

  std::set<std::string> seen_pair_ids;
  std::set<int> level_set(levels.begin(), levels.end());
  for (const int r : levels) {
    const std::string key = std::to_string(r);
    if (!manifest.at("files").contains(key)) {
      throw InvariantError("dataset manifest has no file entry for level " + key);
    }
    if (!manifest.at("counts").contains(key)) {
      throw InvariantError("dataset manifest has no count entry for level " + key);
    }
    const fs::path path = dataset_dir / manifest.at("files").at(key).get<std::string>();
    std::ifstream file(path, std::ios::binary);
    if (!file) throw InputError("cannot open dataset file: " + path.string());

    std::size_t count = 0;
    std::string line;
    int line_no = 0;
    std::string prev_video_id;
    std::string prev_kind;
    while (std::getline(file, line)) {
      ++line_no;
      if (line.empty()) continue;
      json record;
      try {
        record = json::parse(line);
      } catch (const json::parse_error& e) {
        throw InvariantError(path.string() + ":" + std::to_string(line_no) + ": invalid JSON: " +
                             e.what());
      }
      const PreferencePair pair = pair_from_record(record);
      ++count;

      if (!seen_pair_ids.insert(pair.pair_id).second) {
        throw InvariantError("duplicate pair_id " + pair.pair_id);
      }
      if (pair.r != r) {
        throw InvariantError("pair " + pair.pair_id + " has r=" + std::to_string(pair.r) +
                             " inside the level-" + key + " file");
      }
      if (!level_set.count(pair.r)) {
        throw InvariantError("pair " + pair.pair_id + " uses unconfigured level " +
                             std::to_string(pair.r));
      }
      if (pair.chosen == pair.rejected) {
        throw InvariantError("pair " + pair.pair_id + " has chosen == rejected");
      }
      if (pair.chosen.empty() || pair.rejected.empty() || pair.instruction.empty()) {
        throw InvariantError("pair " + pair.pair_id + " has an empty text field");
      }
      if (pair.pair_id != make_pair_id(pair.video_id, pair.kind, pair.r, pair.seed)) {
        throw InvariantError("pair " + pair.pair_id + " does not match its own fields");
      }
      if (pair.created_by.empty()) {
        throw InvariantError("pair " + pair.pair_id + " has empty created_by");
      }
      if (prev_video_id > pair.video_id ||
          (prev_video_id == pair.video_id && prev_kind > to_string(pair.kind))) {
        throw InvariantError("pair " + pair.pair_id + " breaks (video_id, kind) sort order");
      }
      prev_video_id = pair.video_id;
      prev_kind = to_string(pair.kind);
    }
    const std::size_t declared = manifest.at("counts").at(key).get<std::size_t>();
    if (declared != count) {
      throw InvariantError("level " + key + " declares " + std::to_string(declared) + " pairs but file has " +
                           std::to_string(count));
    }
  }
}

}  // namespace temple
