#include "temple/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "temple/error.hpp"
#include "temple/rng.hpp"

namespace temple {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& origin, const std::string& msg) {
  throw InputError(origin + ": " + msg);
}

// Walks one config section, rejecting unknown keys and coercing types.
class Section {
 public:
  Section(const json& j, std::string name, const std::string& origin)
      : j_(j), name_(std::move(name)), origin_(origin) {
    if (!j_.is_object()) fail(origin_, "section '" + name_ + "' must be an object");
  }

  ~Section() = default;

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) {
        fail(origin_, "unknown key '" + key + "' in section '" + name_ + "'");
      }
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      fail(origin_, "key '" + name_ + "." + key + "' has the wrong type");
    }
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

 private:
  const json& j_;
  std::string name_;
  const std::string& origin_;
  std::set<std::string> seen_;
};

void check_range(bool ok, const std::string& origin, const std::string& what) {
  if (!ok) fail(origin, what);
}

}  // namespace

PipelineConfig default_config() { return PipelineConfig{}; }

PipelineConfig config_from_json(const json& j, const std::string& origin) {
  if (!j.is_object()) fail(origin, "config root must be a JSON object");
  PipelineConfig cfg;

  static const std::set<std::string> kSections = {"paths",     "ingest",    "segmenter",
                                                  "grouper",   "keyframer", "perturber",
                                                  "captioner", "pairset",   "dpo"};
  for (const auto& [key, value] : j.items()) {
    if (!kSections.count(key)) fail(origin, "unknown top-level section '" + key + "'");
  }

  if (j.contains("paths")) {
    Section s(j.at("paths"), "paths", origin);
    s.get("manifest", cfg.paths.manifest);
    s.get("out_dir", cfg.paths.out_dir);
    s.get("boundaries_dir", cfg.paths.boundaries_dir);
    s.get("embeddings_dir", cfg.paths.embeddings_dir);
    s.finish();
    check_range(!cfg.paths.out_dir.empty(), origin, "paths.out_dir must not be empty");
  }

  if (j.contains("ingest")) {
    Section s(j.at("ingest"), "ingest", origin);
    s.get("sample_fps", cfg.ingest.sample_fps);
    s.get("max_pixels", cfg.ingest.max_pixels);
    s.get("max_frames", cfg.ingest.max_frames);
    s.get("min_duration_s", cfg.ingest.min_duration_s);
    s.get("max_duration_s", cfg.ingest.max_duration_s);
    s.get("decoder_command", cfg.ingest.decoder_command);
    s.finish();
    check_range(cfg.ingest.sample_fps > 0.0, origin, "ingest.sample_fps must be > 0");
    check_range(cfg.ingest.max_pixels >= 1, origin, "ingest.max_pixels must be >= 1");
    check_range(cfg.ingest.max_frames >= 1, origin, "ingest.max_frames must be >= 1");
    check_range(cfg.ingest.min_duration_s >= 0.0, origin, "ingest.min_duration_s must be >= 0");
    check_range(cfg.ingest.max_duration_s >= cfg.ingest.min_duration_s, origin,
                "ingest.max_duration_s must be >= min_duration_s");
  }

  if (j.contains("segmenter")) {
    Section s(j.at("segmenter"), "segmenter", origin);
    s.get("min_monochrome_s", cfg.segmenter.min_monochrome_s);
    s.get("max_scene_s", cfg.segmenter.max_scene_s);
    s.get("cut_threshold", cfg.segmenter.cut_threshold);
    s.get("monochrome_stddev_eps", cfg.segmenter.monochrome_stddev_eps);
    s.finish();
    check_range(cfg.segmenter.min_monochrome_s >= 0.0, origin, "segmenter.min_monochrome_s must be >= 0");
    check_range(cfg.segmenter.max_scene_s > 0.0, origin, "segmenter.max_scene_s must be > 0");
    check_range(cfg.segmenter.cut_threshold > 0.0 && cfg.segmenter.cut_threshold <= 1.0, origin,
                "segmenter.cut_threshold must be in (0, 1]");
    check_range(cfg.segmenter.monochrome_stddev_eps >= 0.0, origin,
                "segmenter.monochrome_stddev_eps must be >= 0");
  }

  if (j.contains("grouper")) {
    Section s(j.at("grouper"), "grouper", origin);
    s.get("tau", cfg.grouper.tau);
    s.get("min_groups", cfg.grouper.min_groups);
    s.get("max_groups", cfg.grouper.max_groups);
    s.finish();
    check_range(cfg.grouper.tau > 0.0 && cfg.grouper.tau <= 1.0, origin, "grouper.tau must be in (0, 1]");
    check_range(cfg.grouper.min_groups >= 1, origin, "grouper.min_groups must be >= 1");
    check_range(cfg.grouper.max_groups >= cfg.grouper.min_groups, origin,
                "grouper.max_groups must be >= min_groups");
  }

  if (j.contains("keyframer")) {
    Section s(j.at("keyframer"), "keyframer", origin);
    s.get("window_frames", cfg.keyframer.window_frames);
    s.finish();
    check_range(cfg.keyframer.window_frames >= 0, origin, "keyframer.window_frames must be >= 0");
  }

  if (j.contains("perturber")) {
    Section s(j.at("perturber"), "perturber", origin);
    if (s.has("levels")) {
      std::vector<int> levels;
      s.get("levels", levels);
      cfg.perturber.levels = levels;
    }
    if (s.has("kinds")) {
      std::vector<std::string> kinds;
      s.get("kinds", kinds);
      cfg.perturber.kinds.clear();
      for (const std::string& k : kinds) cfg.perturber.kinds.push_back(kind_from_string(k));
    }
    s.get("global_seed", cfg.perturber.global_seed);
    s.get("variants_per_kind", cfg.perturber.variants_per_kind);
    s.finish();
    check_range(!cfg.perturber.levels.empty(), origin, "perturber.levels must not be empty");
    std::set<int> seen_levels;
    for (int r : cfg.perturber.levels) {
      check_range(r >= 2, origin, "perturber.levels entries must be >= 2");
      check_range(seen_levels.insert(r).second, origin,
                  "perturber.levels contains duplicate " + std::to_string(r));
    }
    check_range(!cfg.perturber.kinds.empty(), origin, "perturber.kinds must not be empty");
    std::set<std::string> seen_kinds;
    for (PerturbationKind k : cfg.perturber.kinds) {
      check_range(seen_kinds.insert(to_string(k)).second, origin,
                  std::string("perturber.kinds contains duplicate ") + to_string(k));
    }
    check_range(cfg.perturber.variants_per_kind >= 1, origin,
                "perturber.variants_per_kind must be >= 1");
  }

  if (j.contains("captioner")) {
    Section s(j.at("captioner"), "captioner", origin);
    if (s.has("backend")) {
      std::string mode;
      s.get("backend", mode);
      cfg.captioner.backend.mode = backend_mode_from_string(mode);
    }
    s.get("endpoint", cfg.captioner.backend.endpoint);
    s.get("command", cfg.captioner.backend.command);
    s.get("timeout_s", cfg.captioner.backend.timeout_s);
    s.get("max_retries", cfg.captioner.backend.max_retries);
    s.get("backoff_s", cfg.captioner.backend.backoff_s);
    s.get("concurrency_limit", cfg.captioner.backend.concurrency_limit);
    s.get("instruction", cfg.captioner.instruction);
    if (s.has("templates")) {
      Section t(s.raw("templates"), "captioner.templates", origin);
      t.get("clip_initial", cfg.captioner.templates.clip_initial);
      t.get("clip_contextual", cfg.captioner.templates.clip_contextual);
      t.get("aggregate", cfg.captioner.templates.aggregate);
      t.finish();
    }
    s.finish();
    check_range(cfg.captioner.backend.timeout_s > 0.0, origin, "captioner.timeout_s must be > 0");
    check_range(cfg.captioner.backend.max_retries >= 0, origin, "captioner.max_retries must be >= 0");
    check_range(cfg.captioner.backend.backoff_s >= 0.0, origin, "captioner.backoff_s must be >= 0");
    check_range(cfg.captioner.backend.concurrency_limit >= 1, origin,
                "captioner.concurrency_limit must be >= 1");
    check_range(!cfg.captioner.instruction.empty(), origin, "captioner.instruction must not be empty");
  }

  if (j.contains("pairset")) {
    Section s(j.at("pairset"), "pairset", origin);
    s.get("budget_per_stage", cfg.pairset.budget_per_stage);
    s.finish();
    check_range(cfg.pairset.budget_per_stage >= 1, origin, "pairset.budget_per_stage must be >= 1");
  }

  if (j.contains("dpo")) {
    Section s(j.at("dpo"), "dpo", origin);
    s.get("beta", cfg.dpo.beta);
    s.get("learning_rate", cfg.dpo.learning_rate);
    s.get("steps_per_stage", cfg.dpo.steps_per_stage);
    s.get("seed", cfg.dpo.seed);
    s.finish();
    check_range(cfg.dpo.beta > 0.0, origin, "dpo.beta must be > 0");
    check_range(cfg.dpo.steps_per_stage >= 1, origin, "dpo.steps_per_stage must be >= 1");
  }

  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open config file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": invalid JSON: " + e.what());
  }
  return config_from_json(j, path.string());
}

nlohmann::ordered_json config_to_json(const PipelineConfig& cfg) {
  nlohmann::ordered_json j;
  j["paths"] = {{"manifest", cfg.paths.manifest},
                {"out_dir", cfg.paths.out_dir},
                {"boundaries_dir", cfg.paths.boundaries_dir},
                {"embeddings_dir", cfg.paths.embeddings_dir}};
  j["ingest"] = {{"sample_fps", cfg.ingest.sample_fps},
                 {"max_pixels", cfg.ingest.max_pixels},
                 {"max_frames", cfg.ingest.max_frames},
                 {"min_duration_s", cfg.ingest.min_duration_s},
                 {"max_duration_s", cfg.ingest.max_duration_s},
                 {"decoder_command", cfg.ingest.decoder_command}};
  j["segmenter"] = {{"min_monochrome_s", cfg.segmenter.min_monochrome_s},
                    {"max_scene_s", cfg.segmenter.max_scene_s},
                    {"cut_threshold", cfg.segmenter.cut_threshold},
                    {"monochrome_stddev_eps", cfg.segmenter.monochrome_stddev_eps}};
  j["grouper"] = {{"tau", cfg.grouper.tau},
                  {"min_groups", cfg.grouper.min_groups},
                  {"max_groups", cfg.grouper.max_groups}};
  j["keyframer"] = {{"window_frames", cfg.keyframer.window_frames}};
  nlohmann::ordered_json kinds = nlohmann::ordered_json::array();
  for (PerturbationKind k : cfg.perturber.kinds) kinds.push_back(to_string(k));
  j["perturber"] = {{"levels", cfg.perturber.levels},
                    {"kinds", kinds},
                    {"global_seed", cfg.perturber.global_seed},
                    {"variants_per_kind", cfg.perturber.variants_per_kind}};
  j["captioner"] = {{"backend", to_string(cfg.captioner.backend.mode)},
                    {"endpoint", cfg.captioner.backend.endpoint},
                    {"command", cfg.captioner.backend.command},
                    {"timeout_s", cfg.captioner.backend.timeout_s},
                    {"max_retries", cfg.captioner.backend.max_retries},
                    {"backoff_s", cfg.captioner.backend.backoff_s},
                    {"concurrency_limit", cfg.captioner.backend.concurrency_limit},
                    {"instruction", cfg.captioner.instruction},
                    {"templates",
                     {{"clip_initial", cfg.captioner.templates.clip_initial},
                      {"clip_contextual", cfg.captioner.templates.clip_contextual},
                      {"aggregate", cfg.captioner.templates.aggregate}}}};
  j["pairset"] = {{"budget_per_stage", cfg.pairset.budget_per_stage}};
  j["dpo"] = {{"beta", cfg.dpo.beta},
              {"learning_rate", cfg.dpo.learning_rate},
              {"steps_per_stage", cfg.dpo.steps_per_stage},
              {"seed", cfg.dpo.seed}};
  return j;
}

std::string config_hash(const PipelineConfig& cfg) {
  const std::uint64_t h = fnv1a64(config_to_json(cfg).dump());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace temple
