#include <cctype>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "temple/config.hpp"
#include "temple/error.hpp"
#include "temple/subprocess.hpp"

#include "helpers.hpp"

using namespace temple;
using nlohmann::json;

namespace {

PipelineConfig parse(const json& j) { return config_from_json(j, "test"); }

}  // namespace

TEST_SUITE("config") {

TEST_CASE("config_hash is sixteen lowercase hex digits and deterministic") {
  const PipelineConfig cfg = default_config();
  const std::string h = config_hash(cfg);
  REQUIRE(h.size() == 16);
  for (char c : h) CHECK((std::isdigit(static_cast<unsigned char>(c)) || (c >= 'a' && c <= 'f')));
  CHECK(config_hash(default_config()) == h);

  PipelineConfig other = default_config();
  other.dpo.beta = 0.25;
  CHECK(config_hash(other) != h);
}

TEST_CASE("canonical json lists every section in a fixed order") {
  const nlohmann::ordered_json j = config_to_json(default_config());
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  const std::vector<std::string> expected = {"paths",     "ingest",  "segmenter",
                                             "grouper",   "keyframer", "perturber",
                                             "captioner", "pairset", "dpo"};
  CHECK(keys == expected);
  CHECK(j.at("captioner").at("backend") == "mock");
  CHECK(j.at("captioner").contains("templates"));
  CHECK(j.at("perturber").at("kinds") == nlohmann::ordered_json::array({"drop", "shuffle", "reverse"}));
}

TEST_CASE("configs survive a dump / load round trip") {
  TempDir dir("temple-test");
  PipelineConfig cfg = default_config();
  cfg.paths.manifest = "videos.jsonl";
  cfg.perturber.levels = {8, 2};
  cfg.captioner.backend.mode = BackendConfig::Mode::kSubprocess;
  cfg.captioner.backend.command = "run-captioner {request} {response}";
  cfg.captioner.templates.clip_initial = "look at this";
  cfg.dpo.seed = 77;

  const auto path = dir.path() / "config.json";
  testutil::write_text(path, config_to_json(cfg).dump(2) + "\n");
  const PipelineConfig loaded = load_config(path);

  CHECK(config_hash(loaded) == config_hash(cfg));
  CHECK(loaded.paths.manifest == "videos.jsonl");
  CHECK(loaded.perturber.levels == std::vector<int>{8, 2});
  CHECK(loaded.captioner.backend.mode == BackendConfig::Mode::kSubprocess);
  CHECK(loaded.captioner.templates.clip_initial == "look at this");
  CHECK(loaded.dpo.seed == 77);

  // Parsing the canonical form back is idempotent.
  const PipelineConfig again = config_from_json(config_to_json(loaded), "roundtrip");
  CHECK(config_hash(again) == config_hash(cfg));
}

TEST_CASE("an empty object means all defaults") {
  const PipelineConfig cfg = parse(json::object());
  CHECK(config_hash(cfg) == config_hash(default_config()));
  const PipelineConfig partial = parse(json{{"dpo", {{"beta", 0.5}}}});
  CHECK(partial.dpo.beta == 0.5);
  CHECK(partial.grouper.tau == default_config().grouper.tau);
}

TEST_CASE("unknown sections and keys are rejected by name") {
  CHECK_THROWS_WITH_AS(parse(json{{"bogus", json::object()}}),
                       doctest::Contains("unknown top-level section 'bogus'"), InputError);
  CHECK_THROWS_WITH_AS(parse(json{{"ingest", {{"fps", 1.0}}}}),
                       doctest::Contains("unknown key 'fps' in section 'ingest'"), InputError);
  CHECK_THROWS_WITH_AS(parse(json{{"captioner", {{"templates", {{"clip_final", "x"}}}}}}),
                       doctest::Contains("section 'captioner.templates'"), InputError);
  CHECK_THROWS_AS(parse(json::array({1, 2})), InputError);
}

TEST_CASE("type mismatches name the offending key") {
  CHECK_THROWS_WITH_AS(parse(json{{"ingest", {{"sample_fps", "fast"}}}}),
                       doctest::Contains("key 'ingest.sample_fps' has the wrong type"), InputError);
  CHECK_THROWS_WITH_AS(parse(json{{"perturber", {{"levels", "all"}}}}),
                       doctest::Contains("'perturber.levels'"), InputError);
  CHECK_THROWS_WITH_AS(parse(json{{"paths", {{"manifest", 7}}}}),
                       doctest::Contains("'paths.manifest'"), InputError);
}

TEST_CASE("range checks reject out-of-domain values") {
  CHECK_THROWS_WITH_AS(parse(json{{"paths", {{"out_dir", ""}}}}),
                       doctest::Contains("paths.out_dir must not be empty"), InputError);
  CHECK_THROWS_WITH_AS(parse(json{{"ingest", {{"sample_fps", 0.0}}}}),
                       doctest::Contains("ingest.sample_fps must be > 0"), InputError);
  CHECK_THROWS_WITH_AS(parse(json{{"ingest", {{"min_duration_s", 10.0}, {"max_duration_s", 5.0}}}}),
                       doctest::Contains("max_duration_s must be >= min_duration_s"), InputError);
  CHECK_THROWS_WITH_AS(parse(json{{"segmenter", {{"cut_threshold", 0.0}}}}),
                       doctest::Contains("cut_threshold must be in (0, 1]"), InputError);
  CHECK_THROWS_WITH_AS(parse(json{{"segmenter", {{"cut_threshold", 1.5}}}}),
                       doctest::Contains("cut_threshold"), InputError);
  CHECK_THROWS_WITH_AS(parse(json{{"grouper", {{"tau", 0.0}}}}),
                       doctest::Contains("grouper.tau must be in (0, 1]"), InputError);
  CHECK_THROWS_WITH_AS(parse(json{{"grouper", {{"tau", 1.1}}}}), doctest::Contains("grouper.tau"),
                       InputError);
  CHECK_THROWS_WITH_AS(parse(json{{"grouper", {{"min_groups", 5}, {"max_groups", 4}}}}),
                       doctest::Contains("max_groups must be >= min_groups"), InputError);
  CHECK_THROWS_WITH_AS(parse(json{{"keyframer", {{"window_frames", -1}}}}),
                       doctest::Contains("window_frames must be >= 0"), InputError);
  CHECK_THROWS_WITH_AS(parse(json{{"pairset", {{"budget_per_stage", 0}}}}),
                       doctest::Contains("budget_per_stage must be >= 1"), InputError);
  CHECK_THROWS_WITH_AS(parse(json{{"dpo", {{"beta", 0.0}}}}), doctest::Contains("dpo.beta must be > 0"),
                       InputError);
  CHECK_THROWS_WITH_AS(parse(json{{"dpo", {{"steps_per_stage", 0}}}}),
                       doctest::Contains("steps_per_stage must be >= 1"), InputError);
}

TEST_CASE("perturber lists are validated entry by entry") {
  CHECK_THROWS_WITH_AS(parse(json{{"perturber", {{"levels", json::array()}}}}),
                       doctest::Contains("levels must not be empty"), InputError);
  CHECK_THROWS_WITH_AS(parse(json{{"perturber", {{"levels", {4, 4}}}}}),
                       doctest::Contains("duplicate 4"), InputError);
  CHECK_THROWS_WITH_AS(parse(json{{"perturber", {{"levels", {4, 1}}}}}),
                       doctest::Contains("entries must be >= 2"), InputError);
  CHECK_THROWS_WITH_AS(parse(json{{"perturber", {{"kinds", json::array()}}}}),
                       doctest::Contains("kinds must not be empty"), InputError);
  CHECK_THROWS_WITH_AS(parse(json{{"perturber", {{"kinds", {"drop", "drop"}}}}}),
                       doctest::Contains("duplicate drop"), InputError);
  CHECK_THROWS_AS(parse(json{{"perturber", {{"kinds", {"teleport"}}}}}), InputError);
  CHECK_THROWS_WITH_AS(parse(json{{"perturber", {{"variants_per_kind", 0}}}}),
                       doctest::Contains("variants_per_kind must be >= 1"), InputError);

  const PipelineConfig cfg = parse(json{{"perturber", {{"levels", {16, 2}}, {"kinds", {"reverse"}}}}});
  REQUIRE(cfg.perturber.kinds.size() == 1);
  CHECK(cfg.perturber.kinds[0] == PerturbationKind::kReverse);
  CHECK(cfg.perturber.levels == std::vector<int>{16, 2});
}

TEST_CASE("captioner backend selection and knobs") {
  CHECK_THROWS_AS(parse(json{{"captioner", {{"backend", "psychic"}}}}), InputError);
  CHECK_THROWS_WITH_AS(parse(json{{"captioner", {{"timeout_s", 0.0}}}}),
                       doctest::Contains("timeout_s must be > 0"), InputError);
  CHECK_THROWS_WITH_AS(parse(json{{"captioner", {{"max_retries", -1}}}}),
                       doctest::Contains("max_retries must be >= 0"), InputError);
  CHECK_THROWS_WITH_AS(parse(json{{"captioner", {{"concurrency_limit", 0}}}}),
                       doctest::Contains("concurrency_limit must be >= 1"), InputError);
  CHECK_THROWS_WITH_AS(parse(json{{"captioner", {{"instruction", ""}}}}),
                       doctest::Contains("instruction must not be empty"), InputError);

  const PipelineConfig cfg = parse(json{
      {"captioner",
       {{"backend", "remote"}, {"endpoint", "http://localhost:9"}, {"max_retries", 4}}}});
  CHECK(cfg.captioner.backend.mode == BackendConfig::Mode::kRemote);
  CHECK(cfg.captioner.backend.endpoint == "http://localhost:9");
  CHECK(cfg.captioner.backend.max_retries == 4);
}

TEST_CASE("load_config reports unreadable or invalid files") {
  TempDir dir("temple-test");
  CHECK_THROWS_WITH_AS(load_config(dir.path() / "missing.json"),
                       doctest::Contains("cannot open config file"), InputError);

  const auto bad = dir.path() / "bad.json";
  testutil::write_text(bad, "{not json");
  CHECK_THROWS_WITH_AS(load_config(bad), doctest::Contains("invalid JSON"), InputError);

  // Errors carry the file path as origin so the user can find the mistake.
  const auto unknown = dir.path() / "unknown.json";
  testutil::write_text(unknown, R"({"grouper": {"taau": 0.5}})");
  try {
    load_config(unknown);
    FAIL("expected InputError");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find(unknown.string()) == 0);
    CHECK(std::string(e.what()).find("unknown key 'taau'") != std::string::npos);
  }
}

}  // TEST_SUITE
