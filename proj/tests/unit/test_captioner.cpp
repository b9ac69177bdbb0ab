#include <atomic>
#include <cstdlib>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "temple/captioner.hpp"
#include "temple/error.hpp"
#include "temple/frame.hpp"
#include "temple/perturber.hpp"

#include "helpers.hpp"

// After the Eigen-using headers: resolv.h (dragged in by httplib) defines a
// `_res` macro that corrupts Eigen parameter lists.
#include <httplib.h>

using namespace temple;

namespace {

Frame frame_of_bytes(std::initializer_list<std::uint8_t> bytes) {
  Frame f;
  f.width = static_cast<int>(bytes.size() / 3);
  f.height = 1;
  f.rgb.assign(bytes);
  return f;
}

// Records every prompt and image count it sees; returns scripted text.
class RecordingBackend : public CaptionBackend {
 public:
  std::string caption(const CaptionRequest& req) override {
    prompts.push_back(req.prompt);
    image_counts.push_back(req.images.size());
    return "cap" + std::to_string(req.clip_id);
  }
  std::string aggregate(const AggregateRequest& req) override {
    prompts.push_back(req.prompt);
    aggregate_inputs.push_back(req.caption_texts);
    return "agg";
  }
  const char* name() const override { return "recording"; }

  std::vector<std::string> prompts;
  std::vector<std::size_t> image_counts;
  std::vector<std::vector<std::string>> aggregate_inputs;
};

ClipCaption cap(int id, const std::string& text) {
  ClipCaption c;
  c.clip_id = id;
  c.text = text;
  return c;
}

PerturbedSequence perturbed_of(std::vector<int> original, std::vector<int> output) {
  PerturbedSequence p;
  p.original_clip_ids = std::move(original);
  p.output_clip_ids = std::move(output);
  return p;
}

}  // namespace

TEST_SUITE("captioner") {

TEST_CASE("mock backend hashes keyframe bytes into a stable caption") {
  const Frame a = frame_of_bytes({1, 2, 3, 4, 5, 6});
  const Frame b = frame_of_bytes({7, 8, 9, 10, 11, 12});
  MockBackend mock;
  CaptionRequest req;
  req.clip_id = 3;
  req.images = {&a, &b};
  CHECK(mock.caption(req) == "clip 3: 170e2075");
  CHECK(mock.caption(req) == "clip 3: 170e2075");  // no hidden state
  CHECK(mock.calls() == 2);

  AggregateRequest agg;
  agg.caption_texts = {"a", "b"};
  CHECK(mock.aggregate(agg) == "summary[a; b]");
  agg.caption_texts = {};
  CHECK(mock.aggregate(agg) == "summary[]");
}

TEST_CASE("backend mode names round-trip") {
  for (auto m : {BackendConfig::Mode::kMock, BackendConfig::Mode::kRemote, BackendConfig::Mode::kSubprocess}) {
    CHECK(backend_mode_from_string(to_string(m)) == m);
  }
  CHECK_THROWS_AS(backend_mode_from_string("carrier-pigeon"), InputError);
  CHECK(make_backend(BackendConfig{})->name() == std::string("mock"));
}

TEST_CASE("complete_with_retry retries empty responses and backend errors") {
  BackendConfig cfg;
  cfg.max_retries = 3;
  cfg.backoff_s = 0.0;

  int calls = 0;
  const std::string got = complete_with_retry(
      [&]() -> std::string {
        ++calls;
        if (calls == 1) throw BackendError("transient");
        if (calls == 2) return "";
        return "fine";
      },
      cfg);
  CHECK(got == "fine");
  CHECK(calls == 3);
}

TEST_CASE("complete_with_retry gives up after max_retries + 1 attempts") {
  BackendConfig cfg;
  cfg.max_retries = 2;
  cfg.backoff_s = 0.0;
  int calls = 0;
  CHECK_THROWS_WITH_AS(complete_with_retry(
                           [&]() -> std::string {
                             ++calls;
                             throw BackendError("still down");
                           },
                           cfg),
                       doctest::Contains("3 attempts"), BackendError);
  CHECK(calls == 3);
}

TEST_CASE("complete_with_retry does not swallow input errors") {
  BackendConfig cfg;
  cfg.backoff_s = 0.0;
  CHECK_THROWS_AS(complete_with_retry([]() -> std::string { throw InputError("bad"); }, cfg), InputError);
}

TEST_CASE("caption_clip uses the opening prompt for the first clip") {
  const Frame f0 = testutil::noise_frame(4, 4, 1);
  const Frame f1 = testutil::noise_frame(4, 4, 2);
  RecordingBackend backend;
  BackendConfig cfg;
  cfg.backoff_s = 0.0;
  PromptTemplates templates;

  ClipFrames cur{0, &f0, &f1};
  const ClipCaption out = caption_clip(std::nullopt, cur, std::nullopt, backend, cfg, templates);
  CHECK(out.clip_id == 0);
  CHECK(out.text == "cap0");
  CHECK_FALSE(out.context_clip_id.has_value());
  REQUIRE(backend.prompts.size() == 1);
  CHECK(backend.prompts[0] == templates.clip_initial);
  CHECK(backend.image_counts[0] == 2);
}

TEST_CASE("caption_clip passes the previous caption and four keyframes for later clips") {
  const Frame f0 = testutil::noise_frame(4, 4, 1);
  const Frame f1 = testutil::noise_frame(4, 4, 2);
  const Frame f2 = testutil::noise_frame(4, 4, 3);
  const Frame f3 = testutil::noise_frame(4, 4, 4);
  RecordingBackend backend;
  BackendConfig cfg;
  cfg.backoff_s = 0.0;
  PromptTemplates templates;
  templates.clip_contextual = "prev was: {prev_caption} | describe";

  ClipFrames prev{0, &f0, &f1};
  ClipFrames cur{1, &f2, &f3};
  const ClipCaption out =
      caption_clip(prev, cur, std::string("the first clip"), backend, cfg, templates);
  CHECK(out.clip_id == 1);
  CHECK(out.context_clip_id == 0);
  REQUIRE(backend.prompts.size() == 1);
  CHECK(backend.prompts[0] == "prev was: the first clip | describe");
  CHECK(backend.image_counts[0] == 4);

  // Previous frames and previous caption must travel together.
  CHECK_THROWS_AS(caption_clip(prev, cur, std::nullopt, backend, cfg, templates), InputError);
  CHECK_THROWS_AS(caption_clip(std::nullopt, cur, std::string("orphan"), backend, cfg, templates),
                  InputError);
}

TEST_CASE("aggregate_captions numbers the clip captions in order") {
  RecordingBackend backend;
  BackendConfig cfg;
  cfg.backoff_s = 0.0;
  PromptTemplates templates;
  templates.aggregate = "clips:\n{captions}summarize";

  const std::vector<ClipCaption> caps = {cap(0, "alpha"), cap(1, "beta")};
  CHECK(aggregate_captions(caps, backend, cfg, templates) == "agg");
  REQUIRE(backend.prompts.size() == 1);
  CHECK(backend.prompts[0] == "clips:\n1. alpha\n2. beta\nsummarize");
  REQUIRE(backend.aggregate_inputs.size() == 1);
  CHECK(backend.aggregate_inputs[0] == std::vector<std::string>{"alpha", "beta"});

  // Order matters: reordering the captions changes the payload.
  const std::vector<ClipCaption> swapped = {cap(1, "beta"), cap(0, "alpha")};
  aggregate_captions(swapped, backend, cfg, templates);
  CHECK(backend.prompts[1] == "clips:\n1. beta\n2. alpha\nsummarize");

  CHECK_THROWS_AS(aggregate_captions({}, backend, cfg, templates), InputError);
}

TEST_CASE("perturb_caption_list reorders captions without touching their text") {
  const std::vector<ClipCaption> caps = {cap(0, "a"), cap(1, "b"), cap(2, "c"), cap(3, "d")};

  const auto rev = perturb_caption_list(caps, perturbed_of({0, 1, 2, 3}, {2, 3, 0, 1}));
  REQUIRE(rev.size() == 4);
  CHECK(rev[0].text == "c");
  CHECK(rev[1].text == "d");
  CHECK(rev[2].text == "a");
  CHECK(rev[3].text == "b");

  const auto dropped = perturb_caption_list(caps, perturbed_of({0, 1, 2, 3}, {0, 3}));
  REQUIRE(dropped.size() == 2);
  CHECK(dropped[0].clip_id == 0);
  CHECK(dropped[1].clip_id == 3);
}

TEST_CASE("perturb_caption_list validates the caption cover") {
  const std::vector<ClipCaption> caps = {cap(0, "a"), cap(1, "b")};
  CHECK_THROWS_WITH_AS(perturb_caption_list(caps, perturbed_of({0, 1, 2}, {2, 0, 1})),
                       doctest::Contains("cover"), InputError);

  const std::vector<ClipCaption> dup = {cap(0, "a"), cap(0, "again")};
  CHECK_THROWS_WITH_AS(perturb_caption_list(dup, perturbed_of({0, 1}, {1, 0})),
                       doctest::Contains("duplicate"), InputError);
}

TEST_CASE("generate_response_pair aggregates the perturbed captions as rejected") {
  MockBackend backend;
  BackendConfig cfg;
  cfg.backoff_s = 0.0;
  PromptTemplates templates;
  const std::vector<ClipCaption> caps = {cap(0, "a"), cap(1, "b"), cap(2, "c"), cap(3, "d")};
  const std::string chosen = "summary[a; b; c; d]";

  const auto out = generate_response_pair(caps, chosen, perturbed_of({0, 1, 2, 3}, {2, 3, 0, 1}),
                                          "instr", backend, cfg, templates);
  REQUIRE(std::holds_alternative<ResponsePair>(out));
  const auto& pair = std::get<ResponsePair>(out);
  CHECK(pair.chosen == chosen);
  CHECK(pair.rejected == "summary[c; d; a; b]");
  CHECK(pair.instruction == "instr");
}

TEST_CASE("generate_response_pair flags identity perturbations as degenerate") {
  MockBackend backend;
  BackendConfig cfg;
  cfg.backoff_s = 0.0;
  PromptTemplates templates;
  // Drop on a single clip keeps that clip: the rejected summary equals the chosen one.
  const std::vector<ClipCaption> caps = {cap(0, "only")};
  const auto out = generate_response_pair(caps, "summary[only]", perturbed_of({0}, {0}), "instr",
                                          backend, cfg, templates);
  REQUIRE(std::holds_alternative<DegeneratePair>(out));
  CHECK(std::get<DegeneratePair>(out).reason == "rejected response equals chosen response");
}

TEST_CASE("subprocess backend round-trips request and response files") {
  BackendConfig cfg;
  cfg.mode = BackendConfig::Mode::kSubprocess;
  cfg.backoff_s = 0.0;

  SUBCASE("missing command template") {
    CHECK_THROWS_AS(make_backend(cfg), InputError);
  }

  SUBCASE("successful call") {
    // Echo a fixed payload; also prove the request file existed and held JSON.
    cfg.command = R"(grep -q '"prompt"' {request} && printf '{"text": "from subprocess"}' > {response})";
    auto backend = make_backend(cfg);
    const Frame f = testutil::noise_frame(4, 4, 9);
    CaptionRequest req;
    req.prompt = "describe";
    req.images = {&f};
    req.clip_id = 0;
    CHECK(backend->caption(req) == "from subprocess");
    AggregateRequest agg;
    agg.prompt = "sum";
    CHECK(backend->aggregate(agg) == "from subprocess");
  }

  SUBCASE("nonzero exit becomes a backend error") {
    cfg.command = "exit 7";
    auto backend = make_backend(cfg);
    CaptionRequest req;
    req.prompt = "x";
    CHECK_THROWS_WITH_AS(backend->caption(req), doctest::Contains("exited 7"), BackendError);
  }

  SUBCASE("missing response file becomes a backend error") {
    cfg.command = "true";
    auto backend = make_backend(cfg);
    CaptionRequest req;
    req.prompt = "x";
    CHECK_THROWS_WITH_AS(backend->caption(req), doctest::Contains("no response"), BackendError);
  }

  SUBCASE("malformed response payload") {
    cfg.command = R"(printf 'not json' > {response})";
    auto backend = make_backend(cfg);
    CaptionRequest req;
    req.prompt = "x";
    CHECK_THROWS_WITH_AS(backend->caption(req), doctest::Contains("malformed response"), BackendError);
  }

  SUBCASE("response without a text field") {
    cfg.command = R"(printf '{"answer": "nope"}' > {response})";
    auto backend = make_backend(cfg);
    CaptionRequest req;
    req.prompt = "x";
    CHECK_THROWS_WITH_AS(backend->caption(req), doctest::Contains("missing \"text\""), BackendError);
  }
}

TEST_CASE("remote backend posts json and honors the url override") {
  httplib::Server server;
  std::atomic<int> hits{0};
  std::string last_prompt;
  std::size_t last_image_count = 0;
  server.Post("/caption", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    const auto j = nlohmann::json::parse(req.body);
    last_prompt = j.at("prompt").get<std::string>();
    last_image_count = j.at("images").size();
    res.set_content(R"({"text": "remote caption"})", "application/json");
  });

  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  const std::string url = "http://127.0.0.1:" + std::to_string(port) + "/caption";

  BackendConfig cfg;
  cfg.mode = BackendConfig::Mode::kRemote;
  cfg.endpoint = url;
  cfg.backoff_s = 0.0;
  {
    auto backend = make_backend(cfg);
    const Frame f = testutil::noise_frame(4, 4, 12);
    CaptionRequest req;
    req.prompt = "what is this";
    req.images = {&f};
    CHECK(backend->caption(req) == "remote caption");
    CHECK(hits == 1);
    CHECK(last_prompt == "what is this");
    CHECK(last_image_count == 1);

    AggregateRequest agg;
    agg.prompt = "overall";
    CHECK(backend->aggregate(agg) == "remote caption");
    CHECK(last_image_count == 0);
  }

  // The environment variable outranks the configured endpoint.
  {
    BackendConfig env_cfg = cfg;
    env_cfg.endpoint = "http://127.0.0.1:1/unreachable";
    setenv("TEMPLE_FORGE_BACKEND_URL", url.c_str(), 1);
    auto backend = make_backend(env_cfg);
    unsetenv("TEMPLE_FORGE_BACKEND_URL");
    CaptionRequest req;
    req.prompt = "via env";
    CHECK(backend->caption(req) == "remote caption");
  }

  // Endpoint validation happens at construction time.
  {
    BackendConfig bad = cfg;
    bad.endpoint = "not-a-url";
    CHECK_THROWS_AS(make_backend(bad), InputError);
    bad.endpoint = "";
    CHECK_THROWS_AS(make_backend(bad), InputError);
  }

  server.stop();
  server_thread.join();
}

TEST_CASE("remote backend surfaces http failures as backend errors") {
  httplib::Server server;
  server.Post("/caption", [](const httplib::Request&, httplib::Response& res) {
    res.status = 500;
    res.set_content("boom", "text/plain");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  BackendConfig cfg;
  cfg.mode = BackendConfig::Mode::kRemote;
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/caption";
  auto backend = make_backend(cfg);
  CaptionRequest req;
  req.prompt = "x";
  CHECK_THROWS_WITH_AS(backend->caption(req), doctest::Contains("500"), BackendError);

  server.stop();
  server_thread.join();
}

}  // TEST_SUITE
