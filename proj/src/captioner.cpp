#include "temple/captioner.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "temple/error.hpp"
#include "temple/ingest.hpp"
#include "temple/rng.hpp"
#include "temple/subprocess.hpp"

namespace temple {

BackendConfig::Mode backend_mode_from_string(const std::string& s) {
  if (s == "mock") return BackendConfig::Mode::kMock;
  if (s == "remote") return BackendConfig::Mode::kRemote;
  if (s == "subprocess") return BackendConfig::Mode::kSubprocess;
  throw InputError("unknown caption backend mode: " + s);
}

const char* to_string(BackendConfig::Mode m) {
  switch (m) {
    case BackendConfig::Mode::kMock: return "mock";
    case BackendConfig::Mode::kRemote: return "remote";
    case BackendConfig::Mode::kSubprocess: return "subprocess";
  }
  return "unknown";
}

// -- mock --

std::string MockBackend::caption(const CaptionRequest& req) {
  calls_.fetch_add(1);
  std::uint64_t h = kFnvOffset;
  for (const Frame* f : req.images) {
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(f->rgb.data()), f->rgb.size()), h);
  }
  char hex[16];
  std::snprintf(hex, sizeof(hex), "%08x", static_cast<unsigned>(h & 0xffffffffu));
  return "clip " + std::to_string(req.clip_id) + ": " + hex;
}

std::string MockBackend::aggregate(const AggregateRequest& req) {
  calls_.fetch_add(1);
  std::string out = "summary[";
  for (std::size_t i = 0; i < req.caption_texts.size(); ++i) {
    if (i) out += "; ";
    out += req.caption_texts[i];
  }
  out += "]";
  return out;
}

// -- wire payload shared by remote and subprocess modes --

namespace {

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  static const char* alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  for (std::size_t i = 0; i < bytes.size(); i += 3) {
    std::uint32_t v = bytes[i] << 16;
    if (i + 1 < bytes.size()) v |= bytes[i + 1] << 8;
    if (i + 2 < bytes.size()) v |= bytes[i + 2];
    out += alphabet[(v >> 18) & 63];
    out += alphabet[(v >> 12) & 63];
    out += i + 1 < bytes.size() ? alphabet[(v >> 6) & 63] : '=';
    out += i + 2 < bytes.size() ? alphabet[v & 63] : '=';
  }
  return out;
}

nlohmann::ordered_json request_payload(const std::string& prompt, const std::vector<const Frame*>& images) {
  nlohmann::ordered_json j;
  j["prompt"] = prompt;
  auto arr = nlohmann::ordered_json::array();
  for (const Frame* f : images) arr.push_back(base64_encode(encode_png(*f)));
  j["images"] = std::move(arr);
  return j;
}

std::string text_from_response(const std::string& body, const std::string& origin) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(origin + ": malformed response payload: " + e.what());
  }
  if (!j.contains("text") || !j["text"].is_string()) {
    throw BackendError(origin + ": response payload missing \"text\"");
  }
  return j["text"].get<std::string>();
}

// -- remote --

class RemoteBackend : public CaptionBackend {
 public:
  explicit RemoteBackend(const BackendConfig& cfg) : cfg_(cfg) {
    std::string url = cfg.endpoint;
    if (const char* env = std::getenv("TEMPLE_FORGE_BACKEND_URL"); env && *env) url = env;
    if (url.empty()) throw InputError("remote caption backend requires an endpoint URL");
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw InputError("endpoint must be a full URL: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    base_ = path_start == std::string::npos ? url : url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
  }

  std::string caption(const CaptionRequest& req) override {
    return post(request_payload(req.prompt, req.images));
  }

  std::string aggregate(const AggregateRequest& req) override {
    return post(request_payload(req.prompt, {}));
  }

  const char* name() const override { return "remote"; }

 private:
  std::string post(const nlohmann::ordered_json& payload) {
    httplib::Client client(base_);
    client.set_connection_timeout(std::chrono::duration<double>(cfg_.timeout_s));
    client.set_read_timeout(std::chrono::duration<double>(cfg_.timeout_s));
    auto res = client.Post(path_, payload.dump(), "application/json");
    if (!res) throw BackendError("remote backend unreachable: " + base_);
    if (res->status != 200) {
      throw BackendError("remote backend returned status " + std::to_string(res->status));
    }
    return text_from_response(res->body, base_);
  }

  BackendConfig cfg_;
  std::string base_;
  std::string path_;
};

// -- subprocess --

class SubprocessBackend : public CaptionBackend {
 public:
  explicit SubprocessBackend(const BackendConfig& cfg) : cfg_(cfg) {
    if (cfg.command.empty()) throw InputError("subprocess caption backend requires a command template");
  }

  std::string caption(const CaptionRequest& req) override {
    return invoke(request_payload(req.prompt, req.images));
  }

  std::string aggregate(const AggregateRequest& req) override {
    return invoke(request_payload(req.prompt, {}));
  }

  const char* name() const override { return "subprocess"; }

 private:
  std::string invoke(const nlohmann::ordered_json& payload) {
    TempDir dir("temple-backend");
    const auto request_path = dir.path() / "request.json";
    const auto response_path = dir.path() / "response.json";
    {
      std::ofstream out(request_path);
      out << payload.dump() << "\n";
    }
    std::string cmd = cfg_.command;
    replace_all(cmd, "{request}", shell_quote(request_path.string()));
    replace_all(cmd, "{response}", shell_quote(response_path.string()));
    const SubprocessResult res = run_shell(cmd);
    if (res.exit_code != 0) {
      throw BackendError("caption subprocess exited " + std::to_string(res.exit_code) + ": " + res.stderr_text);
    }
    std::ifstream in(response_path);
    if (!in) throw BackendError("caption subprocess wrote no response file");
    std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return text_from_response(body, "subprocess");
  }

  BackendConfig cfg_;
};

}  // namespace

std::unique_ptr<CaptionBackend> make_backend(const BackendConfig& cfg) {
  switch (cfg.mode) {
    case BackendConfig::Mode::kMock: return std::make_unique<MockBackend>();
    case BackendConfig::Mode::kRemote: return std::make_unique<RemoteBackend>(cfg);
    case BackendConfig::Mode::kSubprocess: return std::make_unique<SubprocessBackend>(cfg);
  }
  throw InputError("unknown caption backend mode");
}

std::string complete_with_retry(const std::function<std::string()>& call, const BackendConfig& cfg) {
  std::string last_error;
  double backoff = cfg.backoff_s;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0 && backoff > 0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
      backoff *= 2;
    }
    try {
      std::string text = call();
      if (!text.empty()) return text;
      last_error = "backend returned an empty response";
    } catch (const BackendError& e) {
      last_error = e.what();
    }
  }
  throw BackendError("caption backend failed after " + std::to_string(cfg.max_retries + 1) +
                     " attempts: " + last_error);
}

ClipCaption caption_clip(const std::optional<ClipFrames>& prev, const ClipFrames& cur,
                         const std::optional<std::string>& prev_caption, CaptionBackend& backend,
                         const BackendConfig& cfg, const PromptTemplates& templates) {
  if (prev.has_value() != prev_caption.has_value()) {
    throw InputError("caption_clip: previous clip and previous caption must come together");
  }
  CaptionRequest req;
  req.clip_id = cur.clip_id;
  if (prev) {
    req.prompt = templates.clip_contextual;
    replace_all(req.prompt, "{prev_caption}", *prev_caption);
    req.images = {prev->first, prev->second, cur.first, cur.second};
  } else {
    req.prompt = templates.clip_initial;
    req.images = {cur.first, cur.second};
  }

  ClipCaption out;
  out.clip_id = cur.clip_id;
  out.text = complete_with_retry([&] { return backend.caption(req); }, cfg);
  if (prev) out.context_clip_id = prev->clip_id;
  return out;
}

std::string aggregate_captions(const std::vector<ClipCaption>& captions, CaptionBackend& backend,
                               const BackendConfig& cfg, const PromptTemplates& templates) {
  if (captions.empty()) throw InputError("aggregate_captions: empty caption list");

  std::string numbered;
  AggregateRequest req;
  for (std::size_t i = 0; i < captions.size(); ++i) {
    numbered += std::to_string(i + 1) + ". " + captions[i].text + "\n";
    req.caption_texts.push_back(captions[i].text);
  }
  req.prompt = templates.aggregate;
  replace_all(req.prompt, "{captions}", numbered);
  return complete_with_retry([&] { return backend.aggregate(req); }, cfg);
}

std::vector<ClipCaption> perturb_caption_list(const std::vector<ClipCaption>& captions,
                                              const PerturbedSequence& perturbed) {
  std::map<int, const ClipCaption*> by_id;
  for (const ClipCaption& c : captions) {
    if (!by_id.emplace(c.clip_id, &c).second) {
      throw InputError("perturb_caption_list: duplicate caption for clip " + std::to_string(c.clip_id));
    }
  }
  if (by_id.size() != perturbed.original_clip_ids.size()) {
    throw InputError("perturb_caption_list: captions do not cover the perturbed clip set");
  }
  for (int id : perturbed.original_clip_ids) {
    if (!by_id.count(id)) {
      throw InputError("perturb_caption_list: missing caption for clip " + std::to_string(id));
    }
  }

  std::vector<ClipCaption> out;
  out.reserve(perturbed.output_clip_ids.size());
  for (int id : perturbed.output_clip_ids) out.push_back(*by_id.at(id));
  return out;
}

std::variant<ResponsePair, DegeneratePair> generate_response_pair(
    const std::vector<ClipCaption>& clean_captions, const std::string& chosen,
    const PerturbedSequence& perturbed, const std::string& instruction, CaptionBackend& backend,
    const BackendConfig& cfg, const PromptTemplates& templates) {
  const auto perturbed_captions = perturb_caption_list(clean_captions, perturbed);
  const std::string rejected = aggregate_captions(perturbed_captions, backend, cfg, templates);
  if (rejected == chosen) {
    return DegeneratePair{"rejected response equals chosen response"};
  }
  ResponsePair pair;
  pair.chosen = chosen;
  pair.rejected = rejected;
  pair.instruction = instruction;
  return pair;
}

}  // namespace temple
