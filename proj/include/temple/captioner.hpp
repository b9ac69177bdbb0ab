#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "temple/frame.hpp"
#include "temple/grouper.hpp"
#include "temple/keyframer.hpp"
#include "temple/perturber.hpp"

namespace temple {

struct ClipCaption {
  int clip_id = 0;
  std::string text;
  std::optional<int> context_clip_id;  // clip_id - 1 except for the first clip
};

struct PromptTemplates {
  // {prev_caption} and {captions} are substituted before the backend call.
  std::string clip_initial =
      "These are two keyframes from the opening clip of a video. "
      "Describe what happens in this clip.";
  std::string clip_contextual =
      "The previous clip was described as: {prev_caption}\n"
      "The first two images are keyframes from that previous clip; the last two "
      "are keyframes from the current clip. Describe what happens in the current clip.";
  std::string aggregate =
      "Here are captions for the consecutive clips of one video:\n{captions}\n"
      "Write a comprehensive, structured summary of the entire video.";
};

struct BackendConfig {
  enum class Mode { kMock, kRemote, kSubprocess };
  Mode mode = Mode::kMock;
  std::string endpoint;  // remote: POST URL; TEMPLE_FORGE_BACKEND_URL overrides
  std::string command;   // subprocess: template with {request} and {response}
  double timeout_s = 30.0;
  int max_retries = 3;
  double backoff_s = 1.0;  // initial backoff, doubles per retry
  int concurrency_limit = 4;
};

BackendConfig::Mode backend_mode_from_string(const std::string& s);
const char* to_string(BackendConfig::Mode m);

// A captioning call: free-form prompt plus the keyframe images it refers
// to (none for aggregation). clip_id tags the clip being described.
struct CaptionRequest {
  std::string prompt;
  std::vector<const Frame*> images;
  int clip_id = -1;
};

struct AggregateRequest {
  std::string prompt;
  std::vector<std::string> caption_texts;
};

class CaptionBackend {
 public:
  virtual ~CaptionBackend() = default;
  // Both throw BackendError on failure; retries live in the caller.
  virtual std::string caption(const CaptionRequest& req) = 0;
  virtual std::string aggregate(const AggregateRequest& req) = 0;
  virtual const char* name() const = 0;
};

// Deterministic fixture backend:
//   caption   -> "clip <id>: <hex8 of keyframe content hash>"
//   aggregate -> "summary[" + texts joined by "; " + "]"
class MockBackend : public CaptionBackend {
 public:
  std::string caption(const CaptionRequest& req) override;
  std::string aggregate(const AggregateRequest& req) override;
  const char* name() const override { return "mock"; }
  int calls() const { return calls_; }

 private:
  std::atomic<int> calls_{0};
};

std::unique_ptr<CaptionBackend> make_backend(const BackendConfig& cfg);

// Retry wrapper: empty responses and BackendErrors are retried with
// exponential backoff until max_retries is exhausted.
std::string complete_with_retry(const std::function<std::string()>& call, const BackendConfig& cfg);

// Two keyframes' worth of pixels for one clip.
struct ClipFrames {
  int clip_id = 0;
  const Frame* first = nullptr;
  const Frame* second = nullptr;
};

// Contextualized captioning: the current clip is described given the
// previous clip's keyframes and caption (four images total; two for the
// first clip).
ClipCaption caption_clip(const std::optional<ClipFrames>& prev, const ClipFrames& cur,
                         const std::optional<std::string>& prev_caption, CaptionBackend& backend,
                         const BackendConfig& cfg, const PromptTemplates& templates);

// Video-level caption from the ordered clip captions; always goes through
// the backend, even for a single clip.
std::string aggregate_captions(const std::vector<ClipCaption>& captions, CaptionBackend& backend,
                               const BackendConfig& cfg, const PromptTemplates& templates);

// Re-selects and re-orders captions to match the perturbation output;
// texts are never modified.
std::vector<ClipCaption> perturb_caption_list(const std::vector<ClipCaption>& captions,
                                              const PerturbedSequence& perturbed);

struct ResponsePair {
  std::string chosen;
  std::string rejected;
  std::string instruction;
};

// A pair whose rejected response degenerated to the chosen one; skipped,
// not failed.
struct DegeneratePair {
  std::string reason;
};

// Chosen = aggregate of the clean captions (computed once upstream);
// rejected = aggregate of the perturbed caption list. No frame captioning
// happens here.
std::variant<ResponsePair, DegeneratePair> generate_response_pair(
    const std::vector<ClipCaption>& clean_captions, const std::string& chosen,
    const PerturbedSequence& perturbed, const std::string& instruction, CaptionBackend& backend,
    const BackendConfig& cfg, const PromptTemplates& templates);

}  // namespace temple
