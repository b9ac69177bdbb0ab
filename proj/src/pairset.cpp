#include "temple/pairset.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include "temple/error.hpp"

namespace temple {

std::string make_pair_id(const std::string& video_id, PerturbationKind kind, int r, std::uint64_t seed) {
  return video_id + "-" + to_string(kind) + "-r" + std::to_string(r) + "-" + std::to_string(seed);
}

nlohmann::ordered_json pair_record(const PreferencePair& pair) {
  nlohmann::ordered_json j;
  j["pair_id"] = pair.pair_id;
  j["video_id"] = pair.video_id;
  j["instruction"] = pair.instruction;
  j["chosen"] = pair.chosen;
  j["rejected"] = pair.rejected;
  j["kind"] = to_string(pair.kind);
  j["r"] = pair.r;
  j["seed"] = std::to_string(pair.seed);
  j["created_by"] = pair.created_by;
  return j;
}

PreferencePair pair_from_record(const nlohmann::json& record) {
  PreferencePair pair;
  try {
    pair.pair_id = record.at("pair_id").get<std::string>();
    pair.video_id = record.at("video_id").get<std::string>();
    pair.instruction = record.at("instruction").get<std::string>();
    pair.chosen = record.at("chosen").get<std::string>();
    pair.rejected = record.at("rejected").get<std::string>();
    pair.kind = kind_from_string(record.at("kind").get<std::string>());
    pair.r = record.at("r").get<int>();
    pair.seed = std::stoull(record.at("seed").get<std::string>());
    pair.created_by = record.at("created_by").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed pair record: ") + e.what());
  } catch (const std::logic_error& e) {
    throw InputError(std::string("malformed pair record: ") + e.what());
  }
  return pair;
}

std::string dataset_filename(int level) {
  return "pairs_r" + std::to_string(level) + ".jsonl";
}

std::vector<CurriculumStage> make_schedule(std::vector<int> levels, int budget_per_stage,
                                           const std::filesystem::path& dataset_dir) {
  if (levels.empty()) throw InputError("schedule requires at least one difficulty level");
  if (budget_per_stage < 1) throw InputError("budget_per_stage must be >= 1");
  std::sort(levels.begin(), levels.end(), std::greater<int>());
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] < 2) throw InputError("difficulty level must be >= 2, got " + std::to_string(levels[i]));
    if (i > 0 && levels[i] == levels[i - 1]) {
      throw InputError("duplicate difficulty level " + std::to_string(levels[i]));
    }
  }
  std::vector<CurriculumStage> stages;
  stages.reserve(levels.size());
  for (std::size_t i = 0; i < levels.size(); ++i) {
    CurriculumStage stage;
    stage.stage_index = static_cast<int>(i);
    stage.r = levels[i];
    stage.dataset_path = (dataset_dir / dataset_filename(levels[i])).string();
    stage.steps = budget_per_stage;
    stages.push_back(std::move(stage));
  }
  return stages;
}

const char* to_string(FunnelStep step) {
  switch (step) {
    case FunnelStep::kOriginal: return "original";
    case FunnelStep::kStep1: return "step1";
    case FunnelStep::kStep2: return "step2";
  }
  throw InvariantError("unknown funnel step");
}

FunnelStep funnel_step_from_string(const std::string& s) {
  if (s == "original") return FunnelStep::kOriginal;
  if (s == "step1") return FunnelStep::kStep1;
  if (s == "step2") return FunnelStep::kStep2;
  throw InputError("unknown funnel step '" + s + "'");
}

void write_funnel_events(const std::filesystem::path& path, const std::vector<FunnelEvent>& events) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open funnel event log for writing: " + path.string());
  for (const FunnelEvent& e : events) {
    nlohmann::ordered_json j;
    j["video_id"] = e.video_id;
    j["bucket"] = e.bucket;
    j["step"] = to_string(e.step);
    j["passed"] = e.passed;
    j["reason"] = e.reason;
    out << j.dump() << "\n";
  }
  if (!out) throw InputError("failed writing funnel event log: " + path.string());
}

std::vector<FunnelEvent> read_funnel_events(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open funnel event log: " + path.string());
  std::vector<FunnelEvent> events;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      FunnelEvent e;
      e.video_id = j.at("video_id").get<std::string>();
      e.bucket = j.at("bucket").get<std::string>();
      e.step = funnel_step_from_string(j.at("step").get<std::string>());
      e.passed = j.at("passed").get<bool>();
      e.reason = j.at("reason").get<std::string>();
      events.push_back(std::move(e));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": bad funnel event: " + e.what());
    }
  }
  return events;
}

FunnelReport funnel_stats(const std::vector<FunnelEvent>& events) {
  FunnelReport report;

  // Track per-video progress to catch duplicated or out-of-order events.
  struct VideoState {
    std::string bucket;
    bool seen[3] = {false, false, false};
    bool passed[3] = {false, false, false};
  };
  std::map<std::string, VideoState> videos;

  for (const FunnelEvent& e : events) {
    VideoState& st = videos[e.video_id];
    if (st.bucket.empty()) {
      st.bucket = e.bucket;
    } else if (st.bucket != e.bucket) {
      throw InvariantError("video " + e.video_id + " reported under two buckets ('" + st.bucket +
                           "' and '" + e.bucket + "')");
    }
    const int idx = static_cast<int>(e.step);
    if (st.seen[idx]) {
      throw InvariantError("duplicate " + std::string(to_string(e.step)) + " event for video " +
                           e.video_id);
    }
    st.seen[idx] = true;
    st.passed[idx] = e.passed;
  }

  for (const auto& [video_id, st] : videos) {
    if (!st.seen[0]) {
      throw InvariantError("video " + video_id + " has step events but no original event");
    }
    // A later step implies the previous one passed, otherwise a count could
    // grow from one column to the next.
    if (st.seen[1] && !st.passed[0]) {
      throw InvariantError("video " + video_id + " has a step1 event but failed intake");
    }
    if (st.seen[2] && (!st.seen[1] || !st.passed[1])) {
      throw InvariantError("video " + video_id + " has a step2 event but did not pass step1");
    }

    FunnelCounts& bucket = report.buckets[st.bucket];
    if (st.passed[0]) ++bucket.original;
    if (st.seen[1] && st.passed[1]) ++bucket.after_step1;
    if (st.seen[2] && st.passed[2]) ++bucket.after_step2;
  }

  for (const auto& [name, counts] : report.buckets) {
    if (counts.after_step1 > counts.original || counts.after_step2 > counts.after_step1) {
      throw InvariantError("funnel counts increase across steps for bucket '" + name + "'");
    }
    report.total.original += counts.original;
    report.total.after_step1 += counts.after_step1;
    report.total.after_step2 += counts.after_step2;
  }

  report.generated_at = utc_timestamp_now();
  return report;
}

std::string render_funnel_table(const FunnelReport& report) {
  const std::string head_bucket = "Source";
  const std::string head_orig = "Original";
  const std::string head_s1 = "After Step 1";
  const std::string head_s2 = "After Step 2";

  std::size_t w0 = head_bucket.size();
  for (const auto& [name, counts] : report.buckets) w0 = std::max(w0, name.size());
  w0 = std::max(w0, std::string("Total").size());

  auto col_width = [](const std::string& head) { return head.size(); };
  const std::size_t w1 = col_width(head_orig);
  const std::size_t w2 = col_width(head_s1);
  const std::size_t w3 = col_width(head_s2);

  std::ostringstream out;
  auto row = [&](const std::string& name, const std::string& a, const std::string& b,
                 const std::string& c) {
    out << name << std::string(w0 - name.size(), ' ');
    out << "  " << std::string(w1 - std::min(w1, a.size()), ' ') << a;
    out << "  " << std::string(w2 - std::min(w2, b.size()), ' ') << b;
    out << "  " << std::string(w3 - std::min(w3, c.size()), ' ') << c;
    out << "\n";
  };

  row(head_bucket, head_orig, head_s1, head_s2);
  out << std::string(w0 + w1 + w2 + w3 + 6, '-') << "\n";
  for (const auto& [name, counts] : report.buckets) {
    row(name, std::to_string(counts.original), std::to_string(counts.after_step1),
        std::to_string(counts.after_step2));
  }
  out << std::string(w0 + w1 + w2 + w3 + 6, '-') << "\n";
  row("Total", std::to_string(report.total.original), std::to_string(report.total.after_step1),
      std::to_string(report.total.after_step2));

  if (!report.pairs_per_level.empty()) {
    out << "\nPairs per difficulty level:\n";
    for (auto it = report.pairs_per_level.rbegin(); it != report.pairs_per_level.rend(); ++it) {
      out << "  r=" << it->first << ": " << it->second << "\n";
    }
  }
  return out.str();
}

nlohmann::ordered_json funnel_report_json(const FunnelReport& report) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json buckets = nlohmann::ordered_json::object();
  for (const auto& [name, counts] : report.buckets) {
    buckets[name] = {{"original", counts.original},
                     {"after_step1", counts.after_step1},
                     {"after_step2", counts.after_step2}};
  }
  j["buckets"] = buckets;
  j["total"] = {{"original", report.total.original},
                {"after_step1", report.total.after_step1},
                {"after_step2", report.total.after_step2}};
  nlohmann::ordered_json levels = nlohmann::ordered_json::object();
  for (auto it = report.pairs_per_level.rbegin(); it != report.pairs_per_level.rend(); ++it) {
    levels[std::to_string(it->first)] = it->second;
  }
  j["pairs_per_level"] = levels;
  j["generated_at"] = report.generated_at;
  j["config_hash"] = report.config_hash;
  return j;
}

std::string utc_timestamp_now() {
  std::time_t now = std::time(nullptr);
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    char* end = nullptr;
    const long long v = std::strtoll(epoch, &end, 10);
    if (end && *end == '\0') now = static_cast<std::time_t>(v);
  }
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
  return buf;
}

}  // namespace temple
