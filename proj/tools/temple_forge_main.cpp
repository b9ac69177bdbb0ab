#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "temple/config.hpp"
#include "temple/demo_corpus.hpp"
#include "temple/dpo.hpp"
#include "temple/error.hpp"
#include "temple/pairset.hpp"
#include "temple/pipeline.hpp"
#include "temple/plot.hpp"
#include "temple/rng.hpp"
#include "temple/version.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct GlobalOpts {
  std::string config_path;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::optional<std::uint64_t> seed;
  bool dry_run = false;
  std::string log_format = "text";
};

temple::PipelineConfig load_effective_config(const GlobalOpts& g) {
  temple::PipelineConfig cfg =
      g.config_path.empty() ? temple::default_config() : temple::load_config(g.config_path);
  if (g.seed) {
    cfg.perturber.global_seed = *g.seed;
    cfg.dpo.seed = *g.seed;
  }
  return cfg;
}

void emit(const GlobalOpts& g, const std::string& event, ordered_json fields,
          const std::string& text) {
  if (g.log_format == "jsonl") {
    ordered_json j;
    j["event"] = event;
    for (auto& [k, v] : fields.items()) j[k] = v;
    std::cout << j.dump() << "\n";
  } else {
    std::cout << text << "\n";
  }
}

fs::path out_path(const temple::PipelineConfig& cfg, const std::string& name) {
  return fs::path(cfg.paths.out_dir) / name;
}

std::vector<temple::CuratedVideo> load_curated_or_die(const temple::PipelineConfig& cfg) {
  const fs::path path = out_path(cfg, "curated.jsonl");
  if (!fs::exists(path)) {
    throw temple::InputError("no curated manifest at " + path.string() + " (run `select` first)");
  }
  return temple::read_curated(path);
}

int cmd_make_demo(const GlobalOpts& g, const std::string& dir) {
  const temple::DemoPaths paths = temple::write_demo_corpus(dir);
  emit(g, "make_demo_done",
       {{"root", paths.root.string()},
        {"manifest", paths.manifest.string()},
        {"config", paths.config.string()}},
       "demo corpus written to " + paths.root.string() + "\n  manifest: " + paths.manifest.string() +
           "\n  config:   " + paths.config.string());
  return 0;
}

int cmd_select(const GlobalOpts& g) {
  const temple::PipelineConfig cfg = load_effective_config(g);
  if (g.dry_run) {
    const auto entries = temple::load_manifest(cfg.paths.manifest);
    int in_window = 0;
    for (const auto& e : entries) {
      const bool ok = temple::within_duration_window(e, cfg.ingest);
      in_window += ok ? 1 : 0;
      emit(g, "select_plan", {{"video_id", e.video_id}, {"in_window", ok}},
           "would process " + e.video_id + (ok ? "" : " (skipped: duration outside window)"));
    }
    emit(g, "select_plan_done",
         {{"videos", entries.size()}, {"in_window", in_window}},
         "dry run: " + std::to_string(in_window) + " of " + std::to_string(entries.size()) +
             " videos in the duration window; nothing written");
    return 0;
  }

  fs::create_directories(cfg.paths.out_dir);
  const temple::SelectResult result = temple::run_select(cfg, g.jobs);
  temple::write_curated(out_path(cfg, "curated.jsonl"), result.curated);
  temple::write_funnel_events(out_path(cfg, "funnel_events.jsonl"), result.events);
  temple::write_failures(out_path(cfg, "failures_select.jsonl"), result.failures);

  emit(g, "select_done",
       {{"curated", result.curated.size()},
        {"events", result.events.size()},
        {"failures", result.failures.size()},
        {"out_dir", cfg.paths.out_dir}},
       "selected " + std::to_string(result.curated.size()) + " videos (" +
           std::to_string(result.failures.size()) + " failures); outputs in " + cfg.paths.out_dir);
  return 0;
}

int cmd_caption(const GlobalOpts& g) {
  const temple::PipelineConfig cfg = load_effective_config(g);
  const auto curated = load_curated_or_die(cfg);
  if (g.dry_run) {
    std::size_t calls = 0;
    for (const auto& v : curated) calls += v.clips.size() + 1;
    emit(g, "caption_plan",
         {{"videos", curated.size()}, {"backend_calls", calls}},
         "dry run: would caption " + std::to_string(curated.size()) + " videos (" +
             std::to_string(calls) + " backend calls); nothing written");
    return 0;
  }

  const temple::CaptionRunResult result = temple::run_caption(cfg, curated, g.jobs);
  temple::write_captions(out_path(cfg, "captions.jsonl"), result.captioned);
  temple::write_failures(out_path(cfg, "failures_caption.jsonl"), result.failures);

  emit(g, "caption_done",
       {{"captioned", result.captioned.size()}, {"failures", result.failures.size()}},
       "captioned " + std::to_string(result.captioned.size()) + " videos (" +
           std::to_string(result.failures.size()) + " failures)");
  if (result.captioned.empty() && !result.failures.empty()) {
    throw temple::BackendError("captioning failed for every video: " +
                               result.failures.front().message);
  }
  return 0;
}

int cmd_build_pairs(const GlobalOpts& g) {
  const temple::PipelineConfig cfg = load_effective_config(g);
  const auto curated = load_curated_or_die(cfg);

  if (g.dry_run) {
    const auto plan = temple::plan_pairs(cfg, curated);
    for (const auto& p : plan) {
      emit(g, "pair_plan",
           {{"video_id", p.video_id},
            {"kind", temple::to_string(p.kind)},
            {"r", p.r},
            {"variant", p.variant},
            {"seed", std::to_string(p.seed)}},
           "would build " + temple::make_pair_id(p.video_id, p.kind, p.r, p.seed));
    }
    emit(g, "pair_plan_done",
         {{"videos", curated.size()},
          {"kinds", cfg.perturber.kinds.size()},
          {"levels", cfg.perturber.levels.size()},
          {"pairs", plan.size()}},
         "dry run: " + std::to_string(curated.size()) + " videos x " +
             std::to_string(cfg.perturber.kinds.size()) + " kinds x " +
             std::to_string(cfg.perturber.levels.size()) + " levels = " + std::to_string(plan.size()) +
             " pairs; nothing written");
    return 0;
  }

  std::vector<temple::CaptionedVideo> captioned;
  std::vector<temple::FailureRecord> caption_failures;
  const fs::path captions_path = out_path(cfg, "captions.jsonl");
  if (fs::exists(captions_path)) {
    captioned = temple::read_captions(captions_path);
  } else {
    temple::CaptionRunResult cres = temple::run_caption(cfg, curated, g.jobs);
    captioned = std::move(cres.captioned);
    caption_failures = std::move(cres.failures);
    temple::write_captions(captions_path, captioned);
    temple::write_failures(out_path(cfg, "failures_caption.jsonl"), caption_failures);
  }

  temple::BuildResult result = temple::build_pairs(cfg, curated, captioned, g.jobs);
  for (auto& f : caption_failures) result.failures.push_back(std::move(f));
  const fs::path dataset_dir = out_path(cfg, "dataset");
  temple::write_dataset(dataset_dir, cfg, result);

  std::size_t total = 0;
  ordered_json counts = ordered_json::object();
  std::string count_text;
  for (const auto& [r, pairs] : result.pairs_by_level) {
    total += pairs.size();
    counts[std::to_string(r)] = pairs.size();
    count_text += "\n  r=" + std::to_string(r) + ": " + std::to_string(pairs.size()) + " pairs";
  }
  emit(g, "build_pairs_done",
       {{"pairs", total},
        {"counts", counts},
        {"skips", result.skips.size()},
        {"failures", result.failures.size()},
        {"dataset_dir", dataset_dir.string()}},
       "built " + std::to_string(total) + " pairs into " + dataset_dir.string() + count_text +
           "\n  skips: " + std::to_string(result.skips.size()) +
           ", failures: " + std::to_string(result.failures.size()));
  if (total == 0 && !result.failures.empty()) {
    throw temple::BackendError("pair construction failed for every video: " +
                               result.failures.front().message);
  }
  return 0;
}

int cmd_stats(const GlobalOpts& g) {
  const temple::PipelineConfig cfg = load_effective_config(g);
  const fs::path events_path = out_path(cfg, "funnel_events.jsonl");
  if (!fs::exists(events_path)) {
    throw temple::InputError("no funnel event log at " + events_path.string() + " (run `select` first)");
  }
  temple::FunnelReport report = temple::funnel_stats(temple::read_funnel_events(events_path));
  report.config_hash = temple::config_hash(cfg);

  const fs::path manifest_path = out_path(cfg, "dataset") / "manifest.json";
  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path, std::ios::binary);
    const nlohmann::json manifest = nlohmann::json::parse(in);
    for (const auto& [key, value] : manifest.at("counts").items()) {
      report.pairs_per_level[std::stoi(key)] = value.get<std::size_t>();
    }
  }

  const fs::path report_path = out_path(cfg, "funnel_report.json");
  {
    std::ofstream out(report_path, std::ios::binary);
    if (!out) throw temple::InputError("cannot write " + report_path.string());
    out << temple::funnel_report_json(report).dump(2) << "\n";
  }

  if (g.log_format == "jsonl") {
    std::cout << temple::funnel_report_json(report).dump() << "\n";
  } else {
    std::cout << temple::render_funnel_table(report);
  }
  return 0;
}

int cmd_schedule(const GlobalOpts& g) {
  const temple::PipelineConfig cfg = load_effective_config(g);
  const fs::path dataset_dir = out_path(cfg, "dataset");
  const auto stages =
      temple::make_schedule(cfg.perturber.levels, cfg.pairset.budget_per_stage, dataset_dir);

  fs::create_directories(cfg.paths.out_dir);
  ordered_json list = ordered_json::array();
  for (const auto& s : stages) {
    list.push_back({{"stage_index", s.stage_index},
                    {"r", s.r},
                    {"dataset_path", s.dataset_path},
                    {"steps", s.steps}});
    emit(g, "stage",
         {{"stage_index", s.stage_index}, {"r", s.r}, {"dataset_path", s.dataset_path}, {"steps", s.steps}},
         "stage " + std::to_string(s.stage_index) + ": r=" + std::to_string(s.r) + ", steps=" +
             std::to_string(s.steps) + ", dataset=" + s.dataset_path);
  }
  const fs::path path = out_path(cfg, "schedule.json");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw temple::InputError("cannot write " + path.string());
  out << list.dump(2) << "\n";
  if (g.log_format != "jsonl") std::cout << "schedule written to " << path.string() << "\n";
  return 0;
}

int cmd_train_toy(const GlobalOpts& g, const std::string& order_str, bool use_dataset,
                  int pairs_per_stage, int vocab, int context_dim) {
  const temple::PipelineConfig cfg = load_effective_config(g);
  const temple::CurriculumOrder order = temple::order_from_string(order_str);

  std::vector<int> levels = cfg.perturber.levels;
  std::sort(levels.begin(), levels.end(), std::greater<int>());

  std::vector<temple::StageData> stages;
  if (use_dataset) {
    const fs::path dataset_dir = out_path(cfg, "dataset");
    const fs::path manifest_path = dataset_dir / "manifest.json";
    if (!fs::exists(manifest_path)) {
      throw temple::InputError("no dataset manifest at " + manifest_path.string() +
                               " (run `build-pairs` first or drop --from-dataset)");
    }
    for (const int r : levels) {
      temple::StageData stage;
      stage.r = r;
      const fs::path path = dataset_dir / temple::dataset_filename(r);
      std::ifstream in(path, std::ios::binary);
      if (!in) throw temple::InputError("cannot open dataset file: " + path.string());
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const temple::PreferencePair p = temple::pair_from_record(nlohmann::json::parse(line));
        stage.pairs.push_back(
            temple::tokenize_pair(p.instruction, p.chosen, p.rejected, p.r, vocab, context_dim));
      }
      stages.push_back(std::move(stage));
    }
  } else {
    for (const int r : levels) {
      temple::StageData stage;
      stage.r = r;
      stage.pairs = temple::synthetic_stage_pairs(
          r, pairs_per_stage, vocab, context_dim,
          temple::derive_seed(cfg.dpo.seed, "synthetic", "stage", r));
      stages.push_back(std::move(stage));
    }
  }

  temple::ToyModel model = temple::ToyModel::zeros(vocab, context_dim);
  const temple::RunLog log = temple::run_curriculum(model, stages, order, cfg.dpo);

  const fs::path train_dir = out_path(cfg, "train");
  fs::create_directories(train_dir);
  const fs::path log_path = train_dir / ("runlog_" + order_str + ".jsonl");
  temple::write_runlog_jsonl(log_path, log);

  std::vector<temple::PlotSeries> loss_series, margin_series, grad_series;
  for (const auto& stage : log.stages) {
    const std::string label = "stage " + std::to_string(stage.stage_index) + " r=" +
                              std::to_string(stage.r) + " " + temple::to_string(stage.objective);
    temple::PlotSeries loss{label, {}}, margin{label, {}}, grad{label, {}};
    for (const auto& rec : stage.steps) {
      loss.values.push_back(rec.loss);
      margin.values.push_back(rec.margin);
      grad.values.push_back(rec.grad_norm);
    }
    loss_series.push_back(std::move(loss));
    margin_series.push_back(std::move(margin));
    grad_series.push_back(std::move(grad));
  }
  temple::write_line_chart(train_dir / ("loss_" + order_str + ".svg"), "loss per step (" + order_str + ")",
                           loss_series);
  temple::write_line_chart(train_dir / ("margin_" + order_str + ".svg"),
                           "mean reward margin per step (" + order_str + ")", margin_series);
  temple::write_line_chart(train_dir / ("grad_norm_" + order_str + ".svg"),
                           "gradient norm per step (" + order_str + ")", grad_series);

  for (const auto& stage : log.stages) {
    const auto& last = stage.steps.back();
    emit(g, "stage_done",
         {{"stage", stage.stage_index},
          {"r", stage.r},
          {"objective", temple::to_string(stage.objective)},
          {"final_loss", last.loss},
          {"final_margin", last.margin}},
         "stage " + std::to_string(stage.stage_index) + " (r=" + std::to_string(stage.r) + ", " +
             temple::to_string(stage.objective) + "): final loss " + std::to_string(last.loss) +
             ", final margin " + std::to_string(last.margin));
  }
  emit(g, "train_toy_done", {{"runlog", log_path.string()}},
       "run log written to " + log_path.string());
  return 0;
}

int cmd_validate(const GlobalOpts& g, const std::string& dataset_dir_flag) {
  const temple::PipelineConfig cfg = load_effective_config(g);
  const fs::path dataset_dir =
      dataset_dir_flag.empty() ? out_path(cfg, "dataset") : fs::path(dataset_dir_flag);
  temple::validate_dataset(dataset_dir);
  emit(g, "validate_done", {{"dataset_dir", dataset_dir.string()}, {"ok", true}},
       "dataset valid: " + dataset_dir.string());
  return 0;
}

int cmd_perturb_preview(const GlobalOpts& g, const std::string& video_id, const std::string& kind_str,
                        int r, int variant) {
  const temple::PipelineConfig cfg = load_effective_config(g);
  const auto curated = load_curated_or_die(cfg);
  const temple::PerturbationKind kind = temple::kind_from_string(kind_str);

  const temple::CuratedVideo* video = nullptr;
  for (const auto& v : curated) {
    if (v.video_id == video_id) {
      video = &v;
      break;
    }
  }
  if (!video) throw temple::InputError("video " + video_id + " is not in the curated manifest");

  std::vector<int> ids;
  for (const auto& c : video->clips) ids.push_back(c.clip_id);
  const std::string label =
      variant == 0 ? kind_str : kind_str + "/" + std::to_string(variant);
  temple::PerturbationSpec spec;
  spec.kind = kind;
  spec.r = r;
  spec.seed = temple::derive_seed(cfg.perturber.global_seed, video_id, label, r);
  const temple::PerturbedSequence seq = temple::apply_perturbation(ids, spec);

  ordered_json j;
  j["video_id"] = video_id;
  j["kind"] = temple::to_string(kind);
  j["r"] = r;
  j["seed"] = std::to_string(spec.seed);
  j["original_clip_ids"] = seq.original_clip_ids;
  j["output_clip_ids"] = seq.output_clip_ids;
  j["group_sizes"] = seq.group_sizes;
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("temple-forge ") + temple::kVersion +
               " - deterministic video-to-preference-pair curation pipeline"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "pipeline config file (JSON)");
  app.add_option("--jobs", g.jobs, "worker threads for per-video stages")
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "override the configured global seed");
  app.add_flag("--dry-run", g.dry_run, "print the plan without writing anything");
  app.add_option("--log-format", g.log_format, "structured or human output")
      ->check(CLI::IsMember({"text", "jsonl"}));

  auto* make_demo = app.add_subcommand("make-demo", "write the synthetic 20-video demo corpus");
  std::string demo_dir = "demo";
  make_demo->add_option("--dir", demo_dir, "target directory");

  auto* select = app.add_subcommand("select", "segment, filter, and gate every manifest video");
  auto* caption = app.add_subcommand("caption", "caption curated videos clip by clip");
  auto* build = app.add_subcommand("build-pairs", "emit the difficulty-partitioned pair dataset");
  auto* stats = app.add_subcommand("stats", "render the selection funnel report");
  auto* schedule = app.add_subcommand("schedule", "emit the difficulty curriculum stages");

  auto* train = app.add_subcommand("train-toy", "train the toy model through the curriculum");
  std::string order = "dpo_only";
  bool from_dataset = false;
  int pairs_per_stage = 32;
  int vocab = 8;
  int context_dim = 2;
  train->add_option("--order", order, "dpo_then_sft | sft_then_dpo | sft_only | dpo_only")
      ->check(CLI::IsMember({"dpo_then_sft", "sft_then_dpo", "sft_only", "dpo_only"}));
  train->add_flag("--from-dataset", from_dataset,
                  "tokenize the built dataset instead of synthetic pairs");
  train->add_option("--pairs-per-stage", pairs_per_stage, "synthetic pairs per difficulty level")
      ->check(CLI::PositiveNumber);
  train->add_option("--vocab", vocab, "toy vocabulary size")->check(CLI::Range(3, 64));
  train->add_option("--context-dim", context_dim, "toy context dimension")->check(CLI::Range(1, 16));

  auto* validate = app.add_subcommand("validate", "re-check every invariant of a built dataset");
  std::string dataset_dir_flag;
  validate->add_option("--dataset", dataset_dir_flag, "dataset directory (default <out_dir>/dataset)");

  auto* preview = app.add_subcommand("perturb-preview", "print one perturbed clip sequence");
  std::string pv_video, pv_kind = "shuffle";
  int pv_r = 4, pv_variant = 0;
  preview->add_option("--video", pv_video, "curated video id")->required();
  preview->add_option("--kind", pv_kind, "drop | shuffle | reverse")
      ->check(CLI::IsMember({"drop", "shuffle", "reverse"}));
  preview->add_option("--r", pv_r, "difficulty factor")->check(CLI::Range(2, 1 << 20));
  preview->add_option("--variant", pv_variant, "variant index")->check(CLI::NonNegativeNumber);

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (make_demo->parsed()) return cmd_make_demo(g, demo_dir);
    if (select->parsed()) return cmd_select(g);
    if (caption->parsed()) return cmd_caption(g);
    if (build->parsed()) return cmd_build_pairs(g);
    if (stats->parsed()) return cmd_stats(g);
    if (schedule->parsed()) return cmd_schedule(g);
    if (train->parsed())
      return cmd_train_toy(g, order, from_dataset, pairs_per_stage, vocab, context_dim);
    if (validate->parsed()) return cmd_validate(g, dataset_dir_flag);
    if (preview->parsed()) return cmd_perturb_preview(g, pv_video, pv_kind, pv_r, pv_variant);
    std::cerr << "input error: no subcommand given\n";
    return 1;
  } catch (const temple::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const temple::BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return 2;
  } catch (const temple::InvariantError& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
