// temple_forge._core: python access to the curation pipeline, the clip
// perturbations, and the toy preference-training harness.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "temple/config.hpp"
#include "temple/demo_corpus.hpp"
#include "temple/dpo.hpp"
#include "temple/error.hpp"
#include "temple/pairset.hpp"
#include "temple/perturber.hpp"
#include "temple/pipeline.hpp"
#include "temple/rng.hpp"
#include "temple/version.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;

namespace {

temple::PipelineConfig config_for(const std::string& config_path, std::optional<std::uint64_t> seed) {
  temple::PipelineConfig cfg = temple::load_config(config_path);
  if (seed) {
    cfg.perturber.global_seed = *seed;
    cfg.dpo.seed = *seed;
  }
  return cfg;
}

fs::path out_path(const temple::PipelineConfig& cfg, const std::string& name) {
  return fs::path(cfg.paths.out_dir) / name;
}

void check_jobs(int jobs) {
  if (jobs < 1) throw temple::InputError("jobs must be >= 1");
}

py::object json_to_py(const nlohmann::ordered_json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Deterministic video curation into temporal-preference pairs, plus a toy "
            "differentiable preference-training harness.";
  m.attr("__version__") = temple::kVersion;

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const temple::InputError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const temple::BackendError& e) {
      PyErr_SetString(PyExc_RuntimeError, e.what());
    } catch (const temple::InvariantError& e) {
      PyErr_SetString(PyExc_RuntimeError, e.what());
    }
  });

  m.def(
      "make_demo_corpus",
      [](const std::string& dir) {
        temple::DemoPaths paths;
        {
          py::gil_scoped_release release;
          paths = temple::write_demo_corpus(dir);
        }
        py::dict out;
        out["root"] = paths.root.string();
        out["manifest"] = paths.manifest.string();
        out["config"] = paths.config.string();
        return out;
      },
      py::arg("dir"), "Write the synthetic 20-video demo corpus and its config.");

  m.def(
      "select",
      [](const std::string& config_path, int jobs, std::optional<std::uint64_t> seed) {
        check_jobs(jobs);
        temple::PipelineConfig cfg;
        temple::SelectResult result;
        {
          py::gil_scoped_release release;
          cfg = config_for(config_path, seed);
          fs::create_directories(cfg.paths.out_dir);
          result = temple::run_select(cfg, jobs);
          temple::write_curated(out_path(cfg, "curated.jsonl"), result.curated);
          temple::write_funnel_events(out_path(cfg, "funnel_events.jsonl"), result.events);
          temple::write_failures(out_path(cfg, "failures_select.jsonl"), result.failures);
        }
        py::dict out;
        out["curated"] = result.curated.size();
        out["failures"] = result.failures.size();
        out["out_dir"] = cfg.paths.out_dir;
        return out;
      },
      py::arg("config_path"), py::arg("jobs") = 1, py::arg("seed") = py::none(),
      "Segment, filter, and gate every manifest video; writes curated.jsonl, "
      "funnel_events.jsonl, and failures_select.jsonl under paths.out_dir.");

  m.def(
      "caption",
      [](const std::string& config_path, int jobs) {
        check_jobs(jobs);
        temple::CaptionRunResult result;
        {
          py::gil_scoped_release release;
          const temple::PipelineConfig cfg = config_for(config_path, std::nullopt);
          const auto curated = temple::read_curated(out_path(cfg, "curated.jsonl"));
          result = temple::run_caption(cfg, curated, jobs);
          temple::write_captions(out_path(cfg, "captions.jsonl"), result.captioned);
          temple::write_failures(out_path(cfg, "failures_caption.jsonl"), result.failures);
        }
        py::dict out;
        out["captioned"] = result.captioned.size();
        out["failures"] = result.failures.size();
        return out;
      },
      py::arg("config_path"), py::arg("jobs") = 1,
      "Caption every curated video clip by clip; requires a prior select().");

  m.def(
      "build_pairs",
      [](const std::string& config_path, int jobs, std::optional<std::uint64_t> seed) {
        check_jobs(jobs);
        temple::PipelineConfig cfg;
        temple::BuildResult result;
        fs::path dataset_dir;
        {
          py::gil_scoped_release release;
          cfg = config_for(config_path, seed);
          const auto curated = temple::read_curated(out_path(cfg, "curated.jsonl"));

          std::vector<temple::CaptionedVideo> captioned;
          const fs::path captions_path = out_path(cfg, "captions.jsonl");
          if (fs::exists(captions_path)) {
            captioned = temple::read_captions(captions_path);
          } else {
            temple::CaptionRunResult cres = temple::run_caption(cfg, curated, jobs);
            captioned = std::move(cres.captioned);
            temple::write_captions(captions_path, captioned);
            temple::write_failures(out_path(cfg, "failures_caption.jsonl"), cres.failures);
            for (auto& f : cres.failures) result.failures.push_back(std::move(f));
          }

          temple::BuildResult built = temple::build_pairs(cfg, curated, captioned, jobs);
          for (auto& f : result.failures) built.failures.push_back(std::move(f));
          result = std::move(built);
          dataset_dir = out_path(cfg, "dataset");
          temple::write_dataset(dataset_dir, cfg, result);
        }
        std::size_t total = 0;
        py::dict counts;
        for (const auto& [r, pairs] : result.pairs_by_level) {
          total += pairs.size();
          counts[py::int_(r)] = pairs.size();
        }
        py::dict out;
        out["pairs"] = total;
        out["counts"] = counts;
        out["skips"] = result.skips.size();
        out["failures"] = result.failures.size();
        out["dataset_dir"] = dataset_dir.string();
        return out;
      },
      py::arg("config_path"), py::arg("jobs") = 1, py::arg("seed") = py::none(),
      "Build the difficulty-partitioned preference-pair dataset; captions are "
      "reused from captions.jsonl when present, otherwise generated inline.");

  m.def(
      "validate_dataset",
      [](const std::string& dataset_dir) {
        py::gil_scoped_release release;
        temple::validate_dataset(dataset_dir);
      },
      py::arg("dataset_dir"), "Re-check every dataset invariant; raises on corruption.");

  m.def(
      "funnel_report",
      [](const std::string& config_path) {
        const temple::PipelineConfig cfg = config_for(config_path, std::nullopt);
        temple::FunnelReport report =
            temple::funnel_stats(temple::read_funnel_events(out_path(cfg, "funnel_events.jsonl")));
        report.config_hash = temple::config_hash(cfg);
        const fs::path manifest_path = out_path(cfg, "dataset") / "manifest.json";
        if (fs::exists(manifest_path)) {
          std::ifstream in(manifest_path, std::ios::binary);
          const nlohmann::json manifest = nlohmann::json::parse(in);
          for (const auto& [key, value] : manifest.at("counts").items()) {
            report.pairs_per_level[std::stoi(key)] = value.get<std::size_t>();
          }
        }
        return json_to_py(temple::funnel_report_json(report));
      },
      py::arg("config_path"),
      "Per-bucket selection funnel counts as a dict; requires a prior select().");

  m.def(
      "config_hash",
      [](const std::string& config_path) { return temple::config_hash(temple::load_config(config_path)); },
      py::arg("config_path"), "16-hex-digit hash of the canonicalized config.");

  m.def(
      "derive_seed",
      [](std::uint64_t global_seed, const std::string& video_id, const std::string& kind, int r) {
        return temple::derive_seed(global_seed, video_id, kind, r);
      },
      py::arg("global_seed"), py::arg("video_id"), py::arg("kind"), py::arg("r"),
      "Stable per-(video, kind, r) seed used for every random decision.");

  m.def(
      "partition_groups",
      [](const std::vector<int>& ids, int r) { return temple::partition_groups(ids, r); },
      py::arg("clip_ids"), py::arg("r"),
      "Contiguous balanced partition into max(2, ceil(N/r)) groups.");

  m.def(
      "apply_perturbation",
      [](const std::vector<int>& ids, const std::string& kind, int r, std::uint64_t seed) {
        temple::PerturbationSpec spec;
        spec.kind = temple::kind_from_string(kind);
        spec.r = r;
        spec.seed = seed;
        const temple::PerturbedSequence out = temple::apply_perturbation(ids, spec);
        py::dict d;
        d["output_clip_ids"] = out.output_clip_ids;
        d["group_sizes"] = out.group_sizes;
        return d;
      },
      py::arg("clip_ids"), py::arg("kind"), py::arg("r"), py::arg("seed"),
      "Seeded drop / shuffle / reverse of a clip-id sequence at difficulty r.");

  m.def(
      "train_toy",
      [](const std::string& order, std::vector<int> levels, int pairs_per_stage, int vocab,
         int context_dim, double beta, double learning_rate, int steps_per_stage,
         std::uint64_t seed) {
        temple::RunLog log;
        {
          py::gil_scoped_release release;
          const temple::CurriculumOrder ord = temple::order_from_string(order);
          std::sort(levels.begin(), levels.end(), std::greater<int>());
          std::vector<temple::StageData> stages;
          for (const int r : levels) {
            temple::StageData stage;
            stage.r = r;
            stage.pairs = temple::synthetic_stage_pairs(
                r, pairs_per_stage, vocab, context_dim,
                temple::derive_seed(seed, "synthetic", "stage", r));
            stages.push_back(std::move(stage));
          }
          temple::ToyModel model = temple::ToyModel::zeros(vocab, context_dim);
          temple::DpoConfig cfg;
          cfg.beta = beta;
          cfg.learning_rate = learning_rate;
          cfg.steps_per_stage = steps_per_stage;
          cfg.seed = seed;
          log = temple::run_curriculum(model, stages, ord, cfg);
        }
        py::list out;
        for (const auto& stage : log.stages) {
          py::dict d;
          d["stage"] = stage.stage_index;
          d["objective"] = temple::to_string(stage.objective);
          d["r"] = stage.r;
          d["steps"] = stage.steps.size();
          d["final_loss"] = stage.steps.back().loss;
          d["final_margin"] = stage.steps.back().margin;
          out.append(std::move(d));
        }
        return out;
      },
      py::arg("order") = "dpo_only", py::arg("levels") = std::vector<int>{16, 8, 4, 2},
      py::arg("pairs_per_stage") = 32, py::arg("vocab") = 8, py::arg("context_dim") = 2,
      py::arg("beta") = 0.1, py::arg("learning_rate") = 0.05, py::arg("steps_per_stage") = 100,
      py::arg("seed") = 0,
      "Run the synthetic curriculum hardest-first and return per-stage summaries.");
}
