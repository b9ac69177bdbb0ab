#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "temple/frame.hpp"
#include "temple/segmenter.hpp"

namespace temple {

struct Clip {
  int clip_id = 0;  // consecutive from 0 in temporal order
  SceneBoundary scene;
  int middle_frame = 0;
};

struct ClipEmbedding {
  int clip_id = 0;
  Eigen::VectorXd vector;  // unit L2 norm
};

struct ClipGroup {
  int group_id = 0;  // founding order
  std::vector<int> member_clip_ids;
  Eigen::VectorXd centroid;  // unit-normalized mean of members
};

struct GrouperConfig {
  double tau = 0.85;
  int min_groups = 4;
  int max_groups = 32;
};

enum class GroupGate { kKeep, kRejectSparse, kRejectComplex };

const char* to_string(GroupGate g);

int middle_frame(const SceneBoundary& scene);

// Clips over the kept scenes, ids renumbered from 0 in temporal order.
std::vector<Clip> make_clips(const std::vector<SceneBoundary>& kept_scenes);

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Fallback embedding when no sidecar file is supplied: per-channel 64-bin
// RGB color histograms concatenated (192 dims), L2-normalized.
Eigen::VectorXd histogram_embedding(const Frame& frame);

std::vector<ClipEmbedding> builtin_embeddings(const FrameSequence& seq, const std::vector<Clip>& clips);

// Sidecar format: header `dim=<int>`, then one line per clip
// `clip_id: f,f,...,f`. Vectors are L2-normalized on load and must cover
// the clip ids exactly.
std::vector<ClipEmbedding> import_embeddings(const std::filesystem::path& path, const std::vector<Clip>& clips);

// Greedy temporal-order agglomeration: each clip joins the earliest group
// whose centroid cosine reaches tau, else founds a new group; the centroid
// is re-normalized after every join.
std::vector<ClipGroup> group_clips(const std::vector<ClipEmbedding>& embeddings, const GrouperConfig& cfg);

GroupGate gate_group_count(const std::vector<ClipGroup>& groups, const GrouperConfig& cfg);

}  // namespace temple
