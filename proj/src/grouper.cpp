#include "temple/grouper.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "temple/error.hpp"

namespace temple {

const char* to_string(GroupGate g) {
  switch (g) {
    case GroupGate::kKeep: return "keep";
    case GroupGate::kRejectSparse: return "reject_sparse";
    case GroupGate::kRejectComplex: return "reject_complex";
  }
  return "unknown";
}

int middle_frame(const SceneBoundary& scene) { return (scene.start_frame + scene.end_frame) / 2; }

std::vector<Clip> make_clips(const std::vector<SceneBoundary>& kept_scenes) {
  std::vector<Clip> clips;
  clips.reserve(kept_scenes.size());
  for (std::size_t i = 0; i < kept_scenes.size(); ++i) {
    Clip c;
    c.clip_id = static_cast<int>(i);
    c.scene = kept_scenes[i];
    c.middle_frame = middle_frame(kept_scenes[i]);
    clips.push_back(c);
  }
  return clips;
}

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw InputError("cosine: dimension mismatch");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw InputError("cosine: zero vector");
  return a.dot(b) / (na * nb);
}

Eigen::VectorXd histogram_embedding(const Frame& frame) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(192);
  for (std::size_t i = 0; i + 2 < frame.rgb.size(); i += 3) {
    for (int c = 0; c < 3; ++c) {
      v[c * 64 + (frame.rgb[i + c] >> 2)] += 1.0;
    }
  }
  const double n = v.norm();
  if (n > 0) v /= n;
  return v;
}

std::vector<ClipEmbedding> builtin_embeddings(const FrameSequence& seq, const std::vector<Clip>& clips) {
  std::vector<ClipEmbedding> out;
  out.reserve(clips.size());
  for (const Clip& c : clips) {
    if (c.middle_frame < 0 || c.middle_frame >= static_cast<int>(seq.frames.size())) {
      throw InvariantError("clip middle frame outside sequence");
    }
    out.push_back({c.clip_id, histogram_embedding(seq.frames[c.middle_frame])});
  }
  return out;
}

std::vector<ClipEmbedding> import_embeddings(const std::filesystem::path& path, const std::vector<Clip>& clips) {
  std::ifstream in(path);
  if (!in) throw InputError("embedding sidecar not found: " + path.string());

  std::string header;
  if (!std::getline(in, header) || header.rfind("dim=", 0) != 0) {
    throw InputError(path.string() + ": expected `dim=<int>` header");
  }
  const int dim = std::atoi(header.c_str() + 4);
  if (dim < 1) throw InputError(path.string() + ": invalid embedding dimension");

  std::vector<ClipEmbedding> out;
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": expected `clip_id: f,f,...`");
    }
    ClipEmbedding e;
    e.clip_id = std::atoi(line.substr(0, colon).c_str());
    e.vector.resize(dim);
    std::stringstream values(line.substr(colon + 1));
    std::string tok;
    int k = 0;
    while (std::getline(values, tok, ',')) {
      if (k >= dim) break;
      std::size_t used = 0;
      try {
        e.vector[k] = std::stod(tok, &used);
      } catch (const std::exception&) {
        throw InputError(path.string() + ":" + std::to_string(lineno) + ": bad float `" + tok + "`");
      }
      ++k;
    }
    if (k != dim || std::getline(values, tok, ',')) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": expected exactly " + std::to_string(dim) +
                       " floats");
    }
    const double n = e.vector.norm();
    if (n == 0.0) throw InputError(path.string() + ":" + std::to_string(lineno) + ": zero embedding vector");
    e.vector /= n;
    out.push_back(std::move(e));
  }

  if (out.size() != clips.size()) {
    throw InputError(path.string() + ": " + std::to_string(out.size()) + " embeddings for " +
                     std::to_string(clips.size()) + " clips");
  }
  for (std::size_t i = 0; i < clips.size(); ++i) {
    if (out[i].clip_id != clips[i].clip_id) {
      throw InputError(path.string() + ": embeddings must list clip ids in order; saw " +
                       std::to_string(out[i].clip_id) + " where " + std::to_string(clips[i].clip_id) +
                       " was expected");
    }
  }
  return out;
}

std::vector<ClipGroup> group_clips(const std::vector<ClipEmbedding>& embeddings, const GrouperConfig& cfg) {
  if (embeddings.empty()) throw InputError("group_clips: empty embedding list");

  struct Acc {
    ClipGroup group;
    Eigen::VectorXd sum;
  };
  std::vector<Acc> accs;
  for (const ClipEmbedding& e : embeddings) {
    bool joined = false;
    for (Acc& a : accs) {
      if (cosine_similarity(a.group.centroid, e.vector) >= cfg.tau) {
        a.group.member_clip_ids.push_back(e.clip_id);
        a.sum += e.vector;
        const double n = a.sum.norm();
        // Members can cancel exactly (v and -v); keep the previous centroid
        // rather than normalizing a zero vector.
        if (n > 1e-12) a.group.centroid = a.sum / n;
        joined = true;
        break;
      }
    }
    if (!joined) {
      Acc a;
      a.group.group_id = static_cast<int>(accs.size());
      a.group.member_clip_ids = {e.clip_id};
      a.group.centroid = e.vector;
      a.sum = e.vector;
      accs.push_back(std::move(a));
    }
  }

  std::vector<ClipGroup> groups;
  groups.reserve(accs.size());
  for (Acc& a : accs) groups.push_back(std::move(a.group));
  return groups;
}

GroupGate gate_group_count(const std::vector<ClipGroup>& groups, const GrouperConfig& cfg) {
  const int n = static_cast<int>(groups.size());
  if (n < cfg.min_groups) return GroupGate::kRejectSparse;
  if (n > cfg.max_groups) return GroupGate::kRejectComplex;
  return GroupGate::kKeep;
}

}  // namespace temple
