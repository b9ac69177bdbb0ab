#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "temple/grouper.hpp"

namespace temple {

enum class PerturbationKind { kDrop, kShuffle, kReverse };

const char* to_string(PerturbationKind k);
PerturbationKind kind_from_string(const std::string& s);

struct PerturbationSpec {
  PerturbationKind kind = PerturbationKind::kDrop;
  int r = 2;  // difficulty factor, >= 2
  std::uint64_t seed = 0;
};

struct PerturbedSequence {
  std::vector<int> original_clip_ids;
  std::vector<int> output_clip_ids;
  PerturbationSpec spec;
  std::vector<int> group_sizes;  // empty for drop
};

std::vector<int> clip_ids(const std::vector<Clip>& clips);

// Keeps ceil(N/r) clips chosen uniformly at random, output in original
// temporal order.
PerturbedSequence drop_clips(const std::vector<int>& ids, const PerturbationSpec& spec);

// Contiguous balanced partition into max(2, ceil(N/r)) groups (one group
// only when N = 1); concatenating the groups reproduces the input.
std::vector<std::vector<int>> partition_groups(const std::vector<int>& ids, int r);

// Uniform non-identity permutation of group order; within-group order kept.
PerturbedSequence shuffle_groups(const std::vector<int>& ids, const PerturbationSpec& spec);

// Group order reversed; consumes no randomness.
PerturbedSequence reverse_groups(const std::vector<int>& ids, const PerturbationSpec& spec);

PerturbedSequence apply_perturbation(const std::vector<int>& ids, const PerturbationSpec& spec);

inline PerturbedSequence apply_perturbation(const std::vector<Clip>& clips, const PerturbationSpec& spec) {
  return apply_perturbation(clip_ids(clips), spec);
}

}  // namespace temple
