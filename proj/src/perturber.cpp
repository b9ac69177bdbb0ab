#include "temple/perturber.hpp"

#include <algorithm>
#include <numeric>

#include "temple/error.hpp"
#include "temple/rng.hpp"

namespace temple {

const char* to_string(PerturbationKind k) {
  switch (k) {
    case PerturbationKind::kDrop: return "drop";
    case PerturbationKind::kShuffle: return "shuffle";
    case PerturbationKind::kReverse: return "reverse";
  }
  return "unknown";
}

PerturbationKind kind_from_string(const std::string& s) {
  if (s == "drop") return PerturbationKind::kDrop;
  if (s == "shuffle") return PerturbationKind::kShuffle;
  if (s == "reverse") return PerturbationKind::kReverse;
  throw InputError("unknown perturbation kind: " + s);
}

std::vector<int> clip_ids(const std::vector<Clip>& clips) {
  std::vector<int> ids;
  ids.reserve(clips.size());
  for (const Clip& c : clips) ids.push_back(c.clip_id);
  return ids;
}

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

void check_spec(const PerturbationSpec& spec, PerturbationKind want) {
  if (spec.kind != want) throw InputError("perturbation spec kind mismatch");
  if (spec.r < 2) throw InputError("difficulty factor r must be >= 2");
}

}  // namespace

PerturbedSequence drop_clips(const std::vector<int>& ids, const PerturbationSpec& spec) {
  check_spec(spec, PerturbationKind::kDrop);
  const std::int64_t n = static_cast<std::int64_t>(ids.size());
  if (n < 1) throw InputError("drop_clips: empty clip list");
  const std::int64_t keep = ceil_div(n, spec.r);

  // Fisher-Yates prefix: the first `keep` slots end up a uniform sample
  // without replacement.
  SplitMix64 rng(spec.seed);
  std::vector<int> pos(n);
  std::iota(pos.begin(), pos.end(), 0);
  for (std::int64_t i = 0; i < keep; ++i) {
    const std::int64_t j = i + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(pos[i], pos[j]);
  }
  std::vector<int> picked(pos.begin(), pos.begin() + keep);
  std::sort(picked.begin(), picked.end());

  PerturbedSequence out;
  out.original_clip_ids = ids;
  out.spec = spec;
  out.output_clip_ids.reserve(keep);
  for (int p : picked) out.output_clip_ids.push_back(ids[p]);
  return out;
}

std::vector<std::vector<int>> partition_groups(const std::vector<int>& ids, int r) {
  const std::int64_t n = static_cast<std::int64_t>(ids.size());
  if (n < 1) throw InputError("partition_groups: empty clip list");
  if (r < 2) throw InputError("difficulty factor r must be >= 2");

  // ceil(N/r) groups, floored at 2 so a perturbation always exists.
  const std::int64_t g = n == 1 ? 1 : std::max<std::int64_t>(2, ceil_div(n, r));
  const std::int64_t base = n / g;
  const std::int64_t big = n % g;  // first `big` groups get one extra clip

  std::vector<std::vector<int>> groups;
  groups.reserve(g);
  std::int64_t at = 0;
  for (std::int64_t i = 0; i < g; ++i) {
    const std::int64_t size = base + (i < big ? 1 : 0);
    groups.emplace_back(ids.begin() + at, ids.begin() + at + size);
    at += size;
  }
  return groups;
}

namespace {

PerturbedSequence concat_groups(const std::vector<int>& ids, const PerturbationSpec& spec,
                                const std::vector<std::vector<int>>& groups,
                                const std::vector<std::size_t>& order) {
  PerturbedSequence out;
  out.original_clip_ids = ids;
  out.spec = spec;
  out.output_clip_ids.reserve(ids.size());
  for (std::size_t gi : order) {
    out.group_sizes.push_back(static_cast<int>(groups[gi].size()));
    out.output_clip_ids.insert(out.output_clip_ids.end(), groups[gi].begin(), groups[gi].end());
  }
  return out;
}

}  // namespace

PerturbedSequence shuffle_groups(const std::vector<int>& ids, const PerturbationSpec& spec) {
  check_spec(spec, PerturbationKind::kShuffle);
  if (ids.size() < 2) throw InputError("shuffle_groups: need at least 2 clips");

  const auto groups = partition_groups(ids, spec.r);
  std::vector<std::size_t> order(groups.size());
  SplitMix64 rng(spec.seed);
  for (;;) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(rng.below(i + 1));
      std::swap(order[i], order[j]);
    }
    if (!std::is_sorted(order.begin(), order.end())) break;  // reject the identity
  }
  return concat_groups(ids, spec, groups, order);
}

PerturbedSequence reverse_groups(const std::vector<int>& ids, const PerturbationSpec& spec) {
  check_spec(spec, PerturbationKind::kReverse);
  if (ids.size() < 2) throw InputError("reverse_groups: need at least 2 clips");

  const auto groups = partition_groups(ids, spec.r);
  std::vector<std::size_t> order(groups.size());
  std::iota(order.rbegin(), order.rend(), 0);
  return concat_groups(ids, spec, groups, order);
}

PerturbedSequence apply_perturbation(const std::vector<int>& ids, const PerturbationSpec& spec) {
  switch (spec.kind) {
    case PerturbationKind::kDrop: return drop_clips(ids, spec);
    case PerturbationKind::kShuffle: return shuffle_groups(ids, spec);
    case PerturbationKind::kReverse: return reverse_groups(ids, spec);
  }
  throw InputError("unknown perturbation kind");
}

}  // namespace temple
