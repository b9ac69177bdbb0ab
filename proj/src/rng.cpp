#include "temple/rng.hpp"

#include <fstream>

#include "temple/error.hpp"

namespace temple {

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file for hashing: " + path);
  std::uint64_t h = kFnvOffset;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    h = fnv1a64(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view video_id,
                          std::string_view kind, int r) {
  const char sep = '\x1f';
  std::string key = std::to_string(global_seed);
  key += sep;
  key += video_id;
  key += sep;
  key += kind;
  key += sep;
  key += std::to_string(r);
  return fnv1a64(key);
}

}  // namespace temple
