#include "temple/subprocess.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "temple/error.hpp"

namespace fs = std::filesystem;

namespace temple {

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

SubprocessResult run_shell(const std::string& command) {
  TempDir dir("temple-sh");
  const fs::path out = dir.path() / "out";
  const fs::path err = dir.path() / "err";
  const std::string full = "(" + command + ") >" + shell_quote(out.string()) + " 2>" + shell_quote(err.string());

  SubprocessResult res;
  const int rc = std::system(full.c_str());
  if (rc == -1) {
    res.exit_code = -1;
    res.stderr_text = "failed to spawn /bin/sh";
    return res;
  }
  res.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : 128 + WTERMSIG(rc);
  res.stdout_text = read_file(out);
  res.stderr_text = read_file(err);
  return res;
}

std::string shell_quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) {
    if (c == '\'')
      q += "'\\''";
    else
      q += c;
  }
  q += "'";
  return q;
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double parsed = std::strtod(buf, nullptr);
  for (int prec = 1; prec < 17; ++prec) {
    char shorter[64];
    std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
    if (std::strtod(shorter, nullptr) == parsed) return shorter;
  }
  return buf;
}

namespace {
std::atomic<unsigned> g_tempdir_counter{0};
}

TempDir::TempDir(const std::string& prefix) {
  const fs::path base = fs::temp_directory_path();
  for (int attempt = 0; attempt < 1000; ++attempt) {
    fs::path candidate = base / (prefix + "-" + std::to_string(::getpid()) + "-" +
                                 std::to_string(g_tempdir_counter.fetch_add(1)));
    std::error_code ec;
    if (fs::create_directory(candidate, ec)) {
      path_ = candidate;
      return;
    }
  }
  throw InputError("could not create temp directory under " + base.string());
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

}  // namespace temple
