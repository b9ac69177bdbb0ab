#pragma once

#include <filesystem>
#include <string>

namespace temple {

struct SubprocessResult {
  int exit_code = -1;
  std::string stdout_text;
  std::string stderr_text;
};

// Runs `command` through /bin/sh -c, capturing stdout and stderr.
SubprocessResult run_shell(const std::string& command);

std::string shell_quote(const std::string& s);
void replace_all(std::string& s, const std::string& from, const std::string& to);

// Shortest decimal text that round-trips the value ("2" not "2.000000").
std::string format_double(double v);

// Self-deleting unique directory under the system temp root.
class TempDir {
 public:
  explicit TempDir(const std::string& prefix);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace temple
