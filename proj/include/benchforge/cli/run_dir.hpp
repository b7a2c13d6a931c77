#pragma once

#include <filesystem>
#include <string>

namespace benchforge::cli {

/// Exclusive writer lock on a run directory (`.lock`, created with O_EXCL).
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& run_dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

/// Rejects paths escaping the run directory.
std::filesystem::path inside(const std::filesystem::path& run_dir, const std::filesystem::path& rel);

/// File-name-safe form of an identifier that may contain '/' or ':'.
std::string safe_name(const std::string& s);

}  // namespace benchforge::cli
