#include "benchforge/cli/run_dir.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <algorithm>
#include <cctype>
#include <cstring>

#include "benchforge/error.hpp"

namespace benchforge::cli {

RunLock::RunLock(const std::filesystem::path& run_dir) : path_(run_dir / ".lock") {
  std::filesystem::create_directories(run_dir);
  int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST)
      throw Error("run directory is locked by another writer (remove " + path_.string() + " if stale)");
    throw Error("cannot create lock " + path_.string() + ": " + std::strerror(errno));
  }
  std::string pid = std::to_string(::getpid()) + "\n";
  (void)!::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

std::filesystem::path inside(const std::filesystem::path& run_dir, const std::filesystem::path& rel) {
  auto p = (run_dir / rel).lexically_normal();
  auto r = run_dir.lexically_normal();
  auto [a, b] = std::mismatch(r.begin(), r.end(), p.begin(), p.end());
  if (a != r.end()) throw ValidationError("path escapes the run directory: " + rel.string());
  return p;
}

std::string safe_name(const std::string& s) {
  std::string out;
  for (char c : s) out.push_back((std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_');
  return out;
}

}  // namespace benchforge::cli
