#pragma once

#include <filesystem>
#include <functional>
#include <string>

namespace stroke::io {

// Writes into a sibling temp file and renames over the target, so readers
// never observe a partially written artifact.
void atomic_write_bytes(const std::filesystem::path& path, const void* data, std::size_t nbytes);
void atomic_write_text(const std::filesystem::path& path, const std::string& text);
void atomic_write(const std::filesystem::path& path,
                  const std::function<void(const std::filesystem::path& tmp)>& producer);

std::string read_text(const std::filesystem::path& path);

// Advisory per-directory lock (flock on <dir>/.stroke.lock). Held for the
// lifetime of the object; construction fails if another process holds it.
class DirLock {
 public:
  explicit DirLock(const std::filesystem::path& dir);
  ~DirLock();
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  int fd_ = -1;
};

}  // namespace stroke::io
