#include "stroke/io/atomic_file.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <fstream>
#include <sstream>

#include "stroke/core/error.hpp"

namespace stroke::io {

void atomic_write(const std::filesystem::path& path,
                  const std::function<void(const std::filesystem::path& tmp)>& producer) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  try {
    producer(tmp);
    std::filesystem::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    throw;
  }
}

void atomic_write_bytes(const std::filesystem::path& path, const void* data, std::size_t nbytes) {
  atomic_write(path, [&](const std::filesystem::path& tmp) {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) fail(ErrorKind::Runtime, "cannot open for writing: " + tmp.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(nbytes));
    if (!out) fail(ErrorKind::Runtime, "short write: " + tmp.string());
  });
}

void atomic_write_text(const std::filesystem::path& path, const std::string& text) {
  atomic_write_bytes(path, text.data(), text.size());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Data, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

DirLock::DirLock(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path lock_path = dir / ".stroke.lock";
  fd_ = ::open(lock_path.c_str(), O_CREAT | O_RDWR, 0644);
  if (fd_ < 0) fail(ErrorKind::Runtime, "cannot open lock file " + lock_path.string());
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    fail(ErrorKind::Runtime,
         "artifact directory is locked by another run: " + dir.string());
  }
}

DirLock::~DirLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

}  // namespace stroke::io
