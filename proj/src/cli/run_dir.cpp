#include "mfatdnn/cli/run_dir.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mfatdnn/error.hpp"

namespace mfatdnn::cli {

namespace fs = std::filesystem;

RunDir::RunDir(fs::path root) : root_(std::move(root)), lock_(root_ / ".lock") {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw InputError("cannot create run directory " + root_.string() + ": " + ec.message());
  const int fd = ::open(lock_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) throw StateError("run directory " + root_.string() + " is locked by " + lock_.string());
    throw InputError("cannot create lock " + lock_.string() + ": " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
  for (const auto& d : {config(), corpus(), checkpoints(), features(), scores(), reports()}) fs::create_directories(d);
}

RunDir::~RunDir() {
  std::error_code ec;
  fs::remove(lock_, ec);
}

void write_text_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
    if (!out) throw InputError("cannot write " + path.string());
  }
  fs::rename(tmp, path);
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace mfatdnn::cli
