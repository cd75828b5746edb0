#pragma once

#include <filesystem>
#include <string>

namespace mfatdnn::cli {

// Run directory owned by one process:
//   <root>/{config, corpus, checkpoints, features, scores, reports}
// The lock file <root>/.lock is created exclusively on construction and
// removed on destruction; a second owner gets a StateError.
class RunDir {
 public:
  explicit RunDir(std::filesystem::path root);
  ~RunDir();
  RunDir(const RunDir&) = delete;
  RunDir& operator=(const RunDir&) = delete;

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path config() const { return root_ / "config"; }
  std::filesystem::path corpus() const { return root_ / "corpus"; }
  std::filesystem::path checkpoints() const { return root_ / "checkpoints"; }
  std::filesystem::path features() const { return root_ / "features"; }
  std::filesystem::path scores() const { return root_ / "scores"; }
  std::filesystem::path reports() const { return root_ / "reports"; }

 private:
  std::filesystem::path root_;
  std::filesystem::path lock_;
};

// Writes `text` to `path` through a temporary file and rename.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace mfatdnn::cli
