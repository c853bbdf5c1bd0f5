#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace arm3d::cli {

namespace fs = std::filesystem;

/// SHA-1 of "blob <size>\0<content>", as `git hash-object` prints it.
std::string git_blob_sha1(std::string_view content);

std::string read_text_file(const fs::path& path);
void write_text_file(const fs::path& path, std::string_view content);

/// Content hashes of input files, keyed by the path as given. Directories
/// are expanded to their regular files in sorted order.
nlohmann::json hash_inputs(const std::vector<fs::path>& inputs);

/// Hash over a hash_inputs() listing: one "sha path" line per file.
std::string combined_hash(const nlohmann::json& hashes);

/// Writes manifest.json (command, resolved settings, input hashes) and
/// config.ini (the same settings in the format --config reads).
void write_manifest(const fs::path& dir, const std::string& command, const nlohmann::json& settings,
                    const std::string& config_text, const std::vector<fs::path>& inputs);

/// Holds `<dir>/.arm3d.lock` for the lifetime of the object. A second
/// holder of the same directory fails with UsageError.
class DirectoryLock {
 public:
  explicit DirectoryLock(const fs::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  fs::path path_;
};

}  // namespace arm3d::cli
