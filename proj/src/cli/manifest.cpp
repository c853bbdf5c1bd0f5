#include "arm3d/cli/manifest.hpp"

#include <fcntl.h>
#include <openssl/evp.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "arm3d/core.hpp"

namespace arm3d::cli {

namespace {

std::string hex(const unsigned char* bytes, std::size_t n) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(digits[bytes[i] >> 4]);
    out.push_back(digits[bytes[i] & 0xf]);
  }
  return out;
}

}  // namespace

std::string git_blob_sha1(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  const bool ok = ctx && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw UsageError("SHA-1 digest failed");
  return hex(digest, len);
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw UsageError("write failed: " + path.string());
}

nlohmann::json hash_inputs(const std::vector<fs::path>& inputs) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::recursive_directory_iterator(in)) {
        if (e.is_regular_file() && e.path().filename() != ".arm3d.lock") files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) out[f.generic_string()] = git_blob_sha1(read_text_file(f));
    } else {
      out[in.generic_string()] = git_blob_sha1(read_text_file(in));
    }
  }
  return out;
}

std::string combined_hash(const nlohmann::json& hashes) {
  std::string listing;
  for (const auto& [path, sha] : hashes.items()) listing += sha.get<std::string>() + " " + path + "\n";
  return git_blob_sha1(listing);
}

void write_manifest(const fs::path& dir, const std::string& command, const nlohmann::json& settings,
                    const std::string& config_text, const std::vector<fs::path>& inputs) {
  nlohmann::json m;
  m["command"] = command;
  m["settings"] = settings;
  const nlohmann::json hashes = hash_inputs(inputs);
  m["inputs"] = hashes;
  m["input_hash"] = combined_hash(hashes);
  write_text_file(dir / "manifest.json", m.dump(2) + "\n");
  write_text_file(dir / "config.ini", config_text);
}

DirectoryLock::DirectoryLock(const fs::path& dir) : path_(dir / ".arm3d.lock") {
  fs::create_directories(dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    throw UsageError("output directory " + dir.string() + " is in use by another run (remove " + path_.string() +
                     " if that run has died)");
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

DirectoryLock::~DirectoryLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

}  // namespace arm3d::cli
