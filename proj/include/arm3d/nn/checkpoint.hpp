#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "arm3d/nn/param_store.hpp"

namespace arm3d::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Checkpoint layout (all integers little-endian):
///
///   char[8]   magic "ARM3DCKP"
///   u32       version
///   i64       step_count
///   u32       metadata count, then per entry: u32 len + key bytes, u32 len + value bytes
///   u32       parameter count, then per parameter:
///               u32 len + name bytes, u64 rows, u64 cols, rows*cols f64 (row-major)
///   u32       buffer count, same per-entry layout as parameters
///
/// Entries are written in lexicographic name order. Gradients and optimizer
/// moments are not stored.
struct Checkpoint {
  ParamStore params;
  std::map<std::string, std::string> metadata;
};

std::vector<unsigned char> serialize_checkpoint(const ParamStore& params,
                                                const std::map<std::string, std::string>& metadata);
Checkpoint deserialize_checkpoint(const std::vector<unsigned char>& bytes);

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                     const std::map<std::string, std::string>& metadata);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace arm3d::nn
