#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "arm3d/geometry/box.hpp"

namespace arm3d::geometry {

/// Bidirectional mapping between category names and dense ids 0..K-1.
/// File form: {"categories": ["cabinet", "bookshelf", ...]}.
class CategoryTable {
 public:
  CategoryTable() = default;
  explicit CategoryTable(std::vector<std::string> names);

  CategoryId id_of(const std::string& name) const;
  const std::string& name_of(CategoryId id) const;
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  nlohmann::json to_json() const;
  static CategoryTable from_json(const nlohmann::json& j);
  static CategoryTable load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  bool operator==(const CategoryTable&) const = default;

 private:
  std::vector<std::string> names_;
};

/// {"scene_id": str, "boxes": [{"center": [x,y,z], "size": [sx,sy,sz],
///  "category": str, "instance_id": int}], "point_count_hint": int (optional)}
nlohmann::json scene_to_json(const Scene& scene, const CategoryTable& table);
Scene scene_from_json(const nlohmann::json& j, const CategoryTable& table);

Scene read_scene_file(const std::filesystem::path& path, const CategoryTable& table);
void write_scene_file(const std::filesystem::path& path, const Scene& scene, const CategoryTable& table);

/// Pretty-printed JSON with a trailing newline; output is byte-stable.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace arm3d::geometry
