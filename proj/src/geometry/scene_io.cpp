#include "arm3d/geometry/scene_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace arm3d::geometry {

using nlohmann::json;

CategoryTable::CategoryTable(std::vector<std::string> names) : names_(std::move(names)) {
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty() || !seen.insert(n).second) throw FormatError("category table: empty or duplicate name '" + n + "'");
  }
}

CategoryId CategoryTable::id_of(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<CategoryId>(i);
  }
  throw FormatError("unknown category '" + name + "'");
}

const std::string& CategoryTable::name_of(CategoryId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= names_.size()) {
    throw FormatError("category id out of range: " + std::to_string(id));
  }
  return names_[static_cast<std::size_t>(id)];
}

json CategoryTable::to_json() const { return json{{"categories", names_}}; }

CategoryTable CategoryTable::from_json(const json& j) {
  if (!j.is_object() || !j.contains("categories") || !j["categories"].is_array()) {
    throw FormatError("category table: expected {\"categories\": [...]}");
  }
  return CategoryTable(j["categories"].get<std::vector<std::string>>());
}

CategoryTable CategoryTable::load(const std::filesystem::path& path) {
  return from_json(read_json_file(path));
}

void CategoryTable::save(const std::filesystem::path& path) const { write_json_file(path, to_json()); }

namespace {

json vec3(const Vector3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vector3 read_vec3(const json& j, const char* field) {
  if (!j.contains(field) || !j[field].is_array() || j[field].size() != 3) {
    throw FormatError(std::string("box field '") + field + "' must be a 3-element array");
  }
  return {j[field][0].get<double>(), j[field][1].get<double>(), j[field][2].get<double>()};
}

}  // namespace

void validate_scene(const Scene& scene) {
  std::set<std::int64_t> ids;
  for (const auto& b : scene.ground_truth) {
    if (!b.valid()) throw FormatError("scene " + scene.scene_id + ": box with non-positive extent");
    if (!ids.insert(b.instance_id).second) {
      throw FormatError("scene " + scene.scene_id + ": duplicate instance id " +
                        std::to_string(b.instance_id));
    }
  }
}

json scene_to_json(const Scene& scene, const CategoryTable& table) {
  json boxes = json::array();
  for (const auto& b : scene.ground_truth) {
    boxes.push_back(json{{"center", vec3(b.center)},
                         {"size", vec3(b.size)},
                         {"category", table.name_of(b.category)},
                         {"instance_id", b.instance_id}});
  }
  json j{{"scene_id", scene.scene_id}, {"boxes", boxes}};
  if (scene.point_count_hint > 0) j["point_count_hint"] = scene.point_count_hint;
  return j;
}

Scene scene_from_json(const json& j, const CategoryTable& table) {
  if (!j.is_object() || !j.contains("scene_id") || !j.contains("boxes") || !j["boxes"].is_array()) {
    throw FormatError("scene: expected object with 'scene_id' and 'boxes'");
  }
  Scene s;
  s.scene_id = j["scene_id"].get<std::string>();
  for (const auto& jb : j["boxes"]) {
    Box3D b;
    b.center = read_vec3(jb, "center");
    b.size = read_vec3(jb, "size");
    b.category = table.id_of(jb.at("category").get<std::string>());
    b.instance_id = jb.at("instance_id").get<std::int64_t>();
    s.ground_truth.push_back(b);
  }
  if (j.contains("point_count_hint")) s.point_count_hint = j["point_count_hint"].get<std::uint64_t>();
  validate_scene(s);
  return s;
}

Scene read_scene_file(const std::filesystem::path& path, const CategoryTable& table) {
  return scene_from_json(read_json_file(path), table);
}

void write_scene_file(const std::filesystem::path& path, const Scene& scene, const CategoryTable& table) {
  write_json_file(path, scene_to_json(scene, table));
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace arm3d::geometry
