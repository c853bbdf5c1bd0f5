#include "arm3d/harness/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "arm3d/geometry/ops.hpp"

namespace arm3d::harness {

namespace {

constexpr std::array<const char*, 10> kNames = {"cabinet", "bookshelf", "chair", "sofa",     "table",
                                                "desk",    "nightstand", "dresser", "toilet", "sink"};

// base extents per confusable pair
constexpr std::array<std::array<Scalar, 3>, 5> kPairSizes = {{{0.9, 0.5, 1.3},
                                                              {0.6, 0.6, 0.9},
                                                              {1.4, 0.8, 0.75},
                                                              {0.6, 0.5, 0.6},
                                                              {0.5, 0.6, 0.5}}};

enum class Placement { free, stacked, adjacent };

struct Placed {
  Box3D box;
  bool on_floor = true;
  bool has_child = false;
};

bool inside_room(const Box3D& b, Scalar extent) {
  const Vector3 lo = b.min_corner();
  const Vector3 hi = b.max_corner();
  return lo.x() >= 0 && lo.y() >= 0 && hi.x() <= extent && hi.y() <= extent;
}

// Every box except `anchor` must stay farther than `clearance` horizontally.
bool clear_of_others(const Box3D& b, const std::vector<Placed>& placed, std::ptrdiff_t anchor,
                     Scalar clearance) {
  for (std::size_t k = 0; k < placed.size(); ++k) {
    if (static_cast<std::ptrdiff_t>(k) == anchor) continue;
    if (geometry::axis_gap(b, placed[k].box, geometry::GapDirection::horizontal) <= clearance) return false;
  }
  return true;
}

}  // namespace

void SyntheticConfig::validate() const {
  auto prob = [](Scalar p, const char* field) {
    if (!(p >= 0 && p <= 1)) throw UsageError(std::string("synthetic config: ") + field + " must be in [0,1]");
  };
  prob(relation_injection.cluster_probability, "cluster_probability");
  prob(relation_injection.confusable_probability, "confusable_probability");
  prob(relation_injection.stacked_probability, "stacked_probability");
  prob(relation_injection.adjacent_probability, "adjacent_probability");
  prob(ambiguity_rate, "ambiguity_rate");
  if (relation_injection.stacked_probability + relation_injection.adjacent_probability > 1) {
    throw UsageError("synthetic config: stacked_probability + adjacent_probability must be <= 1");
  }
  if (relation_injection.max_cluster_size < 2) throw UsageError("synthetic config: max_cluster_size must be >= 2");
  if (category_count < 1) throw UsageError("synthetic config: category_count must be >= 1");
  if (min_objects < 0 || max_objects < min_objects) {
    throw UsageError("synthetic config: need 0 <= min_objects <= max_objects");
  }
  if (!(feature_noise >= 0)) throw UsageError("synthetic config: feature_noise must be >= 0");
  if (!(room_extent > 0)) throw UsageError("synthetic config: room_extent must be > 0");
  if (!(clearance > 0) || !(contact_gap >= 0)) throw UsageError("synthetic config: clearance/contact_gap invalid");
  if (max_retries < 1) throw UsageError("synthetic config: max_retries must be >= 1");
}

std::vector<std::string> default_category_names(int category_count) {
  std::vector<std::string> names;
  for (int i = 0; i < category_count; ++i) {
    names.emplace_back(i < static_cast<int>(kNames.size()) ? std::string(kNames[static_cast<std::size_t>(i)])
                                                           : "category_" + std::to_string(i));
  }
  return names;
}

geometry::CategoryTable default_category_table(int category_count) {
  return geometry::CategoryTable(default_category_names(category_count));
}

CategoryId confusable_category(CategoryId c, int category_count) {
  const CategoryId other = c ^ 1;
  return other < category_count ? other : c;
}

Vector3 base_size(CategoryId c) {
  const auto& s = kPairSizes[static_cast<std::size_t>(c / 2) % kPairSizes.size()];
  // later pairs repeat the table with a mild stretch so they stay distinct
  const Scalar stretch = 1.0 + 0.15 * static_cast<Scalar>((c / 2) / static_cast<int>(kPairSizes.size()));
  return Vector3(s[0], s[1], s[2]) * stretch;
}

GeneratedScene generate_scene(const SyntheticConfig& config, Rng& rng, const std::string& scene_id) {
  config.validate();
  const RelationInjection& inj = config.relation_injection;
  const int n = static_cast<int>(rng.uniform_int(config.min_objects, config.max_objects));

  // category multiset, grouped in clusters
  std::vector<CategoryId> cats;
  std::vector<int> cluster_of;
  int cluster_id = 0;
  auto push_cluster = [&](CategoryId c) {
    const int k = rng.bernoulli(inj.cluster_probability)
                      ? static_cast<int>(rng.uniform_int(2, inj.max_cluster_size))
                      : 1;
    for (int i = 0; i < k && static_cast<int>(cats.size()) < n; ++i) {
      cats.push_back(c);
      cluster_of.push_back(cluster_id);
    }
    ++cluster_id;
  };
  while (static_cast<int>(cats.size()) < n) {
    const auto c = static_cast<CategoryId>(rng.uniform_index(static_cast<std::uint64_t>(config.category_count)));
    push_cluster(c);
    const CategoryId partner = confusable_category(c, config.category_count);
    if (partner != c && static_cast<int>(cats.size()) < n && rng.bernoulli(inj.confusable_probability)) {
      push_cluster(partner);
    }
  }

  // one extent draw per category, shared by all its instances in this scene
  std::map<CategoryId, Vector3> sizes;
  for (CategoryId c : cats) {
    if (sizes.count(c)) continue;
    Vector3 s = base_size(c);
    for (int a = 0; a < 3; ++a) s[a] *= std::exp(rng.normal(0.0, 0.15));
    sizes[c] = s;
  }

  GeneratedScene out;
  out.scene.scene_id = scene_id;
  out.scene.point_count_hint = config.point_count_hint;
  std::vector<Placed> placed;

  for (int idx = 0; idx < n; ++idx) {
    const CategoryId c = cats[static_cast<std::size_t>(idx)];
    Placement mode = Placement::free;
    if (!placed.empty()) {
      const Scalar u = rng.uniform();
      if (u < inj.stacked_probability) {
        mode = Placement::stacked;
      } else if (u < inj.stacked_probability + inj.adjacent_probability) {
        mode = Placement::adjacent;
      }
    }

    bool done = false;
    for (int attempt = 0; attempt < config.max_retries && !done; ++attempt) {
      // planted placements get half the budget before degrading to free-standing
      if (mode != Placement::free && attempt >= config.max_retries / 2) mode = Placement::free;
      Box3D b;
      b.category = c;
      b.instance_id = idx;
      b.size = sizes[c];
      std::ptrdiff_t anchor = -1;

      if (mode == Placement::free) {
        if (b.size.x() >= config.room_extent || b.size.y() >= config.room_extent) break;
        b.center.x() = rng.uniform(b.size.x() / 2, config.room_extent - b.size.x() / 2);
        b.center.y() = rng.uniform(b.size.y() / 2, config.room_extent - b.size.y() / 2);
        b.center.z() = b.size.z() / 2;
      } else if (mode == Placement::stacked) {
        std::vector<std::size_t> supports;
        for (std::size_t k = 0; k < placed.size(); ++k) {
          if (placed[k].on_floor && !placed[k].has_child) supports.push_back(k);
        }
        if (supports.empty()) {
          mode = Placement::free;
          continue;
        }
        const std::size_t s = supports[rng.uniform_index(supports.size())];
        const Box3D& base = placed[s].box;
        // footprint shrunk to fit inside the support's top face
        b.size.x() = std::min(b.size.x(), 0.9 * base.size.x());
        b.size.y() = std::min(b.size.y(), 0.9 * base.size.y());
        const Vector3 lo = base.min_corner();
        const Vector3 hi = base.max_corner();
        b.center.x() = rng.uniform(lo.x() + b.size.x() / 2, hi.x() - b.size.x() / 2);
        b.center.y() = rng.uniform(lo.y() + b.size.y() / 2, hi.y() - b.size.y() / 2);
        b.center.z() = hi.z() + rng.uniform(0.0, config.contact_gap) + b.size.z() / 2;
        anchor = static_cast<std::ptrdiff_t>(s);
      } else {
        std::vector<std::size_t> anchors;
        for (std::size_t k = 0; k < placed.size(); ++k) {
          if (placed[k].on_floor) anchors.push_back(k);
        }
        if (anchors.empty()) {
          mode = Placement::free;
          continue;
        }
        const std::size_t s = anchors[rng.uniform_index(anchors.size())];
        const Box3D& base = placed[s].box;
        const int axis = static_cast<int>(rng.uniform_index(2));  // 0: beside along x, 1: along y
        const int other = 1 - axis;
        const Scalar side = rng.bernoulli(0.5) ? 1.0 : -1.0;
        // facing extents clamped so the new face lies within the anchor's face
        b.size[other] = std::min(b.size[other], base.size[other]);
        b.size.z() = std::min(b.size.z(), base.size.z());
        const Scalar gap = rng.uniform(0.0, config.contact_gap);
        b.center[axis] = base.center[axis] + side * (base.size[axis] / 2 + gap + b.size[axis] / 2);
        const Scalar slack = (base.size[other] - b.size[other]) / 2;
        b.center[other] = base.center[other] + rng.uniform(-slack, slack);
        b.center.z() = b.size.z() / 2;
        anchor = static_cast<std::ptrdiff_t>(s);
      }

      if (!inside_room(b, config.room_extent)) continue;
      if (!clear_of_others(b, placed, anchor, config.clearance)) continue;

      Placed p;
      p.box = b;
      p.on_floor = mode != Placement::stacked;
      if (anchor >= 0) {
        if (mode == Placement::stacked) placed[static_cast<std::size_t>(anchor)].has_child = true;
        out.injected.push_back({placed[static_cast<std::size_t>(anchor)].box.instance_id, b.instance_id,
                                RelationKind::spatial});
      }
      placed.push_back(p);
      done = true;
    }
    if (!done) {
      throw GenerationError("scene " + scene_id + ": could not place object " + std::to_string(idx) +
                            " after " + std::to_string(config.max_retries) + " attempts");
    }
  }

  for (const auto& p : placed) out.scene.ground_truth.push_back(p.box);
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if (cluster_of[static_cast<std::size_t>(a)] == cluster_of[static_cast<std::size_t>(b)]) {
        out.injected.push_back({a, b, RelationKind::semantic});
      }
    }
  }
  return out;
}

Scalar target_spatial_pair_fraction(const SyntheticConfig& config) {
  Scalar links = 0;
  Scalar pairs = 0;
  for (int n = config.min_objects; n <= config.max_objects; ++n) {
    links += std::max(0, n - 1);
    pairs += static_cast<Scalar>(n) * (n - 1) / 2.0;
  }
  if (pairs == 0) return 0;
  const RelationInjection& inj = config.relation_injection;
  return (inj.stacked_probability + inj.adjacent_probability) * links / pairs;
}

}  // namespace arm3d::harness
