#pragma once

#include <string>
#include <vector>

#include "arm3d/geometry/box.hpp"
#include "arm3d/geometry/scene_io.hpp"
#include "arm3d/rng.hpp"

namespace arm3d::harness {

using geometry::Box3D;
using geometry::CategoryId;
using geometry::Scene;

/// Probabilities steering which relations the generator plants.
struct RelationInjection {
  /// A drawn category becomes a cluster of 2..max_cluster_size instances.
  Scalar cluster_probability = 0.7;
  int max_cluster_size = 3;
  /// After a cluster, also add a cluster of the confusable category.
  Scalar confusable_probability = 0.3;
  /// Placement mode of every object after the first.
  Scalar stacked_probability = 0.15;
  Scalar adjacent_probability = 0.25;
};

struct SyntheticConfig {
  int category_count = 10;
  int min_objects = 4;
  int max_objects = 10;
  RelationInjection relation_injection;
  Scalar feature_noise = 0.1;
  Scalar ambiguity_rate = 0.3;
  Scalar room_extent = 8.0;
  /// Free-standing objects keep at least this horizontal gap to every other box.
  Scalar clearance = 0.3;
  /// Upper bound of planted gaps; kept at half the labeler's tau_d.
  Scalar contact_gap = 0.05;
  int max_retries = 200;
  std::uint64_t point_count_hint = 20000;

  /// Throws UsageError naming the offending field.
  void validate() const;
};

enum class RelationKind { semantic, spatial };

/// A relation the generator placed on purpose, by instance id.
struct InjectedRelation {
  std::int64_t a = 0;
  std::int64_t b = 0;
  RelationKind kind = RelationKind::semantic;
};

struct GeneratedScene {
  Scene scene;
  std::vector<InjectedRelation> injected;
};

/// Names for the first ten ids follow indoor furniture; further ids are generic.
std::vector<std::string> default_category_names(int category_count);
geometry::CategoryTable default_category_table(int category_count);

/// Categories 2k and 2k+1 are confusable (share size statistics); an odd
/// last category maps to itself.
CategoryId confusable_category(CategoryId c, int category_count);

/// Mean extents used for a category.
Vector3 base_size(CategoryId c);

GeneratedScene generate_scene(const SyntheticConfig& config, Rng& rng, const std::string& scene_id);

/// Fraction of object pairs carrying a planted spatial relation implied by
/// the configured probabilities: (p_stacked + p_adjacent) E[n-1] / E[n(n-1)/2].
Scalar target_spatial_pair_fraction(const SyntheticConfig& config);

}  // namespace arm3d::harness
