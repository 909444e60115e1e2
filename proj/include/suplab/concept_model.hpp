#pragma once

#include "suplab/numeric.hpp"
#include "suplab/rng.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace suplab {

struct SparseEntry {
  std::size_t index = 0;
  double value = 0.0;
  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

/// Concept activation stored as (index, value) pairs with strictly increasing indices.
class SparseVector {
 public:
  SparseVector() = default;
  explicit SparseVector(std::size_t dim) : dim_(dim) {}
  /// Sorts entries by index; throws DataError on duplicates or out-of-range indices.
  SparseVector(std::size_t dim, std::vector<SparseEntry> entries);

  /// Keeps every entry whose magnitude exceeds `tolerance`.
  static SparseVector from_dense(const Vector& dense, double tolerance = 0.0);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t nnz() const noexcept { return entries_.size(); }
  const std::vector<SparseEntry>& entries() const noexcept { return entries_; }

  Vector to_dense() const;
  double dot(const Vector& dense) const;
  double norm2() const;
  double norm_inf() const;
  bool contains(std::size_t index) const;

  friend bool operator==(const SparseVector&, const SparseVector&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<SparseEntry> entries_;
};

/// How concept supports are drawn.
/// - uniform: s indices uniformly from [d1].
/// - clustered: one overlapping pool of 4s consecutive indices (stride 2s, wrapping
///   around), then s indices inside it, so nearby samples share concepts.
/// - one_hot_cells: Phi(x) = e_m for a uniformly chosen cell m.
enum class SupportLaw { uniform, clustered, one_hot_cells };

std::string to_string(SupportLaw law);
SupportLaw parse_support_law(const std::string& text);

struct WorldConfig {
  std::size_t concept_dim = 256;  // d1
  std::size_t feature_dim = 64;   // d2
  std::size_t sparsity = 4;       // s
  SupportLaw law = SupportLaw::clustered;
  double noise_variance = 0.0;  // sigma^2
  /// Concept magnitudes are uniform on [value_low, value_high] with a random sign.
  double value_low = 0.5;
  double value_high = 1.0;
  std::uint64_t seed = 0;
};

/// Synthetic world: y = <Phi(x), w*> + eps, Psi(x) = P Phi(x).
struct ConceptWorld {
  WorldConfig config;
  Vector w_star;      // d1
  Matrix projection;  // d2 x d1, columns p_m

  std::size_t concept_dim() const { return config.concept_dim; }
  std::size_t feature_dim() const { return config.feature_dim; }
  std::size_t sparsity() const { return config.sparsity; }
  double noise_variance() const { return config.noise_variance; }
  double concept_linf_bound() const { return config.value_high; }
  double concept_l2_bound() const;

  std::size_t pool_count() const;
  /// Concept indices of a clustered-support pool (4s entries, or d1 if smaller).
  std::vector<std::size_t> pool(std::size_t id) const;
};

struct Sample {
  SparseVector phi;  // Phi(x)
  Vector feature;        // Psi(x)
  double label = 0.0;
  std::optional<std::size_t> cell;  // pool id (clustered) or cell id (one-hot)
};

/// Builds a world with Gaussian w* and a random-superposition projection; the
/// world's seed drives both through dedicated streams.
ConceptWorld make_world(const WorldConfig& config);

/// d2 x d1 matrix whose columns are independent and uniform on the unit sphere.
Matrix make_superposition_map(std::size_t concept_dim, std::size_t feature_dim, Rng& rng);

/// One sample; `pool` pins the clustered pool (or one-hot cell) instead of drawing it.
Sample sample_point(const ConceptWorld& world, Rng& rng, std::optional<std::size_t> pool = std::nullopt);

std::vector<Sample> sample_dataset(const ConceptWorld& world, std::size_t n, Rng& rng);

/// Noiseless target <Phi(x), w*>.
double ground_truth(const ConceptWorld& world, const SparseVector& phi);

Matrix feature_matrix(std::span<const Sample> samples);
Matrix concept_matrix(std::span<const Sample> samples);
Vector label_vector(std::span<const Sample> samples);

/// One-hot cells with unit-sphere features p_m and constant target 1.
struct NonLearnableInstance {
  Matrix projection;  // d2 x d1

  std::size_t concept_dim() const { return static_cast<std::size_t>(projection.cols()); }
  std::size_t feature_dim() const { return static_cast<std::size_t>(projection.rows()); }

  Sample cell_sample(std::size_t cell) const;
  /// One sample per cell, in cell order.
  std::vector<Sample> samples() const;
  /// P_m: column `cell` of the projection, every other column zero.
  Matrix local_projection(std::size_t cell) const;
  /// The same instance as a ConceptWorld (w* = 1, noiseless, one-hot law).
  ConceptWorld as_world() const;
};

/// Throws ConfigError if feature_dim > concept_dim.
NonLearnableInstance make_nonlearnable_instance(std::size_t concept_dim, std::size_t feature_dim, Rng& rng);

struct AssumptionReport {
  std::size_t neighborhood_size = 0;
  double eta_ang = 0.0;  // containment slack of the feature ball in the concept ball
  double eta_spa = 0.0;  // best s'-sparse fit residual of the noiseless targets
  double eta_rep = 0.0;  // residual after projecting that fit onto row(P_local)
  double kappa = 0.0;    // generalized restricted eigenvalue estimate, order 2s'
  bool kappa_exact = false;
  std::size_t kappa_directions = 0;
  std::vector<std::size_t> sparse_support;
  std::vector<std::size_t> active_concepts;  // union of supports in the neighbourhood
};

/// Measures containment slack, local sparsity, expressivity and the restricted
/// eigenvalue around `test` using the feature-space
/// ball of radius r in `dataset`. `tolerance` is the zero threshold used when
/// deciding which projection columns are active and which residuals vanish.
AssumptionReport check_assumptions(const ConceptWorld& world, std::span<const Sample> dataset,
                                   const Sample& test, double radius, std::size_t local_sparsity,
                                   double tolerance = 1e-10, std::size_t kappa_directions = 100,
                                   std::uint64_t seed = 0);

}  // namespace suplab
