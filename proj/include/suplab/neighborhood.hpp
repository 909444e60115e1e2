#pragma once

#include "suplab/concept_model.hpp"
#include "suplab/numeric.hpp"
#include "suplab/rng.hpp"

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace suplab {

/// Representation a neighbourhood was retrieved in.
enum class Space { feature, reconstruction, concepts };

std::string to_string(Space space);

/// Cosine similarity, or negative Euclidean distance for raw (unnormalized) inputs.
enum class Metric { cosine, euclidean };

struct Neighborhood {
  std::optional<std::size_t> query_id;
  std::vector<std::size_t> members;  // dataset row indices, most similar first
  std::vector<double> similarities;
  Space space = Space::feature;

  std::size_t size() const noexcept { return members.size(); }
  bool empty() const noexcept { return members.empty(); }
};

/// <a, b> / (|a| |b|); throws DataError when either vector is zero.
double cosine_similarity(const Vector& a, const Vector& b);

/// Exact brute-force retrieval over the rows of a dataset. Rows with zero norm
/// have cosine similarity 0 to every query. Ties are broken by lower row index.
class BruteForceIndex {
 public:
  BruteForceIndex(Matrix points, Metric metric = Metric::cosine);

  std::size_t size() const noexcept { return static_cast<std::size_t>(points_.rows()); }
  const Matrix& points() const noexcept { return points_; }
  Metric metric() const noexcept { return metric_; }

  /// Similarity of the query to every row.
  Vector similarities(const Vector& query) const;
  Neighborhood knn(const Vector& query, std::size_t k, Space space = Space::feature) const;
  /// Rows with similarity >= 1 - r (cosine metric only).
  Neighborhood radius(const Vector& query, double r, Space space = Space::feature) const;

 private:
  Matrix points_;
  Matrix normalized_;
  Vector squared_norms_;
  Metric metric_;
};

Neighborhood knn(const Vector& query, const Matrix& points, std::size_t k, Space space = Space::feature,
                 Metric metric = Metric::cosine);
/// Retrieval over samples in feature (Psi) or concept (Phi) space.
Neighborhood knn(const Vector& query, std::span<const Sample> dataset, std::size_t k, Space space);

Neighborhood radius_neighborhood(const Vector& query, const Matrix& points, double r,
                                 Space space = Space::feature);
Neighborhood radius_neighborhood(const Vector& query, std::span<const Sample> dataset, double r, Space space);

/// Smallest eta >= 0 such that every point of the feature ball B^Psi(r) around
/// the query lies in the concept ball B^Phi(r + eta).
double containment_slack(const Vector& query_feature, const Vector& query_concept, const Matrix& features,
                         const Matrix& concepts, double r);
double containment_slack(const Sample& query, std::span<const Sample> dataset, double r);

/// sup over m-sparse unit u of <u, z>: the l2 norm of the m largest |z_i|.
double sparse_dual_norm(const Vector& z, std::size_t m);

struct GeometryReport {
  std::vector<double> feature_cosines;  // query vs each member, Psi space
  std::vector<double> concept_cosines;  // query vs each member, Phi space
  double eta_ang = 0.0;
  std::vector<double> dual_norm_samples;  // Lambda-hat draws
  double dual_norm_p95 = 0.0;
  double eta_delta = 0.0;  // sqrt(2s') C_inf sqrt(|Delta|^2 / k)
};

/// Monte-Carlo samples of || (1/k) Phi^T eps ||*_{2,2s'} over fresh noise draws
/// eps ~ N(0, sigma^2 I) for the neighbourhood's concept design (k x d1), plus
/// the deterministic misspecification correlation bound for `misspecification`.
GeometryReport concentration_diagnostics(const Matrix& local_concepts, const ConceptWorld& world,
                                         std::size_t local_sparsity, std::size_t trials, Rng& rng,
                                         const Vector* misspecification = nullptr);

/// Per-member cosines of the query in both spaces, plus the ball's containment slack.
GeometryReport neighbor_geometry(const Sample& query, std::span<const Sample> dataset, const Neighborhood& nb);

/// Writes "query_id,member_id,similarity,space" rows (with header when requested).
void write_neighborhood_csv(std::ostream& out, std::span<const Neighborhood> neighborhoods, bool header = true);

/// Empirical q-quantile (linear interpolation between order statistics).
double quantile(std::vector<double> values, double q);

}  // namespace suplab
