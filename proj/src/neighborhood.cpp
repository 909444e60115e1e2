#include "suplab/neighborhood.hpp"

#include "suplab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace suplab {

std::string to_string(Space space) {
  switch (space) {
    case Space::feature: return "feature";
    case Space::reconstruction: return "reconstruction";
    case Space::concepts: return "concept";
  }
  return "unknown";
}

double cosine_similarity(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimensionError("cosine_similarity: dimension mismatch");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw DataError("cosine similarity undefined for a zero vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

BruteForceIndex::BruteForceIndex(Matrix points, Metric metric) : points_(std::move(points)), metric_(metric) {
  if (metric_ == Metric::cosine) {
    normalized_ = points_;
    for (Eigen::Index i = 0; i < normalized_.rows(); ++i) {
      const double n = normalized_.row(i).norm();
      if (n > 0.0) normalized_.row(i) /= n;
    }
  } else {
    squared_norms_ = points_.rowwise().squaredNorm();
  }
}

Vector BruteForceIndex::similarities(const Vector& query) const {
  if (query.size() != points_.cols()) throw DimensionError("knn: query dimension does not match dataset");
  if (metric_ == Metric::cosine) {
    const double qn = query.norm();
    if (qn == 0.0) throw DataError("cosine similarity undefined for a zero query");
    return ((normalized_ * query) / qn).cwiseMax(-1.0).cwiseMin(1.0);
  }
  Vector d2 = squared_norms_ - 2.0 * (points_ * query);
  d2.array() += query.squaredNorm();
  return -d2.cwiseMax(0.0).cwiseSqrt();
}

namespace {

Neighborhood ranked(const Vector& sims, std::vector<std::size_t> order, std::size_t k, Space space) {
  auto better = [&](std::size_t a, std::size_t b) {
    const double sa = sims[static_cast<Eigen::Index>(a)];
    const double sb = sims[static_cast<Eigen::Index>(b)];
    return sa > sb || (sa == sb && a < b);
  };
  k = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), better);
  Neighborhood nb;
  nb.space = space;
  nb.members.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  nb.similarities.reserve(k);
  for (std::size_t m : nb.members) nb.similarities.push_back(sims[static_cast<Eigen::Index>(m)]);
  return nb;
}

}  // namespace

Neighborhood BruteForceIndex::knn(const Vector& query, std::size_t k, Space space) const {
  if (size() == 0) throw RetrievalError("knn on an empty dataset");
  if (k > size()) {
    throw RetrievalError("knn: k=" + std::to_string(k) + " exceeds dataset size " + std::to_string(size()));
  }
  const Vector sims = similarities(query);
  std::vector<std::size_t> order(size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  return ranked(sims, std::move(order), k, space);
}

Neighborhood BruteForceIndex::radius(const Vector& query, double r, Space space) const {
  if (r < 0.0) throw ConfigError("radius must be non-negative");
  if (metric_ != Metric::cosine) throw ConfigError("radius neighbourhoods are defined for cosine similarity");
  const Vector sims = similarities(query);
  // Round-off slack so that r = 0 still admits exact-direction matches.
  constexpr double kRoundoff = 1e-12;
  std::vector<std::size_t> inside;
  for (Eigen::Index i = 0; i < sims.size(); ++i) {
    if (sims[i] >= 1.0 - r - kRoundoff) inside.push_back(static_cast<std::size_t>(i));
  }
  const std::size_t n = inside.size();
  return ranked(sims, std::move(inside), n, space);
}

Neighborhood knn(const Vector& query, const Matrix& points, std::size_t k, Space space, Metric metric) {
  return BruteForceIndex(points, metric).knn(query, k, space);
}

Neighborhood knn(const Vector& query, std::span<const Sample> dataset, std::size_t k, Space space) {
  if (dataset.empty()) throw RetrievalError("knn on an empty dataset");
  if (space == Space::concepts) return knn(query, concept_matrix(dataset), k, space);
  return knn(query, feature_matrix(dataset), k, space);
}

Neighborhood radius_neighborhood(const Vector& query, const Matrix& points, double r, Space space) {
  if (points.rows() == 0) return Neighborhood{std::nullopt, {}, {}, space};
  return BruteForceIndex(points).radius(query, r, space);
}

Neighborhood radius_neighborhood(const Vector& query, std::span<const Sample> dataset, double r, Space space) {
  if (dataset.empty()) return Neighborhood{std::nullopt, {}, {}, space};
  if (space == Space::concepts) return radius_neighborhood(query, concept_matrix(dataset), r, space);
  return radius_neighborhood(query, feature_matrix(dataset), r, space);
}

double containment_slack(const Vector& query_feature, const Vector& query_concept, const Matrix& features,
                         const Matrix& concepts, double r) {
  if (features.rows() != concepts.rows()) throw DimensionError("containment_slack: representation counts differ");
  const Neighborhood ball = radius_neighborhood(query_feature, features, r, Space::feature);
  const double qn = query_concept.norm();
  double slack = 0.0;
  for (std::size_t m : ball.members) {
    const auto row = concepts.row(static_cast<Eigen::Index>(m));
    const double rn = row.norm();
    const double sim = (qn > 0.0 && rn > 0.0) ? std::clamp(row.dot(query_concept) / (qn * rn), -1.0, 1.0) : 0.0;
    slack = std::max(slack, 1.0 - r - sim);
  }
  return slack;
}

double containment_slack(const Sample& query, std::span<const Sample> dataset, double r) {
  if (dataset.empty()) return 0.0;
  return containment_slack(query.feature, query.phi.to_dense(), feature_matrix(dataset),
                           concept_matrix(dataset), r);
}

double sparse_dual_norm(const Vector& z, std::size_t m) {
  const auto d = static_cast<std::size_t>(z.size());
  if (m < 1 || m > d) throw ConfigError("sparse_dual_norm needs 1 <= m <= dim");
  std::vector<double> sq(d);
  for (std::size_t i = 0; i < d; ++i) sq[i] = z[static_cast<Eigen::Index>(i)] * z[static_cast<Eigen::Index>(i)];
  std::nth_element(sq.begin(), sq.begin() + static_cast<std::ptrdiff_t>(m - 1), sq.end(), std::greater<>());
  double acc = 0.0;
  for (std::size_t i = 0; i < m; ++i) acc += sq[i];
  return std::sqrt(acc);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DataError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

GeometryReport concentration_diagnostics(const Matrix& local_concepts, const ConceptWorld& world,
                                         std::size_t local_sparsity, std::size_t trials, Rng& rng,
                                         const Vector* misspecification) {
  const Eigen::Index k = local_concepts.rows();
  if (k == 0) throw DataError("concentration diagnostics need a non-empty neighbourhood");
  const std::size_t order = std::min<std::size_t>(2 * local_sparsity, static_cast<std::size_t>(local_concepts.cols()));
  const double sigma = std::sqrt(world.noise_variance());

  GeometryReport report;
  report.dual_norm_samples.reserve(trials);
  Vector noise(k);
  for (std::size_t t = 0; t < trials; ++t) {
    for (Eigen::Index i = 0; i < k; ++i) noise[i] = sigma * rng.normal();
    const Vector correlation = local_concepts.transpose() * noise / static_cast<double>(k);
    report.dual_norm_samples.push_back(sparse_dual_norm(correlation, order));
  }
  if (trials > 0) report.dual_norm_p95 = quantile(report.dual_norm_samples, 0.95);
  if (misspecification != nullptr) {
    if (misspecification->size() != k) throw DimensionError("misspecification vector must have k entries");
    report.eta_delta = std::sqrt(2.0 * static_cast<double>(local_sparsity)) * world.concept_linf_bound() *
                       std::sqrt(misspecification->squaredNorm() / static_cast<double>(k));
  }
  return report;
}

GeometryReport neighbor_geometry(const Sample& query, std::span<const Sample> dataset, const Neighborhood& nb) {
  GeometryReport report;
  const Vector qc = query.phi.to_dense();
  double worst_concept = 1.0;
  for (std::size_t m : nb.members) {
    const Sample& s = dataset[m];
    report.feature_cosines.push_back(cosine_similarity(query.feature, s.feature));
    const Vector sc = s.phi.to_dense();
    const double c = (qc.norm() > 0 && sc.norm() > 0) ? cosine_similarity(qc, sc) : 0.0;
    report.concept_cosines.push_back(c);
    worst_concept = std::min(worst_concept, c);
  }
  if (!nb.empty()) {
    const double r = 1.0 - *std::min_element(report.feature_cosines.begin(), report.feature_cosines.end());
    report.eta_ang = std::max(0.0, 1.0 - r - worst_concept);
  }
  return report;
}

void write_neighborhood_csv(std::ostream& out, std::span<const Neighborhood> neighborhoods, bool header) {
  if (header) out << "query_id,member_id,similarity,space\n";
  char buf[64];
  for (std::size_t q = 0; q < neighborhoods.size(); ++q) {
    const Neighborhood& nb = neighborhoods[q];
    const std::size_t id = nb.query_id.value_or(q);
    for (std::size_t i = 0; i < nb.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", nb.similarities[i]);
      out << id << ',' << nb.members[i] << ',' << buf << ',' << to_string(nb.space) << '\n';
    }
  }
}

}  // namespace suplab
