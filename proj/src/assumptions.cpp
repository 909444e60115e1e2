#include "suplab/concept_model.hpp"
#include "suplab/errors.hpp"
#include "suplab/estimators.hpp"
#include "suplab/neighborhood.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>

namespace suplab {
namespace {

constexpr double kExactSearchBudget = 1e5;

}  // namespace

AssumptionReport check_assumptions(const ConceptWorld& world, std::span<const Sample> dataset, const Sample& test,
                                   double radius, std::size_t local_sparsity, double tolerance,
                                   std::size_t kappa_directions, std::uint64_t seed) {
  const std::size_t d1 = world.concept_dim();
  if (local_sparsity < 1 || local_sparsity > d1) throw ConfigError("check_assumptions needs 1 <= s' <= d1");
  AssumptionReport report;
  if (dataset.empty()) return report;

  const Neighborhood nb = radius_neighborhood(test.feature, dataset, radius, Space::feature);
  report.neighborhood_size = nb.size();
  report.eta_ang = containment_slack(test, dataset, radius);
  if (nb.empty()) return report;

  std::vector<Sample> members;
  for (std::size_t m : nb.members) members.push_back(dataset[m]);
  const auto k = static_cast<double>(members.size());
  const Matrix concepts = concept_matrix(members);
  const Matrix features = feature_matrix(members);

  std::set<std::size_t> active;
  for (const Sample& s : members) {
    for (const auto& e : s.phi.entries()) active.insert(e.index);
  }
  for (const auto& e : test.phi.entries()) active.insert(e.index);
  report.active_concepts.assign(active.begin(), active.end());
  const std::vector<std::size_t>& support_pool = report.active_concepts;

  // Local simplicity: best s'-sparse concept model for the noiseless targets.
  Vector targets(concepts.rows());
  for (std::size_t i = 0; i < members.size(); ++i) targets[static_cast<Eigen::Index>(i)] = ground_truth(world, members[i].phi);
  const std::size_t m = std::min(local_sparsity, support_pool.size());
  const SparseSearch mode =
      binomial(support_pool.size(), m) <= kExactSearchBudget ? SparseSearch::exhaustive : SparseSearch::greedy;
  const SubsetFit sparse = best_subset_regression(concepts, targets, local_sparsity, mode, support_pool);
  report.sparse_support = sparse.support;
  report.eta_spa = sparse.residual <= tolerance ? 0.0 : sparse.residual;

  // Expressivity: project the sparse model onto the row space of P_local.
  Matrix local = Matrix::Zero(world.projection.rows(), world.projection.cols());
  for (std::size_t j : support_pool) {
    if (world.projection.col(static_cast<Eigen::Index>(j)).norm() > tolerance) {
      local.col(static_cast<Eigen::Index>(j)) = world.projection.col(static_cast<Eigen::Index>(j));
    }
  }
  const Matrix local_t_pinv = pseudoinverse(local.transpose());  // d2 x d1
  const Vector representable = local.transpose() * (local_t_pinv * sparse.coefficients);
  const double rep = (concepts * (sparse.coefficients - representable)).squaredNorm() / k;
  report.eta_rep = rep <= tolerance ? 0.0 : rep;

  // Generalized restricted eigenvalue of order 2s'.
  const std::size_t order = std::min(2 * local_sparsity, support_pool.size());
  Matrix pool_columns(world.projection.rows(), static_cast<Eigen::Index>(support_pool.size()));
  for (std::size_t j = 0; j < support_pool.size(); ++j) {
    pool_columns.col(static_cast<Eigen::Index>(j)) = local.col(static_cast<Eigen::Index>(support_pool[j]));
  }
  Eigen::Index pool_rank = 0;
  (void)pseudoinverse(pool_columns, &pool_rank);
  const bool all_representable = pool_rank == static_cast<Eigen::Index>(support_pool.size());

  double kappa = std::numeric_limits<double>::infinity();
  if (local_sparsity <= 2 && all_representable && binomial(support_pool.size(), order) <= kExactSearchBudget) {
    // Every direction on the pool is representable, so the ratio reduces to the
    // smallest eigenvalue of the restricted concept Gram matrix.
    report.kappa_exact = true;
    std::vector<std::size_t> idx(order);
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t start, std::size_t depth) {
      if (depth == order) {
        Matrix sub(concepts.rows(), static_cast<Eigen::Index>(order));
        for (std::size_t j = 0; j < order; ++j) sub.col(static_cast<Eigen::Index>(j)) = concepts.col(static_cast<Eigen::Index>(support_pool[idx[j]]));
        const Matrix gram = sub.transpose() * sub / k;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
        kappa = std::min(kappa, eig.eigenvalues()[0]);
        ++report.kappa_directions;
        return;
      }
      for (std::size_t j = start; j < support_pool.size(); ++j) {
        idx[depth] = j;
        rec(j + 1, depth + 1);
      }
    };
    rec(0, 0);
  } else {
    Rng rng(seed, 0x6EE);
    for (std::size_t t = 0; t < kappa_directions; ++t) {
      Vector w = Vector::Zero(static_cast<Eigen::Index>(d1));
      for (std::size_t p : rng.sample_without_replacement(support_pool.size(), order)) {
        w[static_cast<Eigen::Index>(support_pool[p])] = rng.normal();
      }
      const Vector v = local_t_pinv * w;
      const Vector u = local.transpose() * v;
      const double denom = u.squaredNorm();
      if (denom <= tolerance) continue;
      kappa = std::min(kappa, (features * v).squaredNorm() / (k * denom));
      ++report.kappa_directions;
    }
  }
  report.kappa = std::isfinite(kappa) ? std::max(kappa, 0.0) : 0.0;
  return report;
}

}  // namespace suplab
