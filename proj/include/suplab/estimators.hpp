#pragma once

#include "suplab/concept_model.hpp"
#include "suplab/neighborhood.hpp"
#include "suplab/numeric.hpp"
#include "suplab/rng.hpp"

#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

namespace suplab {

/// Moore-Penrose pseudoinverse via SVD. Singular values at or below
/// max(rows, cols) * eps * sigma_max are treated as zero.
Matrix pseudoinverse(const Matrix& a, Eigen::Index* rank = nullptr);

struct GlobalModel {
  Vector weights;
  double residual = 0.0;  // mean squared training residual
  Eigen::Index rank = 0;

  double predict(const Vector& x) const { return weights.dot(x); }
};

/// Minimum-norm least squares.
GlobalModel fit_global_minnorm(const Matrix& features, const Vector& labels);

/// (X^T X + k lambda I)^{-1} X^T y with k the number of rows.
GlobalModel fit_ridge(const Matrix& features, const Vector& labels, double lambda);

enum class SparseSearch { exhaustive, greedy };

/// Largest number of supports exhaustive search will enumerate.
inline constexpr double kExhaustiveBudget = 1e6;

struct LocalModel {
  Vector weights;                     // v in feature space
  std::vector<std::size_t> support;   // concept indices S, sorted
  double residual = 0.0;              // (1/k) |Psi v - y|^2

  double predict(const Vector& feature) const { return weights.dot(feature); }
};

/// Sparsity-constrained local least squares
///   min_v (1/k) |Psi v - y|^2  subject to  |P^T v|_0 <= s'.
///
/// Only concept columns where `local_projection` is non-zero can carry weight.
/// For a candidate support S the feasible set is {v : (P^T v)_j = 0 for j not in S},
/// a linear subspace; the restricted problem is solved in it with the minimum-norm
/// convention. Exhaustive mode enumerates every support of size min(s', #active
/// columns) and throws BudgetError past kExhaustiveBudget supports; greedy mode adds,
/// one at a time, the column whose restricted refit lowers the residual most.
LocalModel fit_ttt_sparse(const Matrix& features, const Vector& labels, const Matrix& local_projection,
                          std::size_t local_sparsity, SparseSearch mode = SparseSearch::greedy);

/// Best m-column subset regression y ~ X_S b (used for the local-simplicity residual).
struct SubsetFit {
  std::vector<std::size_t> support;
  Vector coefficients;  // full length, zero off-support
  double residual = 0.0;  // (1/rows) |X b - y|^2
};

SubsetFit best_subset_regression(const Matrix& design, const Vector& labels, std::size_t m, SparseSearch mode,
                                 std::span<const std::size_t> candidates = {});

/// Mean label of the neighbourhood members; `labels` is indexed by dataset row.
double knn_regress(const Neighborhood& nb, const Vector& labels);

struct InterferenceResult {
  double error = 0.0;     // (1/d1) |1 - Pi 1|^2 for the realized projection
  double analytic = 0.0;  // 1 - d2/d1, the seed-averaged value
  Eigen::Index rank = 0;
};

/// Population error of the minimum-norm global model on the non-learnable instance.
InterferenceResult evaluate_interference(const NonLearnableInstance& instance);

struct ErrorCurvePoint {
  std::size_t k = 0;
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::vector<double> samples;  // per-trial excess errors
};

struct ErrorReport {
  double noise_floor = 0.0;  // sigma^2, excluded from the excess errors
  double inherent = 0.0;     // <Phi(x*), w* - w_local>^2, zero for pool-restricted models
  std::uint64_t seed = 0;
  std::vector<ErrorCurvePoint> curve;

  /// Least-squares slope of log(mean) against log(k).
  double loglog_slope() const;
};

/// Mean excess TTT error (prediction - f(x*))^2 against the neighbourhood size.
/// Each trial draws a pool, a test point and max(k) neighbours from it; the
/// first k neighbours are used for each k so the curve is paired across k.
/// P_local is the world projection restricted to the pool's columns.
ErrorReport ttt_rate_curve(const ConceptWorld& world, std::span<const std::size_t> ks, std::size_t local_sparsity,
                           std::size_t trials, Rng& rng, SparseSearch mode = SparseSearch::greedy);

/// CSV rows "k,mean,ci_low,ci_high,trials,seed".
void write_error_report_csv(std::ostream& out, const ErrorReport& report);

/// Binomial coefficient as a double (saturates at +inf).
double binomial(std::size_t n, std::size_t k);

}  // namespace suplab
