#include "suplab/estimators.hpp"

#include "suplab/errors.hpp"
#include "suplab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace suplab {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

struct ThinSvd {
  Matrix u;
  Vector singular;
  Matrix v;
  Eigen::Index rank = 0;
};

ThinSvd thin_svd(const Matrix& a) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  ThinSvd out{svd.matrixU(), svd.singularValues(), svd.matrixV(), 0};
  if (out.singular.size() > 0) {
    const double cutoff = static_cast<double>(std::max(a.rows(), a.cols())) * kEps * out.singular[0];
    for (Eigen::Index i = 0; i < out.singular.size(); ++i) {
      if (out.singular[i] > cutoff) ++out.rank;
    }
  }
  return out;
}

/// Orthonormal basis (columns) of the null space of `a`.
Matrix null_space(const Matrix& a) {
  const Eigen::Index n = a.cols();
  if (a.rows() == 0) return Matrix::Identity(n, n);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  Eigen::Index rank = 0;
  if (s.size() > 0) {
    const double cutoff = static_cast<double>(std::max(a.rows(), a.cols())) * kEps * s[0];
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (s[i] > cutoff) ++rank;
    }
  }
  return svd.matrixV().rightCols(n - rank);
}

/// Minimum-norm solution of the symmetric PSD system H z = c; returns c^T z.
double psd_minnorm_solve(const Matrix& h, const Vector& c, Vector* z) {
  if (h.rows() == 0) {
    if (z) z->resize(0);
    return 0.0;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
  const Vector& lambda = eig.eigenvalues();
  const double top = std::max(lambda.cwiseAbs().maxCoeff(), 0.0);
  const double cutoff = static_cast<double>(h.rows()) * kEps * top;
  const Vector proj = eig.eigenvectors().transpose() * c;
  Vector coef = Vector::Zero(h.rows());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda[i] > cutoff) coef[i] = proj[i] / lambda[i];
  }
  if (z) *z = eig.eigenvectors() * coef;
  return proj.dot(coef);
}

void for_each_combination(std::size_t n, std::size_t m, const std::function<void(const std::vector<std::size_t>&)>& f) {
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (m > n) return;
  while (true) {
    f(idx);
    std::size_t i = m;
    while (i > 0 && idx[i - 1] == n - m + (i - 1)) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < m; ++j) idx[j] = idx[j - 1] + 1;
  }
}

void check_rows(const Matrix& features, const Vector& labels, const char* who) {
  if (features.rows() != labels.size()) {
    throw DimensionError(std::string(who) + ": feature rows and label count differ");
  }
  require_finite(features, who);
  require_finite(labels, who);
}

}  // namespace

double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  k = std::min(k, n - k);
  double out = 1.0;
  for (std::size_t i = 1; i <= k; ++i) {
    out = out * static_cast<double>(n - k + i) / static_cast<double>(i);
    if (!std::isfinite(out)) return std::numeric_limits<double>::infinity();
  }
  return std::round(out);
}

Matrix pseudoinverse(const Matrix& a, Eigen::Index* rank) {
  if (a.size() == 0) {
    if (rank) *rank = 0;
    return Matrix::Zero(a.cols(), a.rows());
  }
  const ThinSvd svd = thin_svd(a);
  if (rank) *rank = svd.rank;
  Matrix out = Matrix::Zero(a.cols(), a.rows());
  for (Eigen::Index i = 0; i < svd.rank; ++i) {
    out.noalias() += (svd.v.col(i) / svd.singular[i]) * svd.u.col(i).transpose();
  }
  return out;
}

GlobalModel fit_global_minnorm(const Matrix& features, const Vector& labels) {
  check_rows(features, labels, "fit_global_minnorm");
  GlobalModel model;
  if (features.rows() == 0) {
    model.weights = Vector::Zero(features.cols());
    return model;
  }
  const ThinSvd svd = thin_svd(features);
  model.rank = svd.rank;
  model.weights = Vector::Zero(features.cols());
  for (Eigen::Index i = 0; i < svd.rank; ++i) {
    model.weights += svd.v.col(i) * (svd.u.col(i).dot(labels) / svd.singular[i]);
  }
  model.residual = (features * model.weights - labels).squaredNorm() / static_cast<double>(features.rows());
  return model;
}

GlobalModel fit_ridge(const Matrix& features, const Vector& labels, double lambda) {
  if (lambda < 0.0) throw ConfigError("ridge penalty must be non-negative");
  check_rows(features, labels, "fit_ridge");
  const auto k = static_cast<double>(features.rows());
  Matrix gram = features.transpose() * features;
  gram.diagonal().array() += k * lambda;
  GlobalModel model;
  model.weights = gram.ldlt().solve(features.transpose() * labels);
  require_finite(model.weights, "ridge solution");
  model.rank = features.cols();
  if (features.rows() > 0) {
    model.residual = (features * model.weights - labels).squaredNorm() / k;
  }
  return model;
}

LocalModel fit_ttt_sparse(const Matrix& features, const Vector& labels, const Matrix& local_projection,
                          std::size_t local_sparsity, SparseSearch mode) {
  check_rows(features, labels, "fit_ttt_sparse");
  if (local_sparsity < 1) throw ConfigError("fit_ttt_sparse needs s' >= 1");
  if (local_projection.rows() != features.cols()) {
    throw DimensionError("fit_ttt_sparse: local projection must have d2 rows");
  }
  const Eigen::Index k = features.rows();
  const Eigen::Index d2 = features.cols();
  if (k == 0) throw DataError("fit_ttt_sparse on an empty neighbourhood");

  std::vector<std::size_t> active;
  for (Eigen::Index j = 0; j < local_projection.cols(); ++j) {
    if (local_projection.col(j).squaredNorm() > 0.0) active.push_back(static_cast<std::size_t>(j));
  }
  LocalModel model;
  model.weights = Vector::Zero(d2);
  const double yy = labels.squaredNorm();
  if (active.empty()) {
    model.residual = yy / static_cast<double>(k);
    return model;
  }

  const auto c = static_cast<Eigen::Index>(active.size());
  Matrix pc(d2, c);
  for (Eigen::Index j = 0; j < c; ++j) pc.col(j) = local_projection.col(static_cast<Eigen::Index>(active[j]));

  // Only the range of P_local affects predictions; work in an orthonormal basis of it.
  const ThinSvd psvd = thin_svd(pc);
  const Matrix basis = psvd.u.leftCols(psvd.rank);  // d2 x r
  const Matrix coords = basis.transpose() * pc;     // r x c, P^T v = coords^T a for v = basis a
  const Matrix design = features * basis;           // k x r
  const Matrix gram = design.transpose() * design;
  const Vector moment = design.transpose() * labels;

  auto feasible_basis = [&](const std::vector<std::size_t>& chosen) {
    std::vector<bool> in(static_cast<std::size_t>(c), false);
    for (std::size_t p : chosen) in[p] = true;
    Matrix constraints(c - static_cast<Eigen::Index>(chosen.size()), coords.rows());
    Eigen::Index row = 0;
    for (Eigen::Index j = 0; j < c; ++j) {
      if (!in[static_cast<std::size_t>(j)]) constraints.row(row++) = coords.col(j).transpose();
    }
    return null_space(constraints);
  };
  auto restricted_residual = [&](const std::vector<std::size_t>& chosen) {
    const Matrix n = feasible_basis(chosen);
    if (n.cols() == 0) return yy;
    const Matrix h = n.transpose() * gram * n;
    const Vector rhs = n.transpose() * moment;
    return std::max(0.0, yy - psd_minnorm_solve(h, rhs, nullptr));
  };

  const std::size_t m = std::min<std::size_t>(local_sparsity, active.size());
  std::vector<std::size_t> best;
  if (mode == SparseSearch::exhaustive) {
    const double count = binomial(active.size(), m);
    if (count > kExhaustiveBudget) {
      throw BudgetError("exhaustive support search over C(" + std::to_string(active.size()) + ", " +
                        std::to_string(m) + ") supports exceeds the budget; use greedy mode");
    }
    double best_res = std::numeric_limits<double>::infinity();
    for_each_combination(active.size(), m, [&](const std::vector<std::size_t>& idx) {
      const double res = restricted_residual(idx);
      if (res < best_res * (1.0 - 1e-12) || best_res == std::numeric_limits<double>::infinity()) {
        best_res = res;
        best = idx;
      }
    });
  } else {
    double current = yy;
    const double done = 1e-24 * std::max(yy, std::numeric_limits<double>::min());
    std::vector<bool> used(active.size(), false);
    for (std::size_t step = 0; step < m && current > done; ++step) {
      double best_res = std::numeric_limits<double>::infinity();
      std::size_t pick = active.size();
      for (std::size_t j = 0; j < active.size(); ++j) {
        if (used[j]) continue;
        std::vector<std::size_t> trial = best;
        trial.push_back(j);
        const double res = restricted_residual(trial);
        if (res < best_res * (1.0 - 1e-12) || pick == active.size()) {
          best_res = res;
          pick = j;
        }
      }
      used[pick] = true;
      best.push_back(pick);
      current = best_res;
    }
    std::sort(best.begin(), best.end());
  }

  // Accurate final refit on the chosen support.
  const Matrix n = feasible_basis(best);
  if (n.cols() > 0) {
    const Matrix reduced = design * n;
    GlobalModel inner = fit_global_minnorm(reduced, labels);
    model.weights = basis * (n * inner.weights);
  }
  for (std::size_t p : best) model.support.push_back(active[p]);
  model.residual = (features * model.weights - labels).squaredNorm() / static_cast<double>(k);
  return model;
}

SubsetFit best_subset_regression(const Matrix& design, const Vector& labels, std::size_t m, SparseSearch mode,
                                 std::span<const std::size_t> candidates) {
  check_rows(design, labels, "best_subset_regression");
  std::vector<std::size_t> pool;
  if (candidates.empty()) {
    for (Eigen::Index j = 0; j < design.cols(); ++j) {
      if (design.col(j).squaredNorm() > 0.0) pool.push_back(static_cast<std::size_t>(j));
    }
  } else {
    pool.assign(candidates.begin(), candidates.end());
  }
  const auto rows = static_cast<double>(std::max<Eigen::Index>(design.rows(), 1));
  SubsetFit out;
  out.coefficients = Vector::Zero(design.cols());
  out.residual = labels.squaredNorm() / rows;
  m = std::min(m, pool.size());
  if (m == 0) return out;

  auto solve = [&](const std::vector<std::size_t>& cols, Vector* coef) {
    Matrix sub(design.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) sub.col(static_cast<Eigen::Index>(j)) = design.col(static_cast<Eigen::Index>(cols[j]));
    Vector b = sub.colPivHouseholderQr().solve(labels);
    if (coef) *coef = b;
    return (sub * b - labels).squaredNorm() / rows;
  };

  std::vector<std::size_t> best;
  if (mode == SparseSearch::exhaustive) {
    if (binomial(pool.size(), m) > kExhaustiveBudget) throw BudgetError("exhaustive subset search exceeds the budget");
    double best_res = std::numeric_limits<double>::infinity();
    for_each_combination(pool.size(), m, [&](const std::vector<std::size_t>& idx) {
      std::vector<std::size_t> cols;
      for (std::size_t p : idx) cols.push_back(pool[p]);
      const double res = solve(cols, nullptr);
      if (res < best_res * (1.0 - 1e-12) || best.empty()) {
        best_res = res;
        best = cols;
      }
    });
  } else {
    double current = out.residual;
    for (std::size_t step = 0; step < m && current > 1e-28; ++step) {
      double best_res = std::numeric_limits<double>::infinity();
      std::size_t pick = pool.size();
      for (std::size_t p = 0; p < pool.size(); ++p) {
        if (std::find(best.begin(), best.end(), pool[p]) != best.end()) continue;
        std::vector<std::size_t> trial = best;
        trial.push_back(pool[p]);
        const double res = solve(trial, nullptr);
        if (res < best_res * (1.0 - 1e-12) || pick == pool.size()) {
          best_res = res;
          pick = p;
        }
      }
      best.push_back(pool[pick]);
      current = best_res;
    }
  }
  std::sort(best.begin(), best.end());
  Vector coef;
  out.residual = solve(best, &coef);
  out.support = best;
  for (std::size_t j = 0; j < best.size(); ++j) out.coefficients[static_cast<Eigen::Index>(best[j])] = coef[static_cast<Eigen::Index>(j)];
  return out;
}

double knn_regress(const Neighborhood& nb, const Vector& labels) {
  if (nb.empty()) throw DataError("knn_regress on an empty neighbourhood");
  double acc = 0.0;
  for (std::size_t m : nb.members) {
    if (static_cast<Eigen::Index>(m) >= labels.size()) throw DataError("neighbour index outside the label vector");
    acc += labels[static_cast<Eigen::Index>(m)];
  }
  return acc / static_cast<double>(nb.size());
}

InterferenceResult evaluate_interference(const NonLearnableInstance& instance) {
  const Matrix design = instance.projection.transpose();  // one row p_m per cell
  const Vector ones = Vector::Ones(design.rows());
  const GlobalModel global = fit_global_minnorm(design, ones);
  InterferenceResult out;
  out.error = (ones - design * global.weights).squaredNorm() / static_cast<double>(design.rows());
  out.analytic = 1.0 - static_cast<double>(instance.feature_dim()) / static_cast<double>(instance.concept_dim());
  out.rank = global.rank;
  return out;
}

double ErrorReport::loglog_slope() const {
  const auto n = static_cast<double>(curve.size());
  if (curve.size() < 2) throw DataError("slope needs at least two curve points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : curve) {
    const double x = std::log(static_cast<double>(p.k));
    const double y = std::log(p.mean);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

ErrorReport ttt_rate_curve(const ConceptWorld& world, std::span<const std::size_t> ks, std::size_t local_sparsity,
                           std::size_t trials, Rng& rng, SparseSearch mode) {
  if (world.config.law != SupportLaw::clustered) throw ConfigError("ttt_rate_curve needs a clustered-support world");
  if (ks.empty() || trials == 0) throw ConfigError("ttt_rate_curve needs k values and trials");
  for (std::size_t i = 1; i < ks.size(); ++i) {
    if (ks[i] <= ks[i - 1]) throw ConfigError("ttt_rate_curve: k values must increase");
  }
  const std::size_t k_max = ks.back();

  ErrorReport report;
  report.noise_floor = world.noise_variance();
  report.seed = rng.seed();
  report.curve.resize(ks.size());
  for (std::size_t i = 0; i < ks.size(); ++i) {
    report.curve[i].k = ks[i];
    report.curve[i].samples.reserve(trials);
  }

  for (std::size_t t = 0; t < trials; ++t) {
    Rng trial_rng = rng.split(t);
    const std::size_t pool = trial_rng.below(world.pool_count());
    const Sample test = sample_point(world, trial_rng, pool);
    std::vector<Sample> neighbours;
    neighbours.reserve(k_max);
    for (std::size_t i = 0; i < k_max; ++i) neighbours.push_back(sample_point(world, trial_rng, pool));

    Matrix local = Matrix::Zero(world.projection.rows(), world.projection.cols());
    for (std::size_t j : world.pool(pool)) {
      local.col(static_cast<Eigen::Index>(j)) = world.projection.col(static_cast<Eigen::Index>(j));
    }
    const Matrix features = feature_matrix(neighbours);
    const Vector labels = label_vector(neighbours);
    const double truth = ground_truth(world, test.phi);

    for (std::size_t i = 0; i < ks.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(ks[i]);
      const LocalModel fit = fit_ttt_sparse(features.topRows(k), labels.head(k), local, local_sparsity, mode);
      const double err = fit.predict(test.feature) - truth;
      report.curve[i].samples.push_back(err * err);
    }
  }

  Rng boot(rng.seed(), 0xB007);
  for (auto& point : report.curve) {
    point.mean = mean(point.samples);
    const Interval ci = bootstrap_ci(point.samples, kDefaultResamples, kDefaultLevel, boot);
    point.ci_low = ci.low;
    point.ci_high = ci.high;
  }
  return report;
}

void write_error_report_csv(std::ostream& out, const ErrorReport& report) {
  out << "k,mean,ci_low,ci_high,trials,seed\n";
  char buf[256];
  for (const auto& p : report.curve) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%zu,%llu\n", p.k, p.mean, p.ci_low, p.ci_high,
                  p.samples.size(), static_cast<unsigned long long>(report.seed));
    out << buf;
  }
}

}  // namespace suplab
