#include "suplab/classifiers.hpp"

#include "suplab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace suplab {

namespace {

void check_labels(std::span<const int> labels, std::size_t classes, Eigen::Index rows) {
  if (static_cast<Eigen::Index>(labels.size()) != rows) {
    throw DimensionError("label count does not match the number of rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw DataError("label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
}

Matrix gather_rows(const Matrix& x, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  return out;
}

std::vector<int> gather(std::span<const int> labels, std::span<const std::size_t> rows) {
  std::vector<int> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = labels[rows[i]];
  return out;
}

// Row-wise softmax in place.
void softmax_rows(Matrix& logits) {
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    logits.row(r) = (logits.row(r).array() - m).exp();
    logits.row(r) /= logits.row(r).sum();
  }
}

// Squared L2 distances, rows of `a` against rows of `b`.
Matrix squared_distances(const Matrix& a, const Matrix& b) {
  Matrix d = -2.0 * (a * b.transpose());
  const Vector an = a.rowwise().squaredNorm();
  const Vector bn = b.rowwise().squaredNorm();
  d.colwise() += an;
  d.rowwise() += bn.transpose();
  return d.cwiseMax(0.0);
}

}  // namespace

LinearHead LinearHead::zeros(std::size_t classes, std::size_t dim) {
  return {Matrix::Zero(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(dim)),
          Vector::Zero(static_cast<Eigen::Index>(classes))};
}

Vector LinearHead::logits(const Vector& x) const {
  if (x.size() != weights.cols()) throw DimensionError("head: feature dimension mismatch");
  return weights * x + bias;
}

Matrix LinearHead::logits(const Matrix& x) const {
  if (x.cols() != weights.cols()) throw DimensionError("head: feature dimension mismatch");
  Matrix out = x * weights.transpose();
  out.rowwise() += bias.transpose();
  return out;
}

int LinearHead::predict(const Vector& x) const {
  Eigen::Index arg = 0;
  logits(x).maxCoeff(&arg);
  return static_cast<int>(arg);
}

std::vector<int> LinearHead::predict(const Matrix& x) const {
  const Matrix l = logits(x);
  std::vector<int> out(static_cast<std::size_t>(l.rows()));
  for (Eigen::Index r = 0; r < l.rows(); ++r) {
    Eigen::Index arg = 0;
    l.row(r).maxCoeff(&arg);
    out[static_cast<std::size_t>(r)] = static_cast<int>(arg);
  }
  return out;
}

double LinearHead::accuracy(const Matrix& x, std::span<const int> labels) const {
  if (labels.empty()) return 0.0;
  const auto pred = predict(x);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += pred[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

double log_sum_exp(const Vector& logits) {
  const double m = logits.maxCoeff();
  return m + std::log((logits.array() - m).exp().sum());
}

Vector softmax(const Vector& logits) {
  Vector p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

XentResult softmax_xent_grad(const LinearHead& head, const Matrix& x, std::span<const int> labels,
                             bool input_gradient) {
  check_labels(labels, head.classes(), x.rows());
  if (x.rows() == 0) throw DataError("cross-entropy on an empty batch");
  Matrix logits = head.logits(x);
  const double n = static_cast<double>(x.rows());
  XentResult out;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    const double lse = m + std::log((logits.row(r).array() - m).exp().sum());
    out.loss += lse - logits(r, labels[static_cast<std::size_t>(r)]);
  }
  out.loss /= n;
  softmax_rows(logits);
  for (Eigen::Index r = 0; r < logits.rows(); ++r) logits(r, labels[static_cast<std::size_t>(r)]) -= 1.0;
  logits /= n;
  out.grad_weights = logits.transpose() * x;
  out.grad_bias = logits.colwise().sum().transpose();
  if (input_gradient) out.grad_inputs = logits * head.weights;
  return out;
}

LinearHead train_global_head(const Matrix& x, std::span<const int> labels, std::size_t classes,
                             const TrainConfig& config, Rng& rng) {
  if (x.rows() == 0) throw DataError("train_global_head: empty dataset");
  check_labels(labels, classes, x.rows());
  if (config.batch_size == 0) throw ConfigError("batch_size must be positive");
  LinearHead head = LinearHead::zeros(classes, static_cast<std::size_t>(x.cols()));
  AdamState wstate(head.weights.rows(), head.weights.cols(), config.learning_rate, config.weight_decay);
  AdamState bstate(head.bias.size(), 1, config.learning_rate);
  std::vector<std::size_t> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const Matrix xb = gather_rows(x, idx);
      const auto yb = gather(labels, idx);
      const XentResult g = softmax_xent_grad(head, xb, yb);
      wstate.update(head.weights, g.grad_weights);
      bstate.update(head.bias, g.grad_bias);
    }
  }
  return head;
}

LinearHead ttt_finetune(const LinearHead& base, const Matrix& neighbourhood, std::span<const int> labels,
                        const TttConfig& config) {
  if (neighbourhood.rows() == 0) throw DataError("ttt_finetune: empty neighbourhood");
  check_labels(labels, base.classes(), neighbourhood.rows());
  LinearHead head = base;
  AdamState wstate(head.weights.rows(), head.weights.cols(), config.learning_rate, config.weight_decay);
  AdamState bstate(head.bias.size(), 1, config.learning_rate);
  for (std::size_t step = 0; step < config.steps; ++step) {
    const XentResult g = softmax_xent_grad(head, neighbourhood, labels);
    wstate.update(head.weights, g.grad_weights);
    bstate.update(head.bias, g.grad_bias);
  }
  return head;
}

int majority_vote(std::span<const int> labels) {
  if (labels.empty()) throw DataError("majority_vote: no labels");
  std::vector<int> sorted(labels.begin(), labels.end());
  std::sort(sorted.begin(), sorted.end());
  int best = sorted.front();
  std::size_t best_count = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    if (j - i > best_count) {
      best_count = j - i;
      best = sorted[i];
    }
    i = j;
  }
  return best;
}

Matrix MlpModel::features(const Matrix& x) const {
  if (x.cols() != hidden_weights.cols()) throw DimensionError("mlp: input dimension mismatch");
  Matrix h = x * hidden_weights.transpose();
  h.rowwise() += hidden_bias.transpose();
  return h.cwiseMax(0.0);
}

double MlpModel::accuracy(const Matrix& x, std::span<const int> labels) const {
  return head.accuracy(features(x), labels);
}

MlpGradients mlp_loss_and_grads(const MlpModel& model, const Matrix& x, std::span<const int> labels) {
  Matrix pre = x * model.hidden_weights.transpose();
  pre.rowwise() += model.hidden_bias.transpose();
  const Matrix h = pre.cwiseMax(0.0);
  XentResult top = softmax_xent_grad(model.head, h, labels, true);
  Matrix dpre = top.grad_inputs.array() * (pre.array() > 0.0).cast<double>();
  MlpGradients g;
  g.loss = top.loss;
  g.head_weights = std::move(top.grad_weights);
  g.head_bias = std::move(top.grad_bias);
  g.hidden_weights = dpre.transpose() * x;
  g.hidden_bias = dpre.colwise().sum().transpose();
  return g;
}

MlpModel train_mlp(const Matrix& x, std::span<const int> labels, std::size_t classes, std::size_t width,
                   const TrainConfig& config, Rng& rng) {
  if (x.rows() == 0) throw DataError("train_mlp: empty dataset");
  if (width == 0) throw ConfigError("train_mlp: width must be positive");
  check_labels(labels, classes, x.rows());
  const auto d = x.cols();
  const auto h = static_cast<Eigen::Index>(width);
  MlpModel model;
  model.hidden_weights = Matrix(h, d);
  const double s1 = std::sqrt(2.0 / static_cast<double>(d));
  for (Eigen::Index i = 0; i < model.hidden_weights.size(); ++i) model.hidden_weights.data()[i] = s1 * rng.normal();
  model.hidden_bias = Vector::Zero(h);
  model.head = LinearHead::zeros(classes, width);
  const double s2 = std::sqrt(1.0 / static_cast<double>(width));
  for (Eigen::Index i = 0; i < model.head.weights.size(); ++i) model.head.weights.data()[i] = s2 * rng.normal();

  const double lr = config.learning_rate;
  AdamState w1(h, d, lr, config.weight_decay), b1(h, 1, lr);
  AdamState w2(model.head.weights.rows(), h, lr, config.weight_decay), b2(model.head.bias.size(), 1, lr);
  std::vector<std::size_t> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = std::max<std::size_t>(1, config.batch_size);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const Matrix xb = gather_rows(x, idx);
      const auto yb = gather(labels, idx);
      const MlpGradients g = mlp_loss_and_grads(model, xb, yb);
      w1.update(model.hidden_weights, g.hidden_weights);
      b1.update(model.hidden_bias, g.hidden_bias);
      w2.update(model.head.weights, g.head_weights);
      b2.update(model.head.bias, g.head_bias);
    }
  }
  return model;
}

KMeansResult kmeans(const Matrix& x, std::size_t clusters, std::size_t max_iterations, Rng& rng) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (clusters == 0 || clusters > n) throw ConfigError("kmeans: need 1 <= clusters <= number of points");
  KMeansResult out;
  out.centroids = Matrix(static_cast<Eigen::Index>(clusters), x.cols());

  // k-means++ seeding.
  Vector nearest = Vector::Constant(static_cast<Eigen::Index>(n), std::numeric_limits<double>::infinity());
  std::size_t pick = rng.below(n);
  for (std::size_t c = 0; c < clusters; ++c) {
    out.centroids.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(pick));
    const Vector d = (x.rowwise() - x.row(static_cast<Eigen::Index>(pick))).rowwise().squaredNorm();
    nearest = nearest.cwiseMin(d);
    if (c + 1 == clusters) break;
    const double total = nearest.sum();
    if (total <= 0.0) {
      pick = rng.below(n);
      continue;
    }
    double u = rng.uniform() * total;
    pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      u -= nearest(static_cast<Eigen::Index>(i));
      if (u < 0.0) {
        pick = i;
        break;
      }
    }
  }

  out.assignment.assign(n, clusters);
  std::vector<double> dist(n);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    const Matrix d = squared_distances(x, out.centroids);
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::Index arg = 0;
      dist[i] = d.row(static_cast<Eigen::Index>(i)).minCoeff(&arg);
      if (out.assignment[i] != static_cast<std::size_t>(arg)) {
        out.assignment[i] = static_cast<std::size_t>(arg);
        changed = true;
      }
    }
    out.iterations = it + 1;

    std::vector<std::size_t> counts(clusters, 0);
    Matrix sums = Matrix::Zero(out.centroids.rows(), x.cols());
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[out.assignment[i]];
      sums.row(static_cast<Eigen::Index>(out.assignment[i])) += x.row(static_cast<Eigen::Index>(i));
    }
    for (std::size_t c = 0; c < clusters; ++c) {
      if (counts[c] > 0) {
        out.centroids.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / counts[c];
        continue;
      }
      // Steal the worst-fit point from a cluster that can spare it.
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[out.assignment[i]] > 1 && (far == n || dist[i] > dist[far])) far = i;
      }
      if (far == n) continue;
      --counts[out.assignment[far]];
      out.assignment[far] = c;
      counts[c] = 1;
      dist[far] = 0.0;
      out.centroids.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(far));
      ++out.reseeded;
      changed = true;
    }
    if (!changed) break;
  }
  return out;
}

MoeModel train_moe(const Matrix& x, std::span<const int> labels, std::size_t experts, const LinearHead& base,
                   const MoeConfig& config, Rng& rng) {
  check_labels(labels, base.classes(), x.rows());
  if (experts == 0 || experts > static_cast<std::size_t>(x.rows())) {
    throw ConfigError("train_moe: need 1 <= experts <= number of points");
  }
  const std::size_t k = std::min<std::size_t>(config.expert.neighbors, static_cast<std::size_t>(x.rows()));
  if (k == 0) throw ConfigError("train_moe: expert neighbourhood must be non-empty");
  MoeModel moe;
  moe.base = base;
  moe.centroids = kmeans(x, experts, config.kmeans_iterations, rng).centroids;
  const Matrix d = squared_distances(moe.centroids, x);
  std::vector<std::size_t> idx(static_cast<std::size_t>(x.rows()));
  moe.experts.reserve(experts);
  for (std::size_t e = 0; e < experts; ++e) {
    std::iota(idx.begin(), idx.end(), 0);
    const auto row = d.row(static_cast<Eigen::Index>(e));
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                        const double da = row(static_cast<Eigen::Index>(a));
                        const double db = row(static_cast<Eigen::Index>(b));
                        return da < db || (da == db && a < b);
                      });
    const std::span<const std::size_t> nb(idx.data(), k);
    const Matrix xs = gather_rows(x, nb);
    const auto ys = gather(labels, nb);
    moe.experts.push_back(ttt_finetune(base, xs, ys, config.expert));
  }
  return moe;
}

std::size_t route(const MoeModel& moe, const Vector& x) {
  if (moe.experts.empty()) throw DataError("route: empty mixture");
  if (x.size() != moe.centroids.cols()) throw DimensionError("route: feature dimension mismatch");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index e = 0; e < moe.centroids.rows(); ++e) {
    const double dist = (moe.centroids.row(e).transpose() - x).squaredNorm();
    if (dist < best_d) {
      best_d = dist;
      best = static_cast<std::size_t>(e);
    }
  }
  return best;
}

int route_and_predict(const MoeModel& moe, const Vector& x) { return moe.experts[route(moe, x)].predict(x); }

double tempered_kl(const Vector& reference_logits, const Vector& other_logits, double tau) {
  const Vector p = softmax(reference_logits);
  const Vector scaled = other_logits / tau;
  const double lse_q = log_sum_exp(scaled);
  const double lse_p = log_sum_exp(reference_logits);
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) <= 0.0) continue;
    kl += p(i) * ((reference_logits(i) - lse_p) - (scaled(i) - lse_q));
  }
  return std::max(0.0, kl);
}

double fit_temperature(const Vector& reference_logits, const Vector& other_logits, bool* clipped) {
  if (reference_logits.size() != other_logits.size()) throw DimensionError("fit_temperature: size mismatch");
  // Golden-section search on log(tau).
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = std::log(kMinTemperature);
  double b = std::log(kMaxTemperature);
  auto f = [&](double t) { return tempered_kl(reference_logits, other_logits, std::exp(t)); };
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 200 && b - a > 1e-12; ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = f(d);
    }
  }
  const double t = 0.5 * (a + b);
  const double lo = std::log(kMinTemperature), hi = std::log(kMaxTemperature);
  if (clipped) *clipped = (t - lo) < 1e-6 || (hi - t) < 1e-6;
  return std::clamp(std::exp(t), kMinTemperature, kMaxTemperature);
}

Vector relative_tv(const Matrix& reference_top, const Matrix& other_top) {
  if (reference_top.rows() != other_top.rows() || reference_top.cols() != other_top.cols()) {
    throw DimensionError("relative_tv: shape mismatch");
  }
  const Eigen::Index t = reference_top.cols();
  Vector out = Vector::Zero(t);
  if (reference_top.rows() == 0) return out;
  for (Eigen::Index i = 0; i < t; ++i) {
    const double scale = 0.5 * (reference_top.col(i).mean() + other_top.col(i).mean());
    const double gap = (reference_top.col(i) - other_top.col(i)).cwiseAbs().mean();
    out(i) = scale > 0.0 ? gap / scale : 0.0;
  }
  return out;
}

PredictiveComparison calibrate_and_compare(const Matrix& reference_logits, const Matrix& other_logits,
                                           std::size_t top) {
  if (reference_logits.rows() != other_logits.rows() || reference_logits.cols() != other_logits.cols()) {
    throw DimensionError("calibrate_and_compare: logit shapes differ");
  }
  const auto t = static_cast<Eigen::Index>(top);
  if (top == 0 || t > reference_logits.cols()) throw ConfigError("calibrate_and_compare: need 1 <= t <= C");
  const Eigen::Index n = reference_logits.rows();
  PredictiveComparison out;
  out.reference_top = Matrix(n, t);
  out.other_top = Matrix(n, t);
  out.temperatures = Vector(n);
  out.clipped.assign(static_cast<std::size_t>(n), false);
  auto top_sorted = [t](Vector p) {
    std::sort(p.data(), p.data() + p.size(), std::greater<>());
    return Vector(p.head(t));
  };
  for (Eigen::Index r = 0; r < n; ++r) {
    const Vector ref = reference_logits.row(r).transpose();
    const Vector oth = other_logits.row(r).transpose();
    bool clipped = false;
    const double tau = fit_temperature(ref, oth, &clipped);
    out.temperatures(r) = tau;
    out.clipped[static_cast<std::size_t>(r)] = clipped;
    out.reference_top.row(r) = top_sorted(softmax(ref)).transpose();
    out.other_top.row(r) = top_sorted(softmax(oth / tau)).transpose();
  }
  out.rel_tv = relative_tv(out.reference_top, out.other_top);
  return out;
}

}  // namespace suplab
