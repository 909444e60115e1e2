#pragma once

#include "suplab/numeric.hpp"
#include "suplab/rng.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace suplab {

/// Multinomial logistic head: logits = W x + b.
struct LinearHead {
  Matrix weights;  // C x d
  Vector bias;     // C

  static LinearHead zeros(std::size_t classes, std::size_t dim);

  std::size_t classes() const { return static_cast<std::size_t>(weights.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(weights.cols()); }

  Vector logits(const Vector& x) const;
  /// Row i holds the logits of row i of `x` (N x d).
  Matrix logits(const Matrix& x) const;
  int predict(const Vector& x) const;
  std::vector<int> predict(const Matrix& x) const;
  double accuracy(const Matrix& x, std::span<const int> labels) const;
};

/// Numerically stable softmax (log-sum-exp shift).
Vector softmax(const Vector& logits);
double log_sum_exp(const Vector& logits);

struct XentResult {
  double loss = 0.0;
  Matrix grad_weights;
  Vector grad_bias;
  Matrix grad_inputs;  // N x d, filled only when requested
};

/// Mean cross-entropy over the batch and its gradient ((softmax - onehot) x^T).
/// Throws DataError for labels outside [0, C).
XentResult softmax_xent_grad(const LinearHead& head, const Matrix& x, std::span<const int> labels,
                             bool input_gradient = false);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 512;
  std::size_t epochs = 100;
  double weight_decay = 0.0;
};

/// Mini-batch Adam from a zero head, reshuffling every epoch.
LinearHead train_global_head(const Matrix& x, std::span<const int> labels, std::size_t classes,
                             const TrainConfig& config, Rng& rng);

/// Test-time training: full-batch Adam on the neighbourhood, starting from a copy of `base`.
struct TttConfig {
  std::size_t neighbors = 50;
  std::size_t steps = 80;
  double learning_rate = 0.02;
  double weight_decay = 0.0;
};

LinearHead ttt_finetune(const LinearHead& base, const Matrix& neighbourhood, std::span<const int> labels,
                        const TttConfig& config);

/// Most frequent label; ties go to the smallest class id.
int majority_vote(std::span<const int> labels);

/// One-hidden-layer ReLU network used as a trainable feature extractor of
/// adjustable width; its output layer is an ordinary LinearHead.
struct MlpModel {
  Matrix hidden_weights;  // h x d
  Vector hidden_bias;     // h
  LinearHead head;        // C x h

  std::size_t width() const { return static_cast<std::size_t>(hidden_weights.rows()); }
  /// ReLU(W1 x + b1) for each row.
  Matrix features(const Matrix& x) const;
  double accuracy(const Matrix& x, std::span<const int> labels) const;
};

struct MlpGradients {
  double loss = 0.0;
  Matrix hidden_weights;
  Vector hidden_bias;
  Matrix head_weights;
  Vector head_bias;
};

MlpGradients mlp_loss_and_grads(const MlpModel& model, const Matrix& x, std::span<const int> labels);

MlpModel train_mlp(const Matrix& x, std::span<const int> labels, std::size_t classes, std::size_t width,
                   const TrainConfig& config, Rng& rng);

struct KMeansResult {
  Matrix centroids;                    // E x d
  std::vector<std::size_t> assignment;  // per row
  std::size_t iterations = 0;
  std::size_t reseeded = 0;
};

/// Lloyd's algorithm with k-means++ seeding. A cluster that empties is reseeded
/// at the point farthest from its assigned centroid.
KMeansResult kmeans(const Matrix& x, std::size_t clusters, std::size_t max_iterations, Rng& rng);

struct MoeConfig {
  TttConfig expert;  // neighbours of the centroid, steps, learning rate
  std::size_t kmeans_iterations = 100;
};

struct MoeModel {
  Matrix centroids;                 // E x d
  std::vector<LinearHead> experts;  // one per centroid
  LinearHead base;

  std::size_t size() const { return experts.size(); }
};

MoeModel train_moe(const Matrix& x, std::span<const int> labels, std::size_t experts, const LinearHead& base,
                   const MoeConfig& config, Rng& rng);

/// Index of the nearest centroid in L2 distance (lowest index on ties).
std::size_t route(const MoeModel& moe, const Vector& x);
int route_and_predict(const MoeModel& moe, const Vector& x);

struct PredictiveComparison {
  Matrix reference_top;  // n x t, sorted reference probabilities
  Matrix other_top;      // n x t, sorted calibrated probabilities of the other model
  Vector temperatures;   // n
  std::vector<bool> clipped;  // temperature hit the search bounds
  Vector rel_tv;         // t, relative total variation per rank
};

inline constexpr double kMinTemperature = 0.05;
inline constexpr double kMaxTemperature = 20.0;

/// KL(softmax(reference) || softmax(other / tau)).
double tempered_kl(const Vector& reference_logits, const Vector& other_logits, double tau);

/// Golden-section minimization of tempered_kl over tau in [0.05, 20].
double fit_temperature(const Vector& reference_logits, const Vector& other_logits, bool* clipped = nullptr);

/// Per-rank relTV_i = E|p_i - q_i| / (0.5 (E p_i + E q_i)) over rows.
Vector relative_tv(const Matrix& reference_top, const Matrix& other_top);

/// Fits a temperature per row for `other`, keeps the top-t probabilities of
/// both models and reports relTV per rank.
PredictiveComparison calibrate_and_compare(const Matrix& reference_logits, const Matrix& other_logits,
                                           std::size_t top);

}  // namespace suplab
