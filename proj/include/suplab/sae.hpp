#pragma once

#include "suplab/classifiers.hpp"
#include "suplab/concept_model.hpp"
#include "suplab/numeric.hpp"
#include "suplab/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

namespace suplab {

enum class SaeVariant { top_k, threshold };

std::string to_string(SaeVariant v);
SaeVariant parse_sae_variant(const std::string& text);

/// Keeps the s largest values (not magnitudes); ties go to the lower index.
SparseVector top_k_activation(const Vector& pre, std::size_t s);

struct SaeModel {
  Matrix encoder;  // d1 x d2
  Matrix decoder;  // d2 x d1
  Vector bias;     // d1, all zero when the bias is disabled
  std::size_t sparsity = 1;
  SaeVariant variant = SaeVariant::top_k;
  Vector thresholds;  // d1, threshold variant only
  bool use_bias = true;

  std::size_t concept_dim() const { return static_cast<std::size_t>(encoder.rows()); }
  std::size_t feature_dim() const { return static_cast<std::size_t>(encoder.cols()); }

  /// Rescales every decoder column to unit norm (zero columns are left alone).
  void normalize_decoder();
  /// Throws DimensionError if the blocks disagree in shape.
  void validate() const;
};

struct SaeOutput {
  SparseVector code;
  Vector reconstruction;
};

SaeOutput sae_forward(const SaeModel& model, const Vector& psi);

/// Dense codes for each row of `x` (N x d1); `sparsity` 0 means model.sparsity.
Matrix sae_encode(const SaeModel& model, const Matrix& x, std::size_t sparsity = 0);
Matrix sae_reconstruct(const SaeModel& model, const Matrix& x);

/// Running activation frequencies; feature j is dead when f_j <= threshold.
/// Before any sample has been seen nothing counts as dead. With a nonzero
/// `window` only the most recent batches covering at least that many samples
/// are counted; zero counts everything since construction.
class ActivityTracker {
 public:
  ActivityTracker() = default;
  ActivityTracker(std::size_t concepts, double threshold, std::uint64_t window = 0);

  void observe(std::span<const std::uint64_t> batch_counts, std::uint64_t batch_rows);
  void observe(const SparseVector& code);

  std::size_t concepts() const { return counts_.size(); }
  std::uint64_t samples() const { return samples_; }
  double threshold() const { return threshold_; }
  std::uint64_t window() const { return window_; }
  Vector frequencies() const;
  std::vector<bool> dead_mask() const;
  double dead_fraction() const;

 private:
  std::vector<std::uint64_t> counts_;
  std::uint64_t samples_ = 0;
  double threshold_ = 1e-4;
  std::uint64_t window_ = 0;
  std::deque<std::pair<std::vector<std::uint64_t>, std::uint64_t>> recent_;
};

struct SaeGradients {
  Matrix encoder;
  Matrix decoder;
  Vector bias;
  Vector thresholds;
};

struct SaeLossOptions {
  /// Active sparsity for the top-k variant; 0 means model.sparsity.
  std::size_t sparsity = 0;
  /// N x d1 multipliers applied to the pre-activations (dropout); empty for none.
  const Matrix* dropout = nullptr;
  /// Threshold variant: weight of the L0 penalty and the rectangle-kernel width
  /// of its straight-through gradient with respect to the thresholds.
  double l0_coefficient = 0.0;
  double bandwidth = 1e-3;
};

struct SaeLoss {
  double total = 0.0;
  double reconstruction = 0.0;  // mean ||psi - psi_hat||^2
  double ghost = 0.0;           // weighted ghost term
  double l0 = 0.0;              // weighted L0 term
  SaeGradients grads;
  std::vector<std::uint64_t> activations;  // per-feature activation counts in the batch
};

/// Loss and gradients with the selection held fixed. The ghost term uses the
/// tracker's current dead set and treats the residual psi_hat - psi as a constant.
SaeLoss sae_loss_and_grads(const SaeModel& model, const Matrix& batch, const ActivityTracker& tracker,
                           double ghost_weight, const SaeLossOptions& options = {});

/// Ghost term alone, evaluated against a fixed residual (N x d2).
double ghost_loss(const SaeModel& model, const Matrix& batch, const std::vector<bool>& dead,
                  const Matrix& residual, double ghost_weight);

/// Smallest margin of the selection over the batch: gap between the s-th and
/// (s+1)-th pre-activation (top-k) or min |pre - theta| (threshold).
double selection_margin(const SaeModel& model, const Matrix& batch, std::size_t sparsity = 0);

struct SaeConfig {
  std::size_t concepts = 512;  // d1
  std::size_t sparsity = 16;   // s
  SaeVariant variant = SaeVariant::top_k;
  bool use_bias = true;
  bool normalize_decoder = true;
  std::size_t batch_size = 4096;
  std::size_t epochs = 100;
  std::size_t max_steps = 0;  // 0: no cap beyond epochs
  double peak_lr = 3e-4;
  std::int64_t warmup_steps = 5000;
  std::int64_t horizon = 100000;
  double lr_floor = 0.0;
  std::size_t initial_sparsity = 128;  // k0
  std::int64_t ramp_steps = 10000;     // K
  double dropout = 0.5;
  double clip_norm = 1.0;
  double ghost_weight = 1e6;
  double dead_threshold = 1e-4;
  std::uint64_t activity_window = 0;  // samples; 0 counts from the first step
  /// Encoder entries are uniform on [-a, a] with a = init_scale / sqrt(d2).
  double init_scale = 1.0;
  double threshold_init = 0.0;
  double l0_coefficient = 0.0;
  double bandwidth = 1e-3;

  void validate(std::size_t feature_dim) const;
};

struct SaeStepLog {
  std::int64_t step = 0;
  double learning_rate = 0.0;
  std::size_t sparsity = 0;
  double reconstruction = 0.0;
  double ghost = 0.0;
  double dead_fraction = 0.0;
  double grad_norm = 0.0;
};

/// Scheduled top-k size at `step` (ramp from k0 down to s, clamped to [s, d1]).
std::size_t scheduled_sparsity(const SaeConfig& config, std::int64_t step);

SaeModel init_sae(const SaeConfig& config, std::size_t feature_dim, Rng& rng);

SaeModel train_sae(const SaeConfig& config, const Matrix& data, Rng& rng, std::vector<SaeStepLog>* log = nullptr);

/// Fraction of features whose activation frequency on `data` is <= threshold.
double dead_feature_fraction(const SaeModel& model, const Matrix& data, double threshold);

/// Learned binary concept mask m = 1{theta > 0}. The forward pass uses m; the
/// backward pass uses d sigmoid(theta / tau) / d theta as the surrogate for dm/dtheta.
struct ConceptMask {
  Vector logits;
  double temperature = 0.1;
  double penalty = 0.0;

  Vector mask() const;
  std::size_t active() const;
  Vector surrogate_gradient() const;
  /// Applies the mask to each row of `x`.
  Matrix apply(const Matrix& x) const;
};

struct MaskConfig {
  double penalty = 1e-3;  // lambda
  double temperature = 0.1;
  std::size_t steps = 200;
  double learning_rate = 5e-2;
  double head_learning_rate = 5e-2;
  double initial_logit = 0.5;
};

struct MaskedHead {
  ConceptMask mask;
  LinearHead head;
  double loss = 0.0;  // final masked cross-entropy plus penalty
};

/// Joint full-batch Adam on the head and the mask logits minimizing
/// (1/k) sum CE(W (m . phi), y) + lambda ||m||^2.
MaskedHead learn_concept_mask(const Matrix& concepts, std::span<const int> labels, std::size_t classes,
                              const MaskConfig& config);

}  // namespace suplab
