#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <initializer_list>

namespace suplab {

/// Dense row-major real matrix; every module stores designs and weights in it.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Matrix product with an explicit shape check (throws DimensionError).
Matrix matmul(const Matrix& a, const Matrix& b);

/// Throws NumericError naming `what` if any entry is NaN or infinite.
void require_finite(const Matrix& m, const char* what);
void require_finite(const Vector& v, const char* what);

/// Bias-corrected Adam with optional L2 weight decay added to the gradient.
struct AdamState {
  Matrix first_moment;
  Matrix second_moment;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;

  AdamState() = default;
  AdamState(Eigen::Index rows, Eigen::Index cols, double lr, double weight_decay = 0.0);

  /// Applies one update to `params` in place. Non-finite gradients abort the
  /// update before any state is touched.
  void update(Matrix& params, const Matrix& grads);
  void update(Vector& params, const Vector& grads);

 private:
  void apply(double* params, const double* grads, Eigen::Index rows, Eigen::Index cols);
};

/// Functional form of AdamState::update; returns the updated parameters.
Matrix adam_step(AdamState& state, const Matrix& params, const Matrix& grads);

/// Rescales `grads` to Euclidean norm `max_norm` when it exceeds it.
Matrix clip_gradient_norm(const Matrix& grads, double max_norm);

/// Joint version over several gradient blocks; returns the pre-clip norm.
double clip_gradient_norm(std::initializer_list<Matrix*> grads, double max_norm);

enum class ScheduleKind { constant, warmup_cosine, linear_ramp };

/// Step-indexed scalar schedule.
///
/// - constant: `start` at every step.
/// - warmup_cosine: rises linearly from 0 to `start` (the peak) over `warmup`
///   steps, then decays as end + (start - end) * 0.5 * (1 + cos(pi * t)) with
///   t = (step - warmup) / (horizon - warmup), holding `end` after the horizon.
/// - linear_ramp: moves linearly from `start` to `end` over `warmup` steps,
///   then stays at `end`. Used for the top-k sparsity ramp.
struct Schedule {
  ScheduleKind kind = ScheduleKind::constant;
  std::int64_t warmup = 0;
  std::int64_t horizon = 0;
  double start = 0.0;
  double end = 0.0;

  static Schedule constant(double value);
  static Schedule warmup_cosine(double peak, std::int64_t warmup, std::int64_t horizon, double floor = 0.0);
  static Schedule linear_ramp(double from, double to, std::int64_t steps);

  /// Throws ConfigError for inconsistent parameters.
  void validate() const;
};

double schedule_value(const Schedule& s, std::int64_t step);

using LossFunction = std::function<double(const Matrix&)>;

/// Central-difference gradient of `loss` at `params`, entry by entry.
Matrix finite_difference_gradient(const LossFunction& loss, const Matrix& params, double h);

/// max |a - b| / max(|a|, |b|, floor) over all entries.
double max_relative_error(const Matrix& a, const Matrix& b, double floor = 1e-8);

}  // namespace suplab
