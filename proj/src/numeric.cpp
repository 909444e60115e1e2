#include "suplab/numeric.hpp"

#include "suplab/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace suplab {

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  return a * b;
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string(what) + ": non-finite entries");
}

void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw NumericError(std::string(what) + ": non-finite entries");
}

AdamState::AdamState(Eigen::Index rows, Eigen::Index cols, double lr, double wd)
    : first_moment(Matrix::Zero(rows, cols)),
      second_moment(Matrix::Zero(rows, cols)),
      learning_rate(lr),
      weight_decay(wd) {}

void AdamState::update(Matrix& params, const Matrix& grads) {
  if (params.rows() != grads.rows() || params.cols() != grads.cols()) {
    throw DimensionError("adam: parameter and gradient shapes differ");
  }
  require_finite(grads, "adam gradient");
  apply(params.data(), grads.data(), params.rows(), params.cols());
}

void AdamState::update(Vector& params, const Vector& grads) {
  if (params.size() != grads.size()) throw DimensionError("adam: parameter and gradient shapes differ");
  require_finite(grads, "adam gradient");
  apply(params.data(), grads.data(), params.size(), 1);
}

void AdamState::apply(double* params, const double* grads, Eigen::Index rows, Eigen::Index cols) {
  if (first_moment.size() == 0) {
    first_moment = Matrix::Zero(rows, cols);
    second_moment = Matrix::Zero(rows, cols);
  }
  if (first_moment.rows() != rows || first_moment.cols() != cols) {
    throw DimensionError("adam: optimizer state shape differs from parameters");
  }
  ++step;
  const double bias1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double bias2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  const double step_size = learning_rate / bias1;
  const double sqrt_bias2 = std::sqrt(bias2);
  double* m = first_moment.data();
  double* v = second_moment.data();
  for (Eigen::Index i = 0; i < rows * cols; ++i) {
    double g = grads[i];
    if (weight_decay != 0.0) g += weight_decay * params[i];
    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
    params[i] -= step_size * m[i] / (std::sqrt(v[i]) / sqrt_bias2 + epsilon);
  }
}

Matrix adam_step(AdamState& state, const Matrix& params, const Matrix& grads) {
  Matrix out = params;
  state.update(out, grads);
  return out;
}

Matrix clip_gradient_norm(const Matrix& grads, double max_norm) {
  if (!(max_norm > 0.0)) throw ConfigError("clip_gradient_norm: max_norm must be positive");
  const double norm = grads.norm();
  if (norm <= max_norm) return grads;
  return grads * (max_norm / norm);
}

double clip_gradient_norm(std::initializer_list<Matrix*> grads, double max_norm) {
  if (!(max_norm > 0.0)) throw ConfigError("clip_gradient_norm: max_norm must be positive");
  double sq = 0.0;
  for (const Matrix* g : grads) sq += g->squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (Matrix* g : grads) *g *= scale;
  }
  return norm;
}

Schedule Schedule::constant(double value) { return {ScheduleKind::constant, 0, 0, value, value}; }

Schedule Schedule::warmup_cosine(double peak, std::int64_t warmup, std::int64_t horizon, double floor) {
  Schedule s{ScheduleKind::warmup_cosine, warmup, horizon, peak, floor};
  s.validate();
  return s;
}

Schedule Schedule::linear_ramp(double from, double to, std::int64_t steps) {
  Schedule s{ScheduleKind::linear_ramp, steps, steps, from, to};
  s.validate();
  return s;
}

void Schedule::validate() const {
  switch (kind) {
    case ScheduleKind::constant:
      return;
    case ScheduleKind::warmup_cosine:
      if (warmup < 0 || warmup >= horizon) {
        throw ConfigError("warmup-cosine schedule needs 0 <= warmup < horizon (got " +
                          std::to_string(warmup) + ", " + std::to_string(horizon) + ")");
      }
      return;
    case ScheduleKind::linear_ramp:
      if (warmup < 0) throw ConfigError("linear ramp needs a non-negative length");
      return;
  }
}

double schedule_value(const Schedule& s, std::int64_t step) {
  if (step < 0) throw ConfigError("schedule step must be non-negative");
  s.validate();
  switch (s.kind) {
    case ScheduleKind::constant:
      return s.start;
    case ScheduleKind::warmup_cosine: {
      if (step < s.warmup) {
        return s.start * static_cast<double>(step) / static_cast<double>(s.warmup);
      }
      if (step >= s.horizon) return s.end;
      const double t = static_cast<double>(step - s.warmup) / static_cast<double>(s.horizon - s.warmup);
      const double lambda = 0.5 * (1.0 + std::cos(std::numbers::pi * t));
      return s.end + (s.start - s.end) * lambda;
    }
    case ScheduleKind::linear_ramp: {
      if (step >= s.warmup) return s.end;
      const double lambda = static_cast<double>(step) / static_cast<double>(s.warmup);
      return s.start - (s.start - s.end) * lambda;
    }
  }
  return s.start;
}

Matrix finite_difference_gradient(const LossFunction& loss, const Matrix& params, double h) {
  if (!(h > 0.0)) throw ConfigError("finite_difference_gradient: h must be positive");
  Matrix grad(params.rows(), params.cols());
  Matrix probe = params;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double original = probe.data()[i];
    probe.data()[i] = original + h;
    const double up = loss(probe);
    probe.data()[i] = original - h;
    const double down = loss(probe);
    probe.data()[i] = original;
    grad.data()[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double max_relative_error(const Matrix& a, const Matrix& b, double floor) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("max_relative_error: shapes differ");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double x = a.data()[i];
    const double y = b.data()[i];
    const double scale = std::max({std::abs(x), std::abs(y), floor});
    worst = std::max(worst, std::abs(x - y) / scale);
  }
  return worst;
}

}  // namespace suplab
