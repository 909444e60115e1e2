#include "suplab/sae.hpp"

#include "suplab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace suplab {

namespace {

// Indices of the s largest entries of `row`, ties to the lower index.
void select_top(const double* row, std::size_t n, std::size_t s, std::vector<std::size_t>& idx) {
  idx.resize(n);
  std::iota(idx.begin(), idx.end(), 0);
  auto better = [row](std::size_t a, std::size_t b) { return row[a] > row[b] || (row[a] == row[b] && a < b); };
  if (s < n) std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(s), idx.end(), better);
  idx.resize(s);
}

Matrix pre_activations(const SaeModel& model, const Matrix& x) {
  if (x.cols() != model.encoder.cols()) throw DimensionError("sae: feature dimension mismatch");
  Matrix pre = x * model.encoder.transpose();
  if (model.use_bias) pre.rowwise() += model.bias.transpose();
  return pre;
}

// Active entries in row-compressed form; row r owns [start[r], start[r + 1]).
struct Selection {
  std::vector<std::size_t> start;
  std::vector<Eigen::Index> index;
  std::vector<double> value;
};

Selection select_active(const SaeModel& model, const Matrix& pre, std::size_t s) {
  const Eigen::Index n = pre.rows(), d1 = pre.cols();
  Selection sel;
  sel.start.reserve(static_cast<std::size_t>(n) + 1);
  sel.start.push_back(0);
  std::vector<std::size_t> idx;
  for (Eigen::Index r = 0; r < n; ++r) {
    if (model.variant == SaeVariant::top_k) {
      select_top(pre.row(r).data(), static_cast<std::size_t>(d1), s, idx);
      std::sort(idx.begin(), idx.end());
      for (std::size_t j : idx) {
        sel.index.push_back(static_cast<Eigen::Index>(j));
        sel.value.push_back(pre(r, static_cast<Eigen::Index>(j)));
      }
    } else {
      for (Eigen::Index j = 0; j < d1; ++j) {
        const double v = pre(r, j) - model.thresholds(j);
        if (v > 0.0) {
          sel.index.push_back(j);
          sel.value.push_back(v);
        }
      }
    }
    sel.start.push_back(sel.index.size());
  }
  return sel;
}

Matrix reconstruct(const Selection& sel, const Matrix& dt, Eigen::Index rows) {
  Matrix out = Matrix::Zero(rows, dt.cols());
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (std::size_t e = sel.start[static_cast<std::size_t>(r)]; e < sel.start[static_cast<std::size_t>(r) + 1]; ++e) {
      out.row(r) += sel.value[e] * dt.row(sel.index[e]);
    }
  }
  return out;
}

std::size_t effective_sparsity(const SaeModel& model, std::size_t s) {
  if (s == 0) s = model.sparsity;
  if (s == 0 || s > model.concept_dim()) throw ConfigError("sae: sparsity must be in [1, d1]");
  return s;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::string to_string(SaeVariant v) { return v == SaeVariant::top_k ? "topk" : "threshold"; }

SaeVariant parse_sae_variant(const std::string& text) {
  if (text == "topk" || text == "top_k" || text == "top-k") return SaeVariant::top_k;
  if (text == "threshold" || text == "jumprelu") return SaeVariant::threshold;
  throw ConfigError("unknown SAE variant '" + text + "'");
}

SparseVector top_k_activation(const Vector& pre, std::size_t s) {
  const auto n = static_cast<std::size_t>(pre.size());
  if (s == 0 || s > n) throw ConfigError("top_k_activation: need 1 <= s <= d1");
  std::vector<std::size_t> idx;
  select_top(pre.data(), n, s, idx);
  std::vector<SparseEntry> entries;
  entries.reserve(s);
  for (std::size_t j : idx) entries.push_back({j, pre(static_cast<Eigen::Index>(j))});
  return SparseVector(n, std::move(entries));
}

void SaeModel::normalize_decoder() {
  for (Eigen::Index j = 0; j < decoder.cols(); ++j) {
    const double norm = decoder.col(j).norm();
    if (norm > 0.0) decoder.col(j) /= norm;
  }
}

void SaeModel::validate() const {
  const auto d1 = encoder.rows(), d2 = encoder.cols();
  if (decoder.rows() != d2 || decoder.cols() != d1 || bias.size() != d1) {
    throw DimensionError("sae: encoder, decoder and bias shapes disagree");
  }
  if (variant == SaeVariant::threshold && thresholds.size() != d1) {
    throw DimensionError("sae: threshold vector has the wrong length");
  }
  if (variant == SaeVariant::top_k && (sparsity == 0 || sparsity > static_cast<std::size_t>(d1))) {
    throw ConfigError("sae: sparsity must be in [1, d1]");
  }
}

SaeOutput sae_forward(const SaeModel& model, const Vector& psi) {
  require_finite(psi, "sae input");
  if (psi.size() != model.encoder.cols()) throw DimensionError("sae: feature dimension mismatch");
  Vector pre = model.encoder * psi;
  if (model.use_bias) pre += model.bias;
  SaeOutput out;
  if (model.variant == SaeVariant::top_k) {
    out.code = top_k_activation(pre, model.sparsity);
  } else {
    std::vector<SparseEntry> entries;
    for (Eigen::Index j = 0; j < pre.size(); ++j) {
      const double v = pre(j) - model.thresholds(j);
      if (v > 0.0) entries.push_back({static_cast<std::size_t>(j), v});
    }
    out.code = SparseVector(static_cast<std::size_t>(pre.size()), std::move(entries));
  }
  out.reconstruction = Vector::Zero(model.decoder.rows());
  for (const auto& e : out.code.entries()) {
    out.reconstruction += e.value * model.decoder.col(static_cast<Eigen::Index>(e.index));
  }
  return out;
}

Matrix sae_encode(const SaeModel& model, const Matrix& x, std::size_t sparsity) {
  const std::size_t s = model.variant == SaeVariant::top_k ? effective_sparsity(model, sparsity) : 0;
  const Selection sel = select_active(model, pre_activations(model, x), s);
  Matrix codes = Matrix::Zero(x.rows(), static_cast<Eigen::Index>(model.concept_dim()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (std::size_t e = sel.start[static_cast<std::size_t>(r)]; e < sel.start[static_cast<std::size_t>(r) + 1]; ++e) {
      codes(r, sel.index[e]) = sel.value[e];
    }
  }
  return codes;
}

Matrix sae_reconstruct(const SaeModel& model, const Matrix& x) {
  const std::size_t s = model.variant == SaeVariant::top_k ? effective_sparsity(model, 0) : 0;
  return reconstruct(select_active(model, pre_activations(model, x), s), model.decoder.transpose(), x.rows());
}

ActivityTracker::ActivityTracker(std::size_t concepts, double threshold, std::uint64_t window)
    : counts_(concepts, 0), threshold_(threshold), window_(window) {}

void ActivityTracker::observe(std::span<const std::uint64_t> batch_counts, std::uint64_t batch_rows) {
  if (batch_counts.size() != counts_.size()) throw DimensionError("tracker: count vector length mismatch");
  for (std::size_t j = 0; j < counts_.size(); ++j) {
    if (batch_counts[j] > batch_rows) throw DataError("tracker: more activations than rows");
    counts_[j] += batch_counts[j];
  }
  samples_ += batch_rows;
  if (window_ == 0) return;
  recent_.emplace_back(std::vector<std::uint64_t>(batch_counts.begin(), batch_counts.end()), batch_rows);
  while (!recent_.empty() && samples_ - recent_.front().second >= window_) {
    const auto& [old, rows] = recent_.front();
    for (std::size_t j = 0; j < counts_.size(); ++j) counts_[j] -= old[j];
    samples_ -= rows;
    recent_.pop_front();
  }
}

void ActivityTracker::observe(const SparseVector& code) {
  if (code.dim() != counts_.size()) throw DimensionError("tracker: code dimension mismatch");
  std::vector<std::uint64_t> single(counts_.size(), 0);
  for (const auto& e : code.entries()) single[e.index] = 1;
  observe(single, 1);
}

Vector ActivityTracker::frequencies() const {
  Vector f = Vector::Zero(static_cast<Eigen::Index>(counts_.size()));
  if (samples_ == 0) return f;
  for (std::size_t j = 0; j < counts_.size(); ++j) {
    f(static_cast<Eigen::Index>(j)) = static_cast<double>(counts_[j]) / static_cast<double>(samples_);
  }
  return f;
}

std::vector<bool> ActivityTracker::dead_mask() const {
  std::vector<bool> dead(counts_.size(), false);
  if (samples_ == 0) return dead;
  const Vector f = frequencies();
  for (std::size_t j = 0; j < dead.size(); ++j) dead[j] = f(static_cast<Eigen::Index>(j)) <= threshold_;
  return dead;
}

double ActivityTracker::dead_fraction() const {
  if (counts_.empty()) return 0.0;
  const auto dead = dead_mask();
  return static_cast<double>(std::count(dead.begin(), dead.end(), true)) / static_cast<double>(dead.size());
}

double ghost_loss(const SaeModel& model, const Matrix& batch, const std::vector<bool>& dead, const Matrix& residual,
                  double ghost_weight) {
  if (dead.size() != model.concept_dim()) throw DimensionError("ghost_loss: dead mask length mismatch");
  Matrix a = batch * model.encoder.transpose();
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    if (!dead[static_cast<std::size_t>(j)]) a.col(j).setZero();
  }
  const Matrix g = residual - a * model.decoder.transpose();
  const double d2 = static_cast<double>(model.feature_dim());
  return ghost_weight * g.rowwise().squaredNorm().mean() / d2;
}

SaeLoss sae_loss_and_grads(const SaeModel& model, const Matrix& batch, const ActivityTracker& tracker,
                           double ghost_weight, const SaeLossOptions& options) {
  model.validate();
  if (batch.rows() == 0) throw DataError("sae: empty batch");
  const std::size_t s = model.variant == SaeVariant::top_k ? effective_sparsity(model, options.sparsity) : 0;
  const Eigen::Index n = batch.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double d2 = static_cast<double>(model.feature_dim());

  const Matrix pre = pre_activations(model, batch);
  Matrix dropped;
  const Matrix* used = &pre;
  if (options.dropout != nullptr) {
    if (options.dropout->rows() != n || options.dropout->cols() != pre.cols()) {
      throw DimensionError("sae: dropout multiplier shape mismatch");
    }
    dropped = pre.cwiseProduct(*options.dropout);
    used = &dropped;
  }
  const Selection sel = select_active(model, *used, s);
  const Matrix dt = model.decoder.transpose();  // d1 x d2, one atom per row
  const Matrix residual = reconstruct(sel, dt, n) - batch;  // psi_hat - psi
  SaeLoss out;
  out.reconstruction = residual.rowwise().squaredNorm().mean();

  const Matrix d_recon = (2.0 * inv_n) * residual;
  const Eigen::Index d1 = pre.cols();
  Matrix grad_dt = Matrix::Zero(d1, batch.cols());
  out.grads.encoder = Matrix::Zero(d1, batch.cols());
  out.grads.bias = Vector::Zero(d1);
  if (model.variant == SaeVariant::threshold) out.grads.thresholds = Vector::Zero(d1);
  out.activations.assign(model.concept_dim(), 0);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (std::size_t e = sel.start[static_cast<std::size_t>(r)]; e < sel.start[static_cast<std::size_t>(r) + 1]; ++e) {
      const Eigen::Index j = sel.index[e];
      ++out.activations[static_cast<std::size_t>(j)];
      grad_dt.row(j) += sel.value[e] * d_recon.row(r);
      double dp = d_recon.row(r).dot(dt.row(j));
      if (model.variant == SaeVariant::threshold) out.grads.thresholds(j) -= dp;
      if (options.dropout != nullptr) dp *= (*options.dropout)(r, j);
      out.grads.encoder.row(j) += dp * batch.row(r);
      out.grads.bias(j) += dp;
    }
  }
  if (!model.use_bias) out.grads.bias.setZero();

  if (ghost_weight > 0.0) {
    const auto dead = tracker.dead_mask();
    if (dead.size() != model.concept_dim()) throw DimensionError("sae: tracker size mismatch");
    std::vector<Eigen::Index> ids;
    for (std::size_t j = 0; j < dead.size(); ++j) {
      if (dead[j]) ids.push_back(static_cast<Eigen::Index>(j));
    }
    if (!ids.empty()) {
      const Matrix enc_dead = model.encoder(ids, Eigen::all);
      const Matrix dec_dead = dt(ids, Eigen::all);
      const Matrix a = batch * enc_dead.transpose();
      const Matrix g = residual - a * dec_dead;
      out.ghost = ghost_weight * g.rowwise().squaredNorm().mean() / d2;
      const Matrix d_tilde = (-2.0 * ghost_weight * inv_n / d2) * g;
      const Matrix g_dec = a.transpose() * d_tilde;
      const Matrix g_enc = (d_tilde * dec_dead.transpose()).transpose() * batch;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        grad_dt.row(ids[i]) += g_dec.row(static_cast<Eigen::Index>(i));
        out.grads.encoder.row(ids[i]) += g_enc.row(static_cast<Eigen::Index>(i));
      }
    }
  }
  out.grads.decoder = grad_dt.transpose();

  if (model.variant == SaeVariant::threshold && options.l0_coefficient > 0.0) {
    out.l0 = options.l0_coefficient * static_cast<double>(sel.index.size()) * inv_n;
    const double eps = options.bandwidth;
    for (Eigen::Index j = 0; j < used->cols(); ++j) {
      std::size_t inside = 0;
      for (Eigen::Index r = 0; r < n; ++r) inside += std::abs((*used)(r, j) - model.thresholds(j)) < 0.5 * eps;
      out.grads.thresholds(j) -= options.l0_coefficient * inv_n * static_cast<double>(inside) / eps;
    }
  }

  out.total = out.reconstruction + out.ghost + out.l0;
  if (!std::isfinite(out.total)) throw NumericError("sae: non-finite loss");
  return out;
}

double selection_margin(const SaeModel& model, const Matrix& batch, std::size_t sparsity) {
  const Matrix pre = pre_activations(model, batch);
  double margin = std::numeric_limits<double>::infinity();
  if (model.variant == SaeVariant::threshold) {
    for (Eigen::Index r = 0; r < pre.rows(); ++r) {
      margin = std::min(margin, (pre.row(r).transpose() - model.thresholds).cwiseAbs().minCoeff());
    }
    return margin;
  }
  const std::size_t s = effective_sparsity(model, sparsity);
  if (s == model.concept_dim()) return margin;
  for (Eigen::Index r = 0; r < pre.rows(); ++r) {
    std::vector<double> v(pre.row(r).data(), pre.row(r).data() + pre.cols());
    std::sort(v.begin(), v.end(), std::greater<>());
    margin = std::min(margin, v[s - 1] - v[s]);
  }
  return margin;
}

void SaeConfig::validate(std::size_t feature_dim) const {
  if (concepts == 0 || feature_dim == 0) throw ConfigError("sae: dimensions must be positive");
  if (variant == SaeVariant::top_k && (sparsity == 0 || sparsity > concepts)) {
    throw ConfigError("sae: d1 must be at least s");
  }
  if (batch_size == 0) throw ConfigError("sae: batch_size must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("sae: dropout must be in [0, 1)");
  if (!(clip_norm > 0.0)) throw ConfigError("sae: clip_norm must be positive");
  if (!(peak_lr > 0.0)) throw ConfigError("sae: peak_lr must be positive");
  if (ghost_weight < 0.0) throw ConfigError("sae: ghost_weight must be nonnegative");
  if (!(dead_threshold >= 0.0 && dead_threshold <= 1.0)) throw ConfigError("sae: dead_threshold must be in [0, 1]");
  if (!(init_scale > 0.0)) throw ConfigError("sae: init_scale must be positive");
  if (!(bandwidth > 0.0)) throw ConfigError("sae: bandwidth must be positive");
  Schedule::warmup_cosine(peak_lr, warmup_steps, horizon, lr_floor).validate();
  if (ramp_steps < 0) throw ConfigError("sae: ramp_steps must be nonnegative");
}

std::size_t scheduled_sparsity(const SaeConfig& config, std::int64_t step) {
  const double k0 = static_cast<double>(std::max(config.initial_sparsity, config.sparsity));
  const double k = schedule_value(Schedule::linear_ramp(k0, static_cast<double>(config.sparsity), config.ramp_steps),
                                  step);
  const auto rounded = static_cast<std::size_t>(std::lround(k));
  return std::clamp(rounded, config.sparsity, config.concepts);
}

SaeModel init_sae(const SaeConfig& config, std::size_t feature_dim, Rng& rng) {
  config.validate(feature_dim);
  const auto d1 = static_cast<Eigen::Index>(config.concepts);
  const auto d2 = static_cast<Eigen::Index>(feature_dim);
  SaeModel model;
  model.encoder = Matrix(d1, d2);
  const double bound = config.init_scale / std::sqrt(static_cast<double>(feature_dim));
  for (Eigen::Index i = 0; i < model.encoder.size(); ++i) model.encoder.data()[i] = rng.uniform(-bound, bound);
  model.decoder = model.encoder.transpose();
  if (config.normalize_decoder) model.normalize_decoder();
  model.bias = Vector::Zero(d1);
  model.use_bias = config.use_bias;
  model.sparsity = config.sparsity;
  model.variant = config.variant;
  if (config.variant == SaeVariant::threshold) model.thresholds = Vector::Constant(d1, config.threshold_init);
  return model;
}

SaeModel train_sae(const SaeConfig& config, const Matrix& data, Rng& rng, std::vector<SaeStepLog>* log) {
  if (data.rows() == 0) throw DataError("train_sae: empty dataset");
  require_finite(data, "train_sae data");
  SaeModel model = init_sae(config, static_cast<std::size_t>(data.cols()), rng);
  const auto d1 = static_cast<Eigen::Index>(config.concepts);
  const auto d2 = data.cols();
  const Schedule lr = Schedule::warmup_cosine(config.peak_lr, config.warmup_steps, config.horizon, config.lr_floor);

  AdamState enc(d1, d2, config.peak_lr), dec(d2, d1, config.peak_lr), bias(d1, 1, config.peak_lr),
      thr(d1, 1, config.peak_lr);
  ActivityTracker tracker(config.concepts, config.dead_threshold, config.activity_window);

  const auto n = static_cast<std::size_t>(data.rows());
  const std::size_t batch = std::min(config.batch_size, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const double keep = 1.0 - config.dropout;
  Matrix dropout_mult;
  Matrix xb(static_cast<Eigen::Index>(batch), d2);

  std::int64_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start + batch <= n; start += batch) {
      if (config.max_steps != 0 && static_cast<std::size_t>(step) >= config.max_steps) return model;
      for (std::size_t i = 0; i < batch; ++i) xb.row(static_cast<Eigen::Index>(i)) = data.row(order[start + i]);

      SaeLossOptions opts;
      opts.sparsity = config.variant == SaeVariant::top_k ? scheduled_sparsity(config, step) : 0;
      opts.l0_coefficient = config.l0_coefficient;
      opts.bandwidth = config.bandwidth;
      if (config.dropout > 0.0) {
        dropout_mult.resize(xb.rows(), d1);
        for (Eigen::Index i = 0; i < dropout_mult.size(); ++i) {
          dropout_mult.data()[i] = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
        }
        opts.dropout = &dropout_mult;
      }
      SaeLoss loss = sae_loss_and_grads(model, xb, tracker, config.ghost_weight, opts);
      tracker.observe(loss.activations, batch);

      Matrix gb = Eigen::Map<const Matrix>(loss.grads.bias.data(), d1, 1);
      Matrix gt = Matrix::Zero(d1, 1);
      if (config.variant == SaeVariant::threshold) gt = Eigen::Map<const Matrix>(loss.grads.thresholds.data(), d1, 1);
      const double norm = clip_gradient_norm({&loss.grads.encoder, &loss.grads.decoder, &gb, &gt}, config.clip_norm);

      const double rate = schedule_value(lr, step);
      enc.learning_rate = dec.learning_rate = bias.learning_rate = thr.learning_rate = rate;
      enc.update(model.encoder, loss.grads.encoder);
      dec.update(model.decoder, loss.grads.decoder);
      if (model.use_bias) bias.update(model.bias, Vector(Eigen::Map<const Vector>(gb.data(), d1)));
      if (config.variant == SaeVariant::threshold) {
        thr.update(model.thresholds, Vector(Eigen::Map<const Vector>(gt.data(), d1)));
      }
      if (config.normalize_decoder) model.normalize_decoder();

      if (log != nullptr) {
        log->push_back({step, rate, opts.sparsity, loss.reconstruction, loss.ghost, tracker.dead_fraction(), norm});
      }
      ++step;
    }
  }
  return model;
}

double dead_feature_fraction(const SaeModel& model, const Matrix& data, double threshold) {
  if (data.rows() == 0) throw DataError("dead_feature_fraction: empty dataset");
  const Matrix codes = sae_encode(model, data);
  std::size_t dead = 0;
  for (Eigen::Index j = 0; j < codes.cols(); ++j) {
    const double freq = static_cast<double>((codes.col(j).array() != 0.0).count()) / static_cast<double>(codes.rows());
    dead += freq <= threshold;
  }
  return static_cast<double>(dead) / static_cast<double>(codes.cols());
}

Vector ConceptMask::mask() const { return (logits.array() > 0.0).cast<double>(); }

std::size_t ConceptMask::active() const { return static_cast<std::size_t>((logits.array() > 0.0).count()); }

Vector ConceptMask::surrogate_gradient() const {
  Vector g(logits.size());
  for (Eigen::Index j = 0; j < logits.size(); ++j) {
    const double s = sigmoid(logits(j) / temperature);
    g(j) = s * (1.0 - s) / temperature;
  }
  return g;
}

Matrix ConceptMask::apply(const Matrix& x) const {
  if (x.cols() != logits.size()) throw DimensionError("mask: dimension mismatch");
  return x * mask().asDiagonal();
}

MaskedHead learn_concept_mask(const Matrix& concepts, std::span<const int> labels, std::size_t classes,
                              const MaskConfig& config) {
  if (config.penalty < 0.0) throw ConfigError("mask: penalty must be nonnegative");
  if (!(config.temperature > 0.0)) throw ConfigError("mask: temperature must be positive");
  if (concepts.rows() == 0) throw DataError("mask: empty neighbourhood");
  const auto d1 = concepts.cols();
  MaskedHead out;
  out.mask.logits = Vector::Constant(d1, config.initial_logit);
  out.mask.temperature = config.temperature;
  out.mask.penalty = config.penalty;
  out.head = LinearHead::zeros(classes, static_cast<std::size_t>(d1));
  AdamState w(out.head.weights.rows(), d1, config.head_learning_rate), b(out.head.bias.size(), 1, config.head_learning_rate),
      theta(d1, 1, config.learning_rate);

  auto evaluate = [&](bool gradients) {
    const Vector m = out.mask.mask();
    const Matrix masked = concepts * m.asDiagonal();
    XentResult x = softmax_xent_grad(out.head, masked, labels, gradients);
    const double loss = x.loss + config.penalty * m.squaredNorm();
    if (gradients) {
      Vector dm = (x.grad_inputs.cwiseProduct(concepts)).colwise().sum().transpose();
      dm += 2.0 * config.penalty * m;
      const Vector dtheta = dm.cwiseProduct(out.mask.surrogate_gradient());
      w.update(out.head.weights, x.grad_weights);
      b.update(out.head.bias, x.grad_bias);
      theta.update(out.mask.logits, dtheta);
    }
    return loss;
  };
  for (std::size_t step = 0; step < config.steps; ++step) evaluate(true);
  out.loss = evaluate(false);
  return out;
}

}  // namespace suplab
