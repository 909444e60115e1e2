#include "suplab/experiment.hpp"

#include "suplab/classifiers.hpp"
#include "suplab/errors.hpp"
#include "suplab/estimators.hpp"
#include "suplab/neighborhood.hpp"
#include "suplab/sae.hpp"
#include "suplab/stats.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#ifndef SUPLAB_VERSION
#define SUPLAB_VERSION "0.0.0"
#endif
#ifndef SUPLAB_GIT_REVISION
#define SUPLAB_GIT_REVISION "unknown"
#endif

namespace suplab {

namespace {

// Stream ids; every generator in a run is Rng(seed, stream) or a split of one.
constexpr std::uint64_t kTrialStream = 0x7471;
constexpr std::uint64_t kDataStream = 0xda7a;
constexpr std::uint64_t kBootstrapStream = 0xb007;
constexpr std::uint64_t kSelectionStream = 0x5e1;

const std::vector<std::pair<ExperimentKind, std::string>>& kind_names() {
  static const std::vector<std::pair<ExperimentKind, std::string>> names = {
      {ExperimentKind::interference, "interference"},
      {ExperimentKind::ttt_rate, "ttt-rate"},
      {ExperimentKind::model_scaling, "model-scaling"},
      {ExperimentKind::data_scaling, "data-scaling"},
      {ExperimentKind::neighborhood_sweep, "neighborhood-sweep"},
      {ExperimentKind::sae_train, "sae-train"},
      {ExperimentKind::sae_mask, "sae-mask"},
      {ExperimentKind::moe_scaling, "moe-scaling"},
      {ExperimentKind::assumption_report, "assumption-report"},
  };
  return names;
}

// Parameter lookup for one grid point: a sweep axis with the same bare name
// shadows "<section>.<name>", which shadows the fallback.
class Params {
 public:
  Params(const ConfigFile& file, const std::map<std::string, double>& axes) : file_(file), axes_(axes) {}

  double num(const std::string& section, const std::string& name, double fallback) const {
    if (auto it = axes_.find(name); it != axes_.end()) return it->second;
    return file_.get_double(section + "." + name, fallback);
  }
  std::size_t size(const std::string& section, const std::string& name, std::size_t fallback) const {
    const double v = num(section, name, static_cast<double>(fallback));
    if (!(v >= 0.0) || v != std::floor(v)) {
      throw ConfigError("'" + section + "." + name + "' must be a non-negative integer");
    }
    return static_cast<std::size_t>(v);
  }
  std::int64_t integer(const std::string& section, const std::string& name, std::int64_t fallback) const {
    const double v = num(section, name, static_cast<double>(fallback));
    if (v != std::floor(v)) throw ConfigError("'" + section + "." + name + "' must be an integer");
    return static_cast<std::int64_t>(v);
  }
  bool flag(const std::string& section, const std::string& name, bool fallback) const {
    if (auto it = axes_.find(name); it != axes_.end()) return it->second != 0.0;
    return file_.get_bool(section + "." + name, fallback);
  }
  std::string str(const std::string& section, const std::string& name, const std::string& fallback) const {
    return file_.get_string(section + "." + name, fallback);
  }
  std::vector<std::size_t> sizes(const std::string& section, const std::string& name,
                                 std::vector<std::size_t> fallback) const {
    return file_.get_sizes(section + "." + name, std::move(fallback));
  }
  const ConfigFile& file() const { return file_; }

 private:
  const ConfigFile& file_;
  const std::map<std::string, double>& axes_;
};

WorldConfig read_world(const Params& p, std::uint64_t seed) {
  WorldConfig w;
  w.concept_dim = p.size("world", "concept_dim", w.concept_dim);
  w.feature_dim = p.size("world", "feature_dim", w.feature_dim);
  w.sparsity = p.size("world", "sparsity", w.sparsity);
  w.law = parse_support_law(p.str("world", "law", to_string(w.law)));
  w.noise_variance = p.num("world", "noise_variance", w.noise_variance);
  w.value_low = p.num("world", "value_low", w.value_low);
  w.value_high = p.num("world", "value_high", w.value_high);
  w.seed = static_cast<std::uint64_t>(p.integer("world", "seed", static_cast<std::int64_t>(seed)));
  if (w.concept_dim == 0 || w.feature_dim == 0 || w.sparsity == 0 || w.sparsity > w.concept_dim) {
    throw ConfigError("world needs 0 < sparsity <= concept_dim and feature_dim > 0");
  }
  if (!(w.value_low > 0.0) || w.value_high < w.value_low || w.noise_variance < 0.0) {
    throw ConfigError("world values need 0 < value_low <= value_high and noise_variance >= 0");
  }
  return w;
}

struct PointContext {
  const ExperimentConfig& config;
  const Params& params;
  const DatasetPair* data;
  std::size_t trials;

  Rng trial_rng(std::size_t trial) const { return Rng(config.seed, kTrialStream).split(trial); }
  Rng data_rng() const { return Rng(config.seed, kDataStream); }
};

using Measurements = std::vector<Measurement>;

// Collects samples by (inner axes, metric) preserving first-insertion order.
class Collector {
 public:
  std::vector<double>& operator()(const std::string& metric, std::vector<double> inner = {}) {
    for (auto& m : items_) {
      if (m.metric == metric && m.extra_axes == inner) return m.samples;
    }
    items_.push_back({std::move(inner), metric, {}});
    return items_.back().samples;
  }
  Measurements take() { return std::move(items_); }

 private:
  Measurements items_;
};

// ---------------------------------------------------------------- interference

Measurements run_interference(const PointContext& ctx) {
  const auto& p = ctx.params;
  const std::size_t d1 = p.size("world", "concept_dim", 128);
  const std::size_t d2 = p.size("world", "feature_dim", 64);
  const bool ttt = p.flag("interference", "ttt", true);
  Collector out;
  for (std::size_t t = 0; t < ctx.trials; ++t) {
    Rng rng = ctx.trial_rng(t);
    const NonLearnableInstance inst = make_nonlearnable_instance(d1, d2, rng);
    const InterferenceResult r = evaluate_interference(inst);
    out("global_error").push_back(r.error);
    out("analytic").push_back(r.analytic);
    if (ttt) {
      double total = 0.0, worst = 0.0;
      for (std::size_t m = 0; m < d1; ++m) {
        const Sample s = inst.cell_sample(m);
        Matrix x(1, static_cast<Eigen::Index>(d2));
        x.row(0) = s.feature.transpose();
        Vector y(1);
        y(0) = s.label;
        const LocalModel local = fit_ttt_sparse(x, y, inst.local_projection(m), 1, SparseSearch::exhaustive);
        const double e = local.predict(s.feature) - s.label;
        total += e * e;
        worst = std::max(worst, e * e);
      }
      out("ttt_error").push_back(total / static_cast<double>(d1));
      out("ttt_error_max").push_back(worst);
    }
  }
  return out.take();
}

// ---------------------------------------------------------------- ttt-rate

Measurements run_ttt_rate(const PointContext& ctx) {
  const auto& p = ctx.params;
  const ConceptWorld world = make_world(read_world(p, ctx.config.seed));
  const auto ks = p.sizes("rate", "ks", {32, 64, 128, 256, 512, 1024});
  const std::size_t local = p.size("rate", "local_sparsity", 4 * world.sparsity());
  const std::string search = p.str("rate", "search", "greedy");
  if (search != "greedy" && search != "exhaustive") throw ConfigError("rate.search must be greedy or exhaustive");
  Rng rng = ctx.trial_rng(0);
  const ErrorReport report = ttt_rate_curve(world, ks, local, ctx.trials, rng,
                                            search == "greedy" ? SparseSearch::greedy : SparseSearch::exhaustive);
  Collector out;
  for (const auto& point : report.curve) out("excess_error", {static_cast<double>(point.k)}) = point.samples;
  return out.take();
}

// ---------------------------------------------------------------- shared classification path

struct LocalEvaluation {
  std::vector<double> global_error, ttt_error, vote_error, gap, neighborhood_acc;
  std::vector<double> fixed_head_global_acc;
};

TttConfig read_ttt(const Params& p) {
  TttConfig c;
  c.neighbors = p.size("ttt", "neighbors", c.neighbors);
  c.steps = p.size("ttt", "steps", c.steps);
  c.learning_rate = p.num("ttt", "learning_rate", c.learning_rate);
  c.weight_decay = p.num("ttt", "weight_decay", c.weight_decay);
  return c;
}

TrainConfig read_train(const Params& p) {
  TrainConfig c;
  c.learning_rate = p.num("train", "learning_rate", c.learning_rate);
  c.batch_size = p.size("train", "batch_size", 128);
  c.epochs = p.size("train", "epochs", 50);
  c.weight_decay = p.num("train", "weight_decay", c.weight_decay);
  return c;
}

Matrix gather_rows(const Matrix& x, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

std::vector<int> gather_labels(std::span<const int> labels, std::span<const std::size_t> rows) {
  std::vector<int> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = labels[rows[i]];
  return out;
}

// Global head, per-point TTT and majority vote on the first `points` test rows.
// `fixed_heads` lists test rows whose TTT heads are also scored on all of them.
LocalEvaluation evaluate_local(const Matrix& train_x, std::span<const int> train_y, const Matrix& test_x,
                               std::span<const int> test_y, const LinearHead& base, const TttConfig& ttt,
                               std::size_t points, const std::set<std::size_t>& fixed_heads,
                               PredictionLog* log = nullptr) {
  if (train_x.rows() == 0) throw DataError("empty training set");
  const BruteForceIndex index(train_x);
  const std::size_t k = std::min<std::size_t>(ttt.neighbors, index.size());
  LocalEvaluation ev;
  std::vector<LinearHead> kept;
  const Matrix evaluated = test_x.topRows(static_cast<Eigen::Index>(points));
  const std::span<const int> evaluated_y = test_y.subspan(0, points);
  for (std::size_t i = 0; i < points; ++i) {
    const Vector q = test_x.row(static_cast<Eigen::Index>(i)).transpose();
    const Neighborhood nb = index.knn(q, k);
    const Matrix nx = gather_rows(train_x, nb.members);
    const std::vector<int> ny = gather_labels(train_y, nb.members);
    const LinearHead local = ttt_finetune(base, nx, ny, ttt);
    const int g = base.predict(q);
    const int t = local.predict(q);
    const int v = majority_vote(ny);
    const int y = test_y[i];
    const double ge = g != y, te = t != y;
    ev.global_error.push_back(ge);
    ev.ttt_error.push_back(te);
    ev.vote_error.push_back(v != y);
    ev.gap.push_back(ge - te);
    ev.neighborhood_acc.push_back(local.accuracy(nx, ny));
    if (fixed_heads.count(i)) ev.fixed_head_global_acc.push_back(local.accuracy(evaluated, evaluated_y));
    if (log) {
      log->point.push_back(i);
      log->global.push_back(g);
      log->ttt.push_back(t);
      log->vote.push_back(v);
      log->label.push_back(y);
    }
  }
  return ev;
}

std::size_t test_points(const Params& p, const DatasetPair& data) {
  const std::size_t n = p.size("eval", "test_points", 0);
  return n == 0 ? data.test.size() : std::min(n, data.test.size());
}

std::set<std::size_t> choose_fixed_heads(const PointContext& ctx, std::size_t points) {
  const std::size_t count = std::min<std::size_t>(ctx.params.size("eval", "fixed_heads", 10), points);
  Rng rng(ctx.config.seed, kSelectionStream);
  const auto picked = rng.sample_without_replacement(points, count);
  return {picked.begin(), picked.end()};
}

void add_local_metrics(Collector& out, const LocalEvaluation& ev) {
  auto append = [&](const std::string& name, const std::vector<double>& v) {
    auto& dst = out(name);
    dst.insert(dst.end(), v.begin(), v.end());
  };
  append("global_error", ev.global_error);
  append("ttt_error", ev.ttt_error);
  append("vote_error", ev.vote_error);
  append("gap", ev.gap);
}

// ---------------------------------------------------------------- model-scaling

Measurements run_model_scaling(const PointContext& ctx) {
  const auto& p = ctx.params;
  const DatasetPair& data = *ctx.data;
  const std::size_t width = p.size("model", "width", 0);
  const TrainConfig train = read_train(p);
  const TttConfig ttt = read_ttt(p);
  const std::size_t points = test_points(p, data);
  const auto fixed = choose_fixed_heads(ctx, points);
  Collector out;
  for (std::size_t t = 0; t < ctx.trials; ++t) {
    Rng rng = ctx.trial_rng(t);
    LocalEvaluation ev;
    if (width == 0) {
      const LinearHead head = train_global_head(data.train.features, data.train.labels, data.train.classes, train, rng);
      ev = evaluate_local(data.train.features, data.train.labels, data.test.features, data.test.labels, head, ttt,
                          points, fixed);
    } else {
      const MlpModel mlp = train_mlp(data.train.features, data.train.labels, data.train.classes, width, train, rng);
      ev = evaluate_local(mlp.features(data.train.features), data.train.labels, mlp.features(data.test.features),
                          data.test.labels, mlp.head, ttt, points, fixed);
    }
    add_local_metrics(out, ev);
    auto& nb = out("ttt_neighborhood_acc");
    nb.insert(nb.end(), ev.neighborhood_acc.begin(), ev.neighborhood_acc.end());
    auto& test_acc = out("ttt_test_acc");
    for (double e : ev.ttt_error) test_acc.push_back(1.0 - e);
    auto& fixed_acc = out("ttt_global_acc");
    fixed_acc.insert(fixed_acc.end(), ev.fixed_head_global_acc.begin(), ev.fixed_head_global_acc.end());
  }
  return out.take();
}

// ---------------------------------------------------------------- data-scaling

Measurements run_data_scaling(const PointContext& ctx) {
  const auto& p = ctx.params;
  const DatasetPair& data = *ctx.data;
  const double fraction = p.num("data_scaling", "fraction", 1.0);
  const TrainConfig train = read_train(p);
  const TttConfig ttt = read_ttt(p);
  const std::size_t points = test_points(p, data);
  Collector out;
  for (std::size_t t = 0; t < ctx.trials; ++t) {
    Rng rng = ctx.trial_rng(t);
    const auto rows = balanced_subsample(data.train.labels, data.train.classes, fraction, rng);
    const LabeledData sub = data.train.subset(rows);
    std::vector<double> counts(data.train.classes, 0.0), totals(data.train.classes, 0.0);
    for (int y : sub.labels) counts[static_cast<std::size_t>(y)] += 1.0;
    for (int y : data.train.labels) totals[static_cast<std::size_t>(y)] += 1.0;
    double deviation = 0.0;
    for (std::size_t c = 0; c < counts.size(); ++c) deviation = std::max(deviation, std::abs(counts[c] - fraction * totals[c]));
    out("train_size").push_back(static_cast<double>(sub.size()));
    out("balance_deviation").push_back(deviation);
    const LinearHead head = train_global_head(sub.features, sub.labels, data.train.classes, train, rng);
    add_local_metrics(out, evaluate_local(sub.features, sub.labels, data.test.features, data.test.labels, head, ttt,
                                          points, {}));
  }
  return out.take();
}

// ---------------------------------------------------------------- neighborhood-sweep

Measurements run_neighborhood_sweep(const PointContext& ctx) {
  const auto& p = ctx.params;
  const ConceptWorld world = make_world(read_world(p, ctx.config.seed));
  const std::size_t k = p.size("neighborhood", "neighbors", 50);
  const std::size_t n = p.size("neighborhood", "dataset_size", 5000);
  const double lambda = p.num("neighborhood", "ridge", 1e-3);
  if (k == 0 || k > n) throw ConfigError("neighbors must be in [1, dataset_size]");
  Collector out;
  for (std::size_t t = 0; t < ctx.trials; ++t) {
    Rng rng = ctx.trial_rng(t);
    const auto data = sample_dataset(world, n, rng);
    const Sample query = sample_point(world, rng);
    const double truth = ground_truth(world, query.phi);
    const Neighborhood nb = knn(query.feature, data, k, Space::feature);
    std::vector<Sample> members;
    members.reserve(k);
    for (auto m : nb.members) members.push_back(data[m]);
    const GlobalModel local = fit_ridge(feature_matrix(members), label_vector(members), lambda);
    const double e = local.predict(query.feature) - truth;
    out("local_error").push_back(e * e);
    double mean_label = 0.0;
    for (const auto& s : members) mean_label += s.label;
    mean_label /= static_cast<double>(k);
    out("knn_error").push_back((mean_label - truth) * (mean_label - truth));
  }
  return out.take();
}

// ---------------------------------------------------------------- sae-train

SaeConfig read_sae(const Params& p, std::size_t concept_dim) {
  SaeConfig c;
  const std::string s = "sae";
  c.concepts = p.size(s, "concepts", concept_dim);
  c.sparsity = p.size(s, "sparsity", c.sparsity);
  c.variant = parse_sae_variant(p.str(s, "variant", to_string(c.variant)));
  c.use_bias = p.flag(s, "use_bias", c.use_bias);
  c.normalize_decoder = p.flag(s, "normalize_decoder", c.normalize_decoder);
  c.batch_size = p.size(s, "batch_size", c.batch_size);
  c.epochs = p.size(s, "epochs", c.epochs);
  c.max_steps = p.size(s, "steps", c.max_steps);
  c.peak_lr = p.num(s, "peak_lr", c.peak_lr);
  c.warmup_steps = p.integer(s, "warmup_steps", c.warmup_steps);
  c.horizon = p.integer(s, "horizon", c.horizon);
  c.lr_floor = p.num(s, "lr_floor", c.lr_floor);
  c.initial_sparsity = p.size(s, "initial_sparsity", c.initial_sparsity);
  c.ramp_steps = p.integer(s, "ramp_steps", c.ramp_steps);
  c.dropout = p.num(s, "dropout", c.dropout);
  c.clip_norm = p.num(s, "clip_norm", c.clip_norm);
  c.ghost_weight = p.num(s, "ghost_weight", c.ghost_weight);
  c.dead_threshold = p.num(s, "dead_threshold", c.dead_threshold);
  c.activity_window = p.size(s, "activity_window", 0);
  c.init_scale = p.num(s, "init_scale", c.init_scale);
  c.threshold_init = p.num(s, "threshold_init", c.threshold_init);
  c.l0_coefficient = p.num(s, "l0_coefficient", c.l0_coefficient);
  c.bandwidth = p.num(s, "bandwidth", c.bandwidth);
  return c;
}

Matrix random_orthogonal(std::size_t d, Rng& rng) {
  Matrix g(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  return qr.householderQ();
}

// Per-atom best signed cosine between each true atom (columns of `truth`) and
// the decoder columns.
std::vector<double> atom_recovery(const SaeModel& model, const Matrix& truth) {
  Matrix dec = model.decoder;
  for (Eigen::Index j = 0; j < dec.cols(); ++j) {
    const double n = dec.col(j).norm();
    if (n > 0.0) dec.col(j) /= n;
  }
  std::vector<double> best(static_cast<std::size_t>(truth.cols()), -1.0);
  for (Eigen::Index a = 0; a < truth.cols(); ++a) {
    const double n = truth.col(a).norm();
    if (n == 0.0) continue;
    const Vector cos = dec.transpose() * (truth.col(a) / n);
    best[static_cast<std::size_t>(a)] = cos.maxCoeff();
  }
  return best;
}

Measurements run_sae_train(const PointContext& ctx) {
  const auto& p = ctx.params;
  const WorldConfig wc = read_world(p, ctx.config.seed);
  const std::size_t n = p.size("sae", "dataset_size", 20000);
  const std::string planted = p.str("sae", "planted", "world");
  if (planted != "world" && planted != "orthogonal") throw ConfigError("sae.planted must be world or orthogonal");
  const SaeConfig sc = read_sae(p, wc.concept_dim);
  Collector out;
  for (std::size_t t = 0; t < ctx.trials; ++t) {
    Rng rng = ctx.trial_rng(t);
    Matrix x, truth;
    if (planted == "orthogonal") {
      if (wc.feature_dim != wc.concept_dim) throw ConfigError("an orthogonal dictionary needs feature_dim == concept_dim");
      truth = random_orthogonal(wc.concept_dim, rng);
      x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(wc.feature_dim));
      for (std::size_t i = 0; i < n; ++i) {
        Vector row = Vector::Zero(static_cast<Eigen::Index>(wc.feature_dim));
        for (auto m : rng.sample_without_replacement(wc.concept_dim, wc.sparsity)) {
          row += rng.uniform(wc.value_low, wc.value_high) * truth.col(static_cast<Eigen::Index>(m));
        }
        x.row(static_cast<Eigen::Index>(i)) = row.transpose();
      }
    } else {
      WorldConfig trial_world = wc;
      trial_world.seed = wc.seed + t;
      const ConceptWorld world = make_world(trial_world);
      truth = world.projection;
      x = feature_matrix(sample_dataset(world, n, rng));
    }
    Rng train_rng = rng.split(1);
    std::vector<SaeStepLog> log;
    const SaeModel model = train_sae(sc, x, train_rng, &log);
    out("dead_fraction").push_back(dead_feature_fraction(model, x, sc.dead_threshold));
    const Matrix recon = sae_reconstruct(model, x);
    out("reconstruction").push_back((recon - x).squaredNorm() / static_cast<double>(x.rows()));
    const auto rec = atom_recovery(model, truth);
    out("atom_recovery_min").push_back(*std::min_element(rec.begin(), rec.end()));
    out("atom_recovery_mean").push_back(std::accumulate(rec.begin(), rec.end(), 0.0) / static_cast<double>(rec.size()));
  }
  return out.take();
}

// ---------------------------------------------------------------- sae-mask

Measurements run_sae_mask(const PointContext& ctx) {
  const auto& p = ctx.params;
  const ConceptWorld world = make_world(read_world(p, ctx.config.seed));
  const std::size_t n = p.size("mask", "dataset_size", 5000);
  const std::size_t k = p.size("mask", "neighbors", 50);
  MaskConfig mc;
  mc.penalty = p.num("mask", "penalty", mc.penalty);
  mc.temperature = p.num("mask", "temperature", mc.temperature);
  mc.steps = p.size("mask", "steps", mc.steps);
  mc.learning_rate = p.num("mask", "learning_rate", mc.learning_rate);
  mc.head_learning_rate = p.num("mask", "head_learning_rate", mc.head_learning_rate);
  mc.initial_logit = p.num("mask", "initial_logit", mc.initial_logit);
  TttConfig plain_cfg;
  plain_cfg.steps = mc.steps;
  plain_cfg.learning_rate = mc.head_learning_rate;

  auto label = [&](const Sample& s) { return ground_truth(world, s.phi) > 0.0 ? 1 : 0; };
  auto local_set = [&](const std::vector<Sample>& data, const Vector& query, std::set<std::size_t>* active) {
    const Neighborhood nb = knn(query, data, k, Space::feature);
    std::vector<Sample> members;
    std::vector<int> y;
    for (auto m : nb.members) {
      members.push_back(data[m]);
      y.push_back(label(data[m]));
      if (active) {
        for (const auto& e : data[m].phi.entries()) active->insert(e.index);
      }
    }
    return std::pair{concept_matrix(members), y};
  };

  Rng data_rng = ctx.data_rng();
  const auto data = sample_dataset(world, n, data_rng);
  Collector out;
  for (std::size_t t = 0; t < ctx.trials; ++t) {
    Rng rng = ctx.trial_rng(t);
    const Sample query = sample_point(world, rng);
    std::set<std::size_t> active;
    const auto [concepts, y] = local_set(data, query.feature, &active);
    const MaskedHead masked = learn_concept_mask(concepts, y, 2, mc);
    const LinearHead plain = ttt_finetune(LinearHead::zeros(2, world.concept_dim()), concepts, y, plain_cfg);
    const auto held_data = sample_dataset(world, n, rng);
    const auto [held, held_y] = local_set(held_data, query.feature, nullptr);
    const double size = static_cast<double>(masked.mask.active());
    const double acc_masked = masked.head.accuracy(masked.mask.apply(held), held_y);
    const double acc_plain = plain.accuracy(held, held_y);
    out("mask_size").push_back(size);
    out("union_size").push_back(static_cast<double>(active.size()));
    out("mask_ratio").push_back(size / static_cast<double>(active.size()));
    out("masked_accuracy").push_back(acc_masked);
    out("plain_accuracy").push_back(acc_plain);
    out("accuracy_gap").push_back(acc_plain - acc_masked);
  }
  return out.take();
}

// ---------------------------------------------------------------- moe-scaling

struct MoeRow {
  std::size_t experts;
  double learning_rate;
  std::size_t epochs;
  std::size_t neighbors;
};

// Expert fine-tuning hyperparameters per expert count; epochs are full-batch steps.
constexpr MoeRow kMoeTable[] = {
    {1, 6e-4, 2, 60},      {3, 2e-4, 1, 50},      {10, 6e-4, 2, 30},    {30, 1e-3, 1, 60},
    {100, 8e-4, 2, 30},    {300, 4e-4, 3, 40},    {1000, 6e-4, 10, 30}, {3000, 4e-4, 30, 20},
    {10000, 6e-4, 20, 30}, {20000, 4e-4, 50, 30}, {50000, 4e-4, 40, 20},
};

const MoeRow& moe_row(std::size_t experts) {
  const MoeRow* best = &kMoeTable[0];
  double best_d = INFINITY;
  for (const auto& row : kMoeTable) {
    const double d = std::abs(std::log(static_cast<double>(row.experts)) - std::log(static_cast<double>(experts)));
    if (d < best_d) {
      best_d = d;
      best = &row;
    }
  }
  return *best;
}

Measurements run_moe_scaling(const PointContext& ctx) {
  const auto& p = ctx.params;
  const DatasetPair& data = *ctx.data;
  const std::size_t experts = p.size("moe", "experts", 10);
  const TrainConfig train = read_train(p);
  const std::size_t points = test_points(p, data);
  Collector out;
  for (std::size_t t = 0; t < ctx.trials; ++t) {
    Rng rng = ctx.trial_rng(t);
    const LinearHead base = train_global_head(data.train.features, data.train.labels, data.train.classes, train, rng);
    auto& acc = out("accuracy");
    if (experts == 0) {
      const auto ev = evaluate_local(data.train.features, data.train.labels, data.test.features, data.test.labels,
                                     base, read_ttt(p), points, {});
      for (double e : ev.ttt_error) acc.push_back(1.0 - e);
      continue;
    }
    if (experts > data.train.size()) throw ConfigError("more experts than training points");
    const MoeRow& row = moe_row(experts);
    MoeConfig mc;
    mc.expert.neighbors = p.size("moe", "neighbors", row.neighbors);
    mc.expert.steps = p.size("moe", "steps", row.epochs);
    mc.expert.learning_rate = p.num("moe", "learning_rate", row.learning_rate);
    mc.kmeans_iterations = p.size("moe", "kmeans_iterations", mc.kmeans_iterations);
    Rng moe_rng = rng.split(1);
    const MoeModel moe = train_moe(data.train.features, data.train.labels, experts, base, mc, moe_rng);
    for (std::size_t i = 0; i < points; ++i) {
      const Vector q = data.test.features.row(static_cast<Eigen::Index>(i)).transpose();
      acc.push_back(route_and_predict(moe, q) == data.test.labels[i] ? 1.0 : 0.0);
    }
  }
  return out.take();
}

// ---------------------------------------------------------------- assumption-report

Measurements run_assumption_report(const PointContext& ctx) {
  const auto& p = ctx.params;
  const ConceptWorld world = make_world(read_world(p, ctx.config.seed));
  const std::size_t n = p.size("report", "dataset_size", 5000);
  const std::size_t k = p.size("report", "neighbors", 50);
  const std::size_t local = p.size("report", "local_sparsity", world.sparsity());
  const std::size_t draws = p.size("report", "noise_draws", 200);
  const std::string design = p.str("report", "design", "knn");
  const bool full = p.flag("report", "full", true);
  if (design != "knn" && design != "pool") throw ConfigError("report.design must be knn or pool");
  if (k == 0 || k > n) throw ConfigError("neighbors must be in [1, dataset_size]");
  const double bound = 4.0 * std::sqrt(std::log(static_cast<double>(n)) / static_cast<double>(world.feature_dim()));

  Rng data_rng = ctx.data_rng();
  const auto data = sample_dataset(world, n, data_rng);
  Collector out;
  for (std::size_t t = 0; t < ctx.trials; ++t) {
    Rng rng = ctx.trial_rng(t);
    const Sample query = sample_point(world, rng);
    std::vector<Sample> members;
    if (design == "knn") {
      const Neighborhood nb = knn(query.feature, data, k, Space::feature);
      const GeometryReport geo = neighbor_geometry(query, data, nb);
      out("eta_ang").push_back(geo.eta_ang);
      out("within_bound").push_back(geo.eta_ang <= bound ? 1.0 : 0.0);
      for (auto m : nb.members) members.push_back(data[m]);
      if (full) {
        const double radius = 1.0 - nb.similarities.back();
        const AssumptionReport rep = check_assumptions(world, data, query, radius, local, 1e-10, 100, ctx.config.seed + t);
        out("eta_spa").push_back(rep.eta_spa);
        out("eta_rep").push_back(rep.eta_rep);
        out("kappa").push_back(rep.kappa);
        out("active_concepts").push_back(static_cast<double>(rep.active_concepts.size()));
      }
    } else {
      // i.i.d. draws from the query's own pool: a fixed local design law.
      for (std::size_t i = 0; i < k; ++i) members.push_back(sample_point(world, rng, query.cell));
    }
    Rng noise = rng.split(2);
    const GeometryReport conc = concentration_diagnostics(concept_matrix(members), world, local, draws, noise);
    out("dual_norm_p95").push_back(conc.dual_norm_p95);
  }
  return out.take();
}

Measurements run_point(const PointContext& ctx) {
  switch (ctx.config.kind) {
    case ExperimentKind::interference: return run_interference(ctx);
    case ExperimentKind::ttt_rate: return run_ttt_rate(ctx);
    case ExperimentKind::model_scaling: return run_model_scaling(ctx);
    case ExperimentKind::data_scaling: return run_data_scaling(ctx);
    case ExperimentKind::neighborhood_sweep: return run_neighborhood_sweep(ctx);
    case ExperimentKind::sae_train: return run_sae_train(ctx);
    case ExperimentKind::sae_mask: return run_sae_mask(ctx);
    case ExperimentKind::moe_scaling: return run_moe_scaling(ctx);
    case ExperimentKind::assumption_report: return run_assumption_report(ctx);
  }
  throw ConfigError("unknown experiment kind");
}

// FNV-1a over the row's coordinates, so a row's bootstrap stream does not
// depend on where its point sits in the grid.
std::uint64_t row_key(const std::vector<double>& axes, const std::string& metric) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  for (double v : axes) mix(format_double(v));
  mix(metric);
  return h;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& text, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) {
    throw DataError("result CSV line " + std::to_string(line) + ": bad number '" + text + "'");
  }
  return v;
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  for (const auto& [k, name] : kind_names()) {
    if (k == kind) return name;
  }
  return "unknown";
}

ExperimentKind parse_experiment_kind(const std::string& text) {
  for (const auto& [k, name] : kind_names()) {
    if (name == text) return k;
  }
  throw ConfigError("unknown experiment kind '" + text + "'");
}

bool uses_dataset(ExperimentKind kind) {
  return kind == ExperimentKind::model_scaling || kind == ExperimentKind::data_scaling ||
         kind == ExperimentKind::moe_scaling;
}

std::vector<std::string> inner_axes(ExperimentKind kind) {
  if (kind == ExperimentKind::ttt_rate) return {"k"};
  return {};
}

ExperimentConfig ExperimentConfig::from_file(const ConfigFile& file, std::optional<std::uint64_t> seed_override) {
  ExperimentConfig c;
  c.params = file;
  c.kind = parse_experiment_kind(file.get_string("kind"));
  c.name = file.get_string("name", to_string(c.kind));
  if (seed_override) {
    c.seed = *seed_override;
    if (file.has("seed")) file.mark_used("seed");
  } else if (file.has("seed")) {
    c.seed = file.get_uint("seed");
  } else {
    throw ConfigError("experiment needs a seed (config key 'seed' or --seed)");
  }
  c.trials = static_cast<std::size_t>(file.get_uint("trials", 0));
  c.threads = static_cast<std::size_t>(file.get_uint("threads", 1));
  c.output_dir = file.get_string("output_dir", "results");
  for (const auto& [key, value] : file.values()) {
    if (key.rfind("sweep.", 0) == 0) c.axes.push_back({key.substr(6), file.get_doubles(key)});
  }
  c.params.merge_usage(file);
  const std::map<std::string, double> none;
  if (!uses_dataset(c.kind)) c.world = read_world(Params(c.params, none), c.seed);
  file.merge_usage(c.params);
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override) {
  return from_file(ConfigFile::load(path), seed_override);
}

std::size_t ExperimentConfig::grid_size() const {
  std::size_t n = 1;
  for (const auto& a : axes) n *= a.values.size();
  return n;
}

std::vector<double> ExperimentConfig::grid_point(std::size_t index) const {
  std::vector<double> v(axes.size());
  for (std::size_t i = axes.size(); i-- > 0;) {
    const auto& values = axes[i].values;
    v[i] = values[index % values.size()];
    index /= values.size();
  }
  return v;
}

std::size_t ExperimentConfig::effective_trials() const {
  if (trials > 0) return trials;
  switch (kind) {
    case ExperimentKind::interference:
    case ExperimentKind::ttt_rate:
    case ExperimentKind::neighborhood_sweep:
    case ExperimentKind::assumption_report: return 200;
    default: return 50;
  }
}

void ExperimentConfig::validate() const {
  if (threads == 0) throw ConfigError("threads must be at least 1");
  std::set<std::string> names;
  for (const auto& a : axes) {
    if (a.values.empty()) throw ConfigError("sweep axis '" + a.name + "' has no values");
    if (!names.insert(a.name).second) throw ConfigError("duplicate sweep axis '" + a.name + "'");
    for (double v : a.values) {
      if (!std::isfinite(v)) throw ConfigError("sweep axis '" + a.name + "' has a non-finite value");
    }
  }
  for (const auto& inner : inner_axes(kind)) {
    if (names.count(inner)) throw ConfigError("sweep axis '" + inner + "' clashes with an output column");
  }
}

std::vector<const ResultRow*> ExperimentResult::find(const std::string& metric) const {
  std::vector<const ResultRow*> out;
  for (const auto& r : rows) {
    if (r.metric == metric) out.push_back(&r);
  }
  return out;
}

const ResultRow* ExperimentResult::find(const std::string& metric, std::span<const double> axes) const {
  for (const auto& r : rows) {
    if (r.metric == metric && std::equal(r.axes.begin(), r.axes.end(), axes.begin(), axes.end())) return &r;
  }
  return nullptr;
}

std::size_t ExperimentResult::axis_index(const std::string& name) const {
  for (std::size_t i = 0; i < axis_names.size(); ++i) {
    if (axis_names[i] == name) return i;
  }
  throw ConfigError("result has no axis '" + name + "'");
}

double loglog_slope(const ExperimentResult& result, const std::string& metric, const std::string& axis) {
  const std::size_t a = result.axis_index(axis);
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const ResultRow* r : result.find(metric)) {
    if (!(r->axes[a] > 0.0) || !(r->mean > 0.0)) throw DataError("log-log slope needs positive values");
    const double x = std::log(r->axes[a]), y = std::log(r->mean);
    n += 1;
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  if (n < 2) throw DataError("log-log slope needs at least two rows of '" + metric + "'");
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const std::size_t points = config.grid_size();
  const std::size_t trials = config.effective_trials();

  std::optional<DatasetPair> data;
  if (uses_dataset(config.kind)) data = load_dataset(config.params);

  struct Slot {
    Measurements measurements;
    std::optional<PointFailure> failure;
    ConfigFile params;
  };
  std::vector<Slot> slots(points);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < points; i = next++) {
      Slot& slot = slots[i];
      slot.params = config.params;
      const std::vector<double> values = config.grid_point(i);
      std::map<std::string, double> axes;
      for (std::size_t a = 0; a < values.size(); ++a) axes[config.axes[a].name] = values[a];
      try {
        const Params params(slot.params, axes);
        const PointContext ctx{config, params, data ? &*data : nullptr, trials};
        slot.measurements = run_point(ctx);
      } catch (const Error& e) {
        slot.failure = PointFailure{i, values, e.exit_code(), e.what()};
      } catch (const std::exception& e) {
        slot.failure = PointFailure{i, values, 4, e.what()};
      }
    }
  };
  const std::size_t n_threads = std::min(config.threads, std::max<std::size_t>(points, 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  ExperimentResult result;
  result.experiment = config.name;
  for (const auto& a : config.axes) result.axis_names.push_back(a.name);
  for (const auto& inner : inner_axes(config.kind)) result.axis_names.push_back(inner);
  const Rng bootstrap(config.seed, kBootstrapStream);
  for (std::size_t i = 0; i < points; ++i) {
    Slot& slot = slots[i];
    config.params.merge_usage(slot.params);
    if (slot.failure) {
      result.failures.push_back(*slot.failure);
      continue;
    }
    const std::vector<double> values = config.grid_point(i);
    for (const auto& m : slot.measurements) {
      if (m.samples.empty()) continue;
      ResultRow row;
      row.axes = values;
      row.axes.insert(row.axes.end(), m.extra_axes.begin(), m.extra_axes.end());
      row.metric = m.metric;
      row.mean = mean(m.samples);
      Rng rng = bootstrap.split(row_key(row.axes, row.metric));
      const Interval ci = bootstrap_ci(m.samples, kDefaultResamples, kDefaultLevel, rng);
      row.ci_low = ci.low;
      row.ci_high = ci.high;
      row.n = m.samples.size();
      result.rows.push_back(std::move(row));
    }
  }
  result.provenance.seed = config.seed;
  result.provenance.version = version_string();
  result.provenance.timestamp = utc_timestamp();
  result.provenance.config_source = config.params.source();
  result.provenance.threads = config.threads;
  result.provenance.trials = trials;
  return result;
}

void write_result_csv(std::ostream& out, const ExperimentResult& result) {
  out << "experiment";
  for (const auto& a : result.axis_names) out << ',' << a;
  out << ",metric,mean,ci_low,ci_high,n,seed\n";
  for (const auto& r : result.rows) {
    out << result.experiment;
    for (double v : r.axes) out << ',' << format_double(v);
    out << ',' << r.metric << ',' << format_double(r.mean) << ',' << format_double(r.ci_low) << ','
        << format_double(r.ci_high) << ',' << r.n << ',' << result.provenance.seed << '\n';
  }
}

std::string result_csv(const ExperimentResult& result) {
  std::ostringstream out;
  write_result_csv(out, result);
  return out.str();
}

ExperimentResult parse_result_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("result CSV is empty");
  const auto header = split_csv_line(line);
  const std::size_t cols = header.size();
  if (cols < 7 || header.front() != "experiment" || header[cols - 6] != "metric" || header[cols - 1] != "seed") {
    throw DataError("result CSV header must be experiment,<axes>,metric,mean,ci_low,ci_high,n,seed");
  }
  ExperimentResult result;
  result.axis_names.assign(header.begin() + 1, header.end() - 6);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != cols) {
      throw DataError("result CSV line " + std::to_string(line_no) + ": expected " + std::to_string(cols) +
                      " columns, got " + std::to_string(cells.size()));
    }
    result.experiment = cells[0];
    ResultRow row;
    for (std::size_t a = 0; a < result.axis_names.size(); ++a) row.axes.push_back(parse_number(cells[1 + a], line_no));
    row.metric = cells[cols - 6];
    row.mean = parse_number(cells[cols - 5], line_no);
    row.ci_low = parse_number(cells[cols - 4], line_no);
    row.ci_high = parse_number(cells[cols - 3], line_no);
    row.n = static_cast<std::size_t>(parse_number(cells[cols - 2], line_no));
    result.provenance.seed = static_cast<std::uint64_t>(std::stoull(cells[cols - 1]));
    result.rows.push_back(std::move(row));
  }
  return result;
}

ExperimentResult read_result_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_result_csv(buf.str());
}

std::string provenance_json(const ExperimentResult& result) {
  nlohmann::ordered_json j;
  j["experiment"] = result.experiment;
  j["seed"] = result.provenance.seed;
  j["version"] = result.provenance.version;
  j["timestamp"] = result.provenance.timestamp;
  j["config"] = result.provenance.config_source;
  j["threads"] = result.provenance.threads;
  j["trials"] = result.provenance.trials;
  j["axes"] = result.axis_names;
  j["failures"] = nlohmann::ordered_json::array();
  for (const auto& f : result.failures) {
    j["failures"].push_back({{"point", f.point}, {"axes", f.axes}, {"exit_code", f.exit_code}, {"message", f.message}});
  }
  return j.dump(2) + "\n";
}

void write_result_files(const std::filesystem::path& dir, const ExperimentResult& result) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
  write_text(dir / (result.experiment + ".csv"), result_csv(result));
  write_text(dir / (result.experiment + ".provenance.json"), provenance_json(result));
}

std::vector<std::size_t> balanced_subsample(std::span<const int> labels, std::size_t classes, double fraction,
                                            Rng& rng) {
  if (!(fraction > 0.0) || fraction > 1.0) throw ConfigError("subsample fraction must be in (0, 1]");
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw DataError("label " + std::to_string(labels[i]) + " outside [0, " + std::to_string(classes) + ")");
    }
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  // Floor of each share, then the leftover units to the largest remainders.
  const auto total = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(labels.size())));
  std::vector<std::size_t> quota(classes);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    const double share = fraction * static_cast<double>(by_class[c].size());
    quota[c] = static_cast<std::size_t>(std::floor(share));
    assigned += quota[c];
    remainders.emplace_back(-(share - std::floor(share)), c);
  }
  std::sort(remainders.begin(), remainders.end());
  for (std::size_t r = 0; assigned < total && r < remainders.size(); ++r) {
    const std::size_t c = remainders[r].second;
    if (quota[c] < by_class[c].size() && remainders[r].first < 0.0) {
      ++quota[c];
      ++assigned;
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < classes; ++c) {
    for (auto j : rng.sample_without_replacement(by_class[c].size(), quota[c])) out.push_back(by_class[c][j]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

LabeledData first_rows(const LabeledData& d, std::size_t n) {
  if (n == 0 || n >= d.size()) return d;
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  return d.subset(rows);
}

std::filesystem::path resolve_data_path(const std::string& text) {
  std::filesystem::path p(text);
  if (p.is_relative() && !std::filesystem::exists(p)) {
    if (const char* root = std::getenv("SUPLAB_DATA_DIR"); root && *root) return std::filesystem::path(root) / p;
  }
  return p;
}

LabeledData embeddings_dataset(const std::filesystem::path& path) {
  Embeddings e = load_embeddings(path);
  if (!e.labels) throw DataError(path.string() + ": embeddings need a label column");
  LabeledData d;
  d.features = std::move(e.values);
  d.labels = std::move(*e.labels);
  for (int y : d.labels) {
    if (y < 0) throw DataError(path.string() + ": negative label");
    d.classes = std::max(d.classes, static_cast<std::size_t>(y) + 1);
  }
  return d;
}

}  // namespace

DatasetPair load_dataset(const ConfigFile& params) {
  const std::string source = params.get_string("data.source", "mnist");
  DatasetPair out;
  if (source == "mnist") {
    std::optional<std::filesystem::path> dir;
    if (params.has("data.dir")) {
      dir = resolve_data_path(params.get_string("data.dir"));
    } else {
      dir = find_mnist_directory();
    }
    if (!dir) throw DataError("no MNIST directory found; set SUPLAB_DATA_DIR or data.dir");
    MnistData m = load_mnist(*dir);
    out.train = std::move(m.train);
    out.test = std::move(m.test);
    out.description = "mnist:" + dir->string();
  } else if (source == "embeddings") {
    out.train = embeddings_dataset(resolve_data_path(params.get_string("data.train")));
    out.test = embeddings_dataset(resolve_data_path(params.get_string("data.test")));
    if (out.train.features.cols() != out.test.features.cols()) {
      throw DataError("train and test embeddings differ in dimension");
    }
    const std::size_t classes = std::max(out.train.classes, out.test.classes);
    out.train.classes = out.test.classes = classes;
    out.description = "embeddings";
  } else {
    throw ConfigError("data.source must be mnist or embeddings");
  }
  out.train = first_rows(out.train, static_cast<std::size_t>(params.get_uint("data.train_size", 0)));
  out.test = first_rows(out.test, static_cast<std::size_t>(params.get_uint("data.test_size", 0)));
  if (out.train.size() == 0 || out.test.size() == 0) throw DataError("dataset split is empty");
  return out;
}

PredictionLog classify_points(const DatasetPair& data, const ConfigFile& params, std::uint64_t seed) {
  const std::map<std::string, double> none;
  const Params p(params, none);
  Rng rng = Rng(seed, kTrialStream).split(0);
  const LinearHead head = train_global_head(data.train.features, data.train.labels, data.train.classes, read_train(p), rng);
  PredictionLog log;
  evaluate_local(data.train.features, data.train.labels, data.test.features, data.test.labels, head, read_ttt(p),
                 test_points(p, data), {}, &log);
  return log;
}

void write_prediction_csv(std::ostream& out, const PredictionLog& log) {
  out << "point,global,ttt,vote,label\n";
  for (std::size_t i = 0; i < log.point.size(); ++i) {
    out << log.point[i] << ',' << log.global[i] << ',' << log.ttt[i] << ',' << log.vote[i] << ',' << log.label[i] << '\n';
  }
}

SaeConfig read_sae_config(const ConfigFile& params, std::size_t default_concepts) {
  const std::map<std::string, double> none;
  return read_sae(Params(params, none), default_concepts);
}

std::string version_string() { return std::string(SUPLAB_VERSION) + "+" + SUPLAB_GIT_REVISION; }

}  // namespace suplab
