// Acceptance run: one PASS/FAIL line per criterion. Exit status is 0 once all
// criteria have been evaluated; --strict makes any FAIL exit 1.

#include "suplab/classifiers.hpp"
#include "suplab/errors.hpp"
#include "suplab/experiment.hpp"
#include "suplab/numeric.hpp"
#include "suplab/plot.hpp"
#include "suplab/sae.hpp"
#include "suplab/stats.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <limits>
#include <algorithm>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace suplab;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

ExperimentResult run(const std::string& text, std::optional<std::uint64_t> seed = {}) {
  return run_experiment(ExperimentConfig::from_file(ConfigFile::parse(text, "<acceptance>"), seed));
}

const ResultRow& row(const ExperimentResult& r, const std::string& metric, std::vector<double> axes = {}) {
  const ResultRow* p = r.find(metric, axes);
  if (!p) throw DataError("missing row " + metric + " in " + r.experiment);
  return *p;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("error: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("criterion %d %s | %s | %s | %.1fs\n", id, o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(),
              seconds_since(t0));
  std::fflush(stdout);
}

// ------------------------------------------------------------ 1 and 2

const char* kInterference = R"(
kind = "interference"
seed = 101
trials = 200
[world]
concept_dim = 128
[sweep]
feature_dim = [16, 32, 64, 96]
)";

std::optional<ExperimentResult> interference;
double interference_seconds = 0.0;

const ExperimentResult& interference_result() {
  if (!interference) {
    const auto t0 = Clock::now();
    interference = run(kInterference);
    interference_seconds = seconds_since(t0);
  }
  return *interference;
}

Outcome interference_law() {
  const auto& r = interference_result();
  bool ok = r.failures.empty() && interference_seconds < 60.0;
  std::string d;
  for (double d2 : {16.0, 32.0, 64.0, 96.0}) {
    const double m = row(r, "global_error", {d2}).mean;
    const double expected = 1.0 - d2 / 128.0;
    ok = ok && std::abs(m - expected) <= 0.02;
    d += "d2=" + fmt("%g", d2) + ": " + fmt("%.4f", m) + " vs " + fmt("%.3f", expected) + "; ";
  }
  return {ok, d + "grid " + fmt("%.1f", interference_seconds) + "s (limit 60s)"};
}

Outcome ttt_separation() {
  const auto& r = interference_result();
  bool ok = r.failures.empty();
  double worst_bound = 0.0;
  std::string d;
  for (double d2 : {16.0, 32.0, 64.0, 96.0}) {
    // mean * n bounds the largest per-trial maximum from above.
    const ResultRow& mx = row(r, "ttt_error_max", {d2});
    const double bound = mx.mean * static_cast<double>(mx.n);
    worst_bound = std::max(worst_bound, bound);
    const double g = row(r, "global_error", {d2}).mean;
    ok = ok && bound < 1e-16 && std::abs(g - (1.0 - d2 / 128.0)) <= 0.02;
  }
  d = "max per-cell TTT squared error <= " + fmt("%.3g", worst_bound) + " (limit 1e-16); global errors as criterion 1";
  return {ok, d};
}

// ------------------------------------------------------------ 3

Outcome sparse_rate() {
  const auto t0 = Clock::now();
  const auto r = run(R"(
kind = "ttt-rate"
seed = 7
trials = 500
[world]
concept_dim = 256
feature_dim = 64
sparsity = 4
law = "clustered"
noise_variance = 0.25
[rate]
ks = [32, 64, 128, 256, 512, 1024]
local_sparsity = 16
search = "greedy"
)");
  const double t = seconds_since(t0);
  const double slope = loglog_slope(r, "excess_error", "k");
  const bool ok = r.failures.empty() && slope >= -1.3 && slope <= -0.7 && t < 600.0;
  return {ok, "log-log slope " + fmt("%.3f", slope) + " (accept [-1.3, -0.7]), 500 trials per k, " + fmt("%.0f", t) +
                  "s (limit 600s)"};
}

// ------------------------------------------------------------ 4

Outcome neighborhood_geometry() {
  const auto r = run(R"(
kind = "assumption-report"
seed = 5
trials = 100
[world]
concept_dim = 256
feature_dim = 64
sparsity = 4
law = "uniform"
[report]
dataset_size = 5000
neighbors = 50
full = false
noise_draws = 1
)");
  const double frac = row(r, "within_bound").mean;
  const double bound = 4.0 * std::sqrt(std::log(5000.0) / 64.0);
  return {r.failures.empty() && frac >= 0.9, fmt("%.0f", 100 * frac) + "% of 100 test points have eta_ang <= " +
                                                 fmt("%.3f", bound) + " (need >= 90%), mean eta_ang " +
                                                 fmt("%.3f", row(r, "eta_ang").mean)};
}

// ------------------------------------------------------------ 5

Outcome planted_dictionary() {
  double worst = 1.0;
  std::size_t ok = 0;
  const std::size_t seeds = 20;
  for (std::uint64_t s = 1; s <= seeds; ++s) {
    const auto r = run(R"(
kind = "sae-train"
trials = 1
[world]
concept_dim = 8
feature_dim = 8
sparsity = 1
[sae]
planted = "orthogonal"
dataset_size = 4096
concepts = 8
sparsity = 1
batch_size = 256
steps = 3000
epochs = 1000000
peak_lr = 1e-2
warmup_steps = 150
horizon = 3000
initial_sparsity = 8
ramp_steps = 2000
dropout = 0.5
ghost_weight = 1e6
activity_window = 4096
)",
                       s);
    const double m = row(r, "atom_recovery_min").mean;
    worst = std::min(worst, m);
    ok += m >= 0.99;
  }
  return {ok == seeds, std::to_string(ok) + "/" + std::to_string(seeds) + " seeds recover every atom, worst max-cosine " +
                           fmt("%.5f", worst) + " (need >= 0.99)"};
}

Outcome ghost_ablation() {
  std::string d;
  bool ok = true;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const auto r = run(R"(
kind = "sae-train"
trials = 1
[world]
concept_dim = 512
feature_dim = 64
sparsity = 4
law = "clustered"
[sae]
dataset_size = 20000
concepts = 512
sparsity = 4
batch_size = 512
steps = 1000
epochs = 1000000
peak_lr = 3e-3
warmup_steps = 50
horizon = 1000
ramp_steps = 100
initial_sparsity = 64
dropout = 0.0
activity_window = 20000
[sweep]
ghost_weight = [0, 1e6]
)",
                       s);
    const double with = row(r, "dead_fraction", {1e6}).mean;
    const double without = row(r, "dead_fraction", {0}).mean;
    ok = ok && r.failures.empty() && with <= 0.10 && without > with;
    d += fmt("%.3f", with) + "/" + fmt("%.3f", without) + " ";
  }
  return {ok, "dead fraction ghost/no-ghost per seed: " + d + "(need ghost <= 0.10 and no-ghost strictly higher)"};
}

Vector to_vec(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }
Matrix to_col(const Vector& v) { return Eigen::Map<const Matrix>(v.data(), v.size(), 1); }

Matrix normal_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

// Central differences; relative errors use max(|a|, |b|, kFloor) as the scale.
constexpr double kStep = 1e-5;
constexpr double kFloor = 1e-6;

double top_k_margin(const Matrix& pre, std::size_t s) {
  double margin = std::numeric_limits<double>::infinity();
  for (Eigen::Index r = 0; r < pre.rows(); ++r) {
    std::vector<double> v(pre.row(r).data(), pre.row(r).data() + pre.cols());
    std::sort(v.begin(), v.end(), std::greater<>());
    margin = std::min(margin, v[s - 1] - v[s]);
  }
  return margin;
}

// Worst relative error over every parameter block of one SAE configuration.
double sae_gradient_error(const SaeModel& base, const Matrix& batch, const ActivityTracker& tracker, double ghost,
                          const Matrix* dropout) {
  SaeLossOptions opts;
  opts.dropout = dropout;
  const SaeLoss analytic = sae_loss_and_grads(base, batch, tracker, ghost, opts);
  // The ghost term treats the (dropped-out) residual as a constant.
  Matrix pre = batch * base.encoder.transpose();
  pre.rowwise() += base.bias.transpose();
  if (dropout) pre = pre.cwiseProduct(*dropout);
  Matrix codes = Matrix::Zero(batch.rows(), base.encoder.rows());
  for (Eigen::Index r = 0; r < batch.rows(); ++r) {
    for (Eigen::Index j = 0; j < pre.cols(); ++j) {
      if (base.variant == SaeVariant::threshold && pre(r, j) > base.thresholds(j)) codes(r, j) = pre(r, j) - base.thresholds(j);
    }
    if (base.variant == SaeVariant::top_k) {
      const SparseVector sv = top_k_activation(pre.row(r).transpose(), base.sparsity);
      for (const auto& e : sv.entries()) {
        codes(r, static_cast<Eigen::Index>(e.index)) = e.value;
      }
    }
  }
  const Matrix residual = codes * base.decoder.transpose() - batch;
  const auto dead = tracker.dead_mask();
  auto total = [&](const SaeModel& m) {
    return sae_loss_and_grads(m, batch, tracker, 0.0, opts).total + ghost_loss(m, batch, dead, residual, ghost);
  };
  const double h = kStep;
  double worst = 0.0;
  auto check = [&](const Matrix& g, const Matrix& p, const std::function<void(SaeModel&, const Matrix&)>& set) {
    const Matrix fd = finite_difference_gradient(
        [&](const Matrix& v) {
          SaeModel m = base;
          set(m, v);
          return total(m);
        },
        p, h);
    worst = std::max(worst, max_relative_error(g, fd, kFloor));
  };
  check(analytic.grads.encoder, base.encoder, [](SaeModel& m, const Matrix& v) { m.encoder = v; });
  check(analytic.grads.decoder, base.decoder, [](SaeModel& m, const Matrix& v) { m.decoder = v; });
  if (base.use_bias) check(to_col(analytic.grads.bias), to_col(base.bias), [](SaeModel& m, const Matrix& v) { m.bias = to_vec(v); });
  if (base.variant == SaeVariant::threshold) {
    check(to_col(analytic.grads.thresholds), to_col(base.thresholds),
          [](SaeModel& m, const Matrix& v) { m.thresholds = to_vec(v); });
  }
  return worst;
}

double head_gradient_error(Rng& rng) {
  const LinearHead head{normal_matrix(4, 5, rng), to_vec(normal_matrix(4, 1, rng))};
  const Matrix x = normal_matrix(6, 5, rng);
  std::vector<int> y(6);
  for (auto& v : y) v = static_cast<int>(rng.below(4));
  const XentResult g = softmax_xent_grad(head, x, y, true);
  double worst = max_relative_error(
      g.grad_weights,
      finite_difference_gradient([&](const Matrix& w) { return softmax_xent_grad({w, head.bias}, x, y).loss; },
                                 head.weights, kStep),
      kFloor);
  worst = std::max(worst, max_relative_error(to_col(g.grad_bias),
                                             finite_difference_gradient(
                                                 [&](const Matrix& b) {
                                                   return softmax_xent_grad({head.weights, to_vec(b)}, x, y).loss;
                                                 },
                                                 to_col(head.bias), kStep),
                                             kFloor));
  MlpModel mlp{normal_matrix(3, 5, rng), to_vec(normal_matrix(3, 1, rng, 0.1)),
               {normal_matrix(4, 3, rng), to_vec(normal_matrix(4, 1, rng))}};
  // Stable: no hidden pre-activation within 1e-3 of the ReLU kink.
  const Matrix pre = (x * mlp.hidden_weights.transpose()).rowwise() + mlp.hidden_bias.transpose();
  if (pre.cwiseAbs().minCoeff() < 1e-3) return -1.0;
  const MlpGradients mg = mlp_loss_and_grads(mlp, x, y);
  auto mlp_fd = [&](const Matrix& p, const std::function<void(MlpModel&, const Matrix&)>& set) {
    return finite_difference_gradient(
        [&](const Matrix& v) {
          MlpModel m = mlp;
          set(m, v);
          return mlp_loss_and_grads(m, x, y).loss;
        },
        p, kStep);
  };
  worst = std::max(worst, max_relative_error(mg.hidden_weights, mlp_fd(mlp.hidden_weights, [](MlpModel& m, const Matrix& v) {
                                               m.hidden_weights = v;
                                             }),
                                             kFloor));
  worst = std::max(worst, max_relative_error(to_col(mg.hidden_bias), mlp_fd(to_col(mlp.hidden_bias), [](MlpModel& m, const Matrix& v) {
                                               m.hidden_bias = to_vec(v);
                                             }),
                                             kFloor));
  worst = std::max(worst, max_relative_error(mg.head_weights, mlp_fd(mlp.head.weights, [](MlpModel& m, const Matrix& v) {
                                               m.head.weights = v;
                                             }),
                                             kFloor));
  worst = std::max(worst, max_relative_error(to_col(mg.head_bias), mlp_fd(to_col(mlp.head.bias), [](MlpModel& m, const Matrix& v) {
                                               m.head.bias = to_vec(v);
                                             }),
                                             kFloor));
  return worst;
}

Outcome gradient_checks() {
  Rng rng(55);
  std::size_t points = 0, passed = 0, skipped = 0;
  double worst = 0.0;
  while (points < 100) {
    const std::size_t kind = points % 4;
    const std::uint64_t seed = rng();
    Rng local(seed);
    double err = 0.0;
    if (kind == 3) {
      err = head_gradient_error(local);
    } else {
      SaeConfig cfg;
      cfg.concepts = 10;
      cfg.sparsity = 3;
      cfg.variant = kind == 2 ? SaeVariant::threshold : SaeVariant::top_k;
      SaeModel m = init_sae(cfg, 6, local);
      m.bias = to_vec(normal_matrix(10, 1, local, 0.1));
      m.decoder += normal_matrix(6, 10, local, 0.2);
      if (cfg.variant == SaeVariant::threshold) m.thresholds = to_vec(normal_matrix(10, 1, local, 0.05));
      const Matrix batch = normal_matrix(5, 6, local);
      ActivityTracker tracker(10, 1e-4);
      std::vector<std::uint64_t> counts(10, 50);
      counts[local.below(10)] = 0;
      counts[local.below(10)] = 0;
      tracker.observe(counts, 100);
      Matrix drop(5, 10);
      for (Eigen::Index i = 0; i < drop.size(); ++i) drop.data()[i] = local.bernoulli(0.5) ? 2.0 : 0.0;
      const Matrix* dropout = kind == 1 ? &drop : nullptr;
      // Stable: the selection cannot change under perturbations of size h.
      const double margin = dropout ? top_k_margin(((batch * m.encoder.transpose()).rowwise() + m.bias.transpose())
                                                      .cwiseProduct(drop),
                                                  cfg.sparsity)
                                    : selection_margin(m, batch);
      if (margin < 1e-3) {
        ++skipped;
        continue;
      }
      err = sae_gradient_error(m, batch, tracker, kind == 0 ? 0.7 : 0.0, dropout);
    }
    if (err < 0.0) {
      ++skipped;
      continue;
    }
    ++points;
    worst = std::max(worst, err);
    passed += err <= 1e-4;
  }
  return {passed == 100, std::to_string(passed) + "/100 stable points within rel. 1e-4 (worst " + fmt("%.2e", worst) +
                             "; " + std::to_string(skipped) + " unstable draws skipped); blocks: SAE encoder, decoder, "
                             "bias, thresholds with ghost and dropout, softmax head, MLP head"};
}

// ------------------------------------------------------------ 6

Outcome adaptive_mask() {
  const auto r = run(R"(
kind = "sae-mask"
seed = 2
trials = 20
[world]
concept_dim = 256
feature_dim = 64
sparsity = 3
law = "clustered"
[mask]
dataset_size = 5000
neighbors = 50
steps = 200
penalty = 3e-3
)");
  const double ratio = row(r, "mask_ratio").mean;
  const double gap = row(r, "accuracy_gap").mean;
  const bool ok = r.failures.empty() && ratio <= 0.5 && std::abs(gap) <= 0.02;
  return {ok, "mask " + fmt("%.1f", row(r, "mask_size").mean) + " of " + fmt("%.1f", row(r, "union_size").mean) +
                  " active concepts, ratio " + fmt("%.3f", ratio) + " (need <= 0.5); accuracy masked " +
                  fmt("%.3f", row(r, "masked_accuracy").mean) + " vs plain " + fmt("%.3f", row(r, "plain_accuracy").mean) +
                  " (need within 0.02)"};
}

// ------------------------------------------------------------ 7 and 8

std::optional<ExperimentResult> scaling;
double scaling_seconds = 0.0;

const ExperimentResult& model_scaling() {
  if (!scaling) {
    const auto t0 = Clock::now();
    scaling = run(R"(
kind = "model-scaling"
seed = 1
trials = 3
[data]
source = "mnist"
test_size = 1000
[train]
learning_rate = 1e-3
batch_size = 128
epochs = 50
[ttt]
neighbors = 50
steps = 80
learning_rate = 0.02
[eval]
fixed_heads = 10
[sweep]
width = [0, 8, 16, 32, 64, 128]
)");
    scaling_seconds = seconds_since(t0);
  }
  return *scaling;
}

Outcome mnist_trends() {
  const auto& r = model_scaling();
  std::string d;
  const double global_acc = 1.0 - row(r, "global_error", {0}).mean;
  const bool a = global_acc >= 0.90;
  d += "(a) pixel head " + fmt("%.3f", global_acc) + (a ? " ok" : " LOW") + "; (b) gap";
  bool b = true;
  for (double w : {8.0, 16.0, 32.0, 64.0, 128.0}) {
    const double g = row(r, "gap", {w}).mean;
    b = b && g >= 0.0;
    d += " w" + fmt("%g", w) + "=" + fmt("%.4f", g);
  }
  const double g8 = row(r, "gap", {8}).mean, g128 = row(r, "gap", {128}).mean;
  b = b && g8 > g128;
  const double nb = row(r, "ttt_neighborhood_acc", {0}).mean;
  const double test = row(r, "ttt_test_acc", {0}).mean;
  const double fixed = row(r, "ttt_global_acc", {0}).mean;
  const bool c = nb > test && test > fixed;
  d += (b ? " ok" : " VIOLATED") + std::string("; (c) neighbourhood ") + fmt("%.3f", nb) + " > test " +
       fmt("%.3f", test) + " > fixed head " + fmt("%.3f", fixed) + (c ? " ok" : " VIOLATED") + "; " +
       fmt("%.0f", scaling_seconds) + "s (limit 1800s)";
  return {r.failures.empty() && a && b && c && scaling_seconds < 1800.0, d};
}

Outcome moe_trend() {
  const auto r = run(R"(
kind = "moe-scaling"
seed = 1
trials = 1
[data]
source = "mnist"
[train]
learning_rate = 1e-3
batch_size = 128
epochs = 50
[ttt]
neighbors = 50
steps = 80
learning_rate = 0.02
[sweep]
experts = [0, 1, 10, 100, 1000]
)");
  std::string d = "accuracy";
  bool monotone = true;
  const ResultRow* prev = nullptr;
  for (double e : {1.0, 10.0, 100.0, 1000.0}) {
    const ResultRow& cur = row(r, "accuracy", {e});
    d += " E" + fmt("%g", e) + "=" + fmt("%.3f", cur.mean) + " [" + fmt("%.3f", cur.ci_low) + "," + fmt("%.3f", cur.ci_high) + "]";
    if (prev && cur.ci_high < prev->ci_low) monotone = false;
    prev = &cur;
  }
  const double ttt = row(r, "accuracy", {0}).mean;
  const double e1000 = row(r, "accuracy", {1000}).mean;
  const bool close = e1000 >= ttt - 0.01;
  d += "; TTT " + fmt("%.3f", ttt) + "; nondecreasing up to CI overlap: " + (monotone ? "yes" : "no") +
       "; E=1000 within 1 point of TTT: " + (close ? "yes" : "no") + " (gap " + fmt("%.3f", ttt - e1000) + ")";
  return {r.failures.empty() && monotone && close, d};
}

// ------------------------------------------------------------ 9

Outcome statistical_plumbing() {
  Rng data(2024), boot(77);
  int covered = 0;
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<double> v(200);
    for (auto& x : v) x = data.bernoulli(0.3) ? 1.0 : 0.0;
    const Interval ci = bootstrap_ci(v, kDefaultResamples, kDefaultLevel, boot);
    covered += ci.low <= 0.3 && 0.3 <= ci.high;
  }
  const double coverage = covered / 500.0;
  const bool cov_ok = coverage >= 0.85 && coverage <= 0.95;

  const std::vector<std::string> configs = {
      kInterference,
      R"(
kind = "ttt-rate"
seed = 3
trials = 20
[world]
concept_dim = 64
feature_dim = 16
sparsity = 2
noise_variance = 0.25
[rate]
ks = [16, 64]
)",
      R"(
kind = "neighborhood-sweep"
seed = 4
trials = 10
threads = 3
[world]
concept_dim = 128
feature_dim = 32
[sweep]
neighbors = [10, 40, 160]
)",
      R"(
kind = "sae-mask"
seed = 6
trials = 3
[world]
concept_dim = 64
feature_dim = 32
sparsity = 2
[mask]
dataset_size = 600
[sweep]
penalty = [1e-3, 1e-2]
)",
      R"(
kind = "data-scaling"
seed = 8
trials = 1
threads = 2
[data]
test_size = 40
[train]
epochs = 3
[ttt]
steps = 5
[sweep]
fraction = [0.1, 0.5]
)",
      R"(
kind = "assumption-report"
seed = 9
trials = 5
[world]
concept_dim = 128
feature_dim = 32
[report]
dataset_size = 800
noise_draws = 20
)",
  };
  std::size_t identical = 0;
  for (const auto& text : configs) {
    const auto a = run(text), b = run(text);
    const bool same_csv = result_csv(a) == result_csv(b);
    const bool same_svg = render_svg(a, PlotKind::band) == render_svg(b, PlotKind::band);
    identical += same_csv && same_svg && !a.rows.empty();
  }
  const bool rerun_ok = identical == configs.size();
  return {cov_ok && rerun_ok, "bootstrap coverage " + fmt("%.3f", coverage) + " (accept [0.85, 0.95]); " +
                                  std::to_string(identical) + "/" + std::to_string(configs.size()) +
                                  " experiment reruns byte-identical (CSV and SVG)"};
}

// ------------------------------------------------------------ 10

Outcome concentration() {
  const auto r = run(R"(
kind = "assumption-report"
name = "concentration"
seed = 13
trials = 20
[world]
concept_dim = 256
feature_dim = 64
sparsity = 4
law = "clustered"
noise_variance = 0.25
[report]
design = "pool"
local_sparsity = 4
noise_draws = 200
dataset_size = 20000
[sweep]
neighbors = [25, 100, 400]
)");
  bool ok = r.failures.empty();
  std::string d = "p95 ratio for k to 4k:";
  for (auto [k, k4] : {std::pair{25.0, 100.0}, std::pair{100.0, 400.0}}) {
    const double ratio = row(r, "dual_norm_p95", {k4}).mean / row(r, "dual_norm_p95", {k}).mean;
    ok = ok && ratio >= 0.35 && ratio <= 0.65;
    d += " " + fmt("%g", k) + "->" + fmt("%g", k4) + " " + fmt("%.3f", ratio);
  }
  return {ok, d + " (accept 0.5 +- 30%), 200 noise redraws, s'=4"};
}

}  // namespace

int main(int argc, char** argv) {
  bool strict = false;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--strict") == 0) {
      strict = true;
    } else {
      only.insert(std::atoi(argv[i]));
    }
  }
  auto want = [&](int id) { return only.empty() || only.count(id); };
  const auto t0 = Clock::now();
  std::printf("suplab acceptance %s\n", version_string().c_str());
  if (want(1)) criterion(1, "interference law", interference_law);
  if (want(2)) criterion(2, "TTT beats global in superposition", ttt_separation);
  if (want(3)) criterion(3, "sparse-recovery rate", sparse_rate);
  if (want(4)) criterion(4, "neighbourhood geometry", neighborhood_geometry);
  if (want(5)) {
    const auto t5 = Clock::now();
    criterion(5, "SAE (a) planted dictionary", planted_dictionary);
    criterion(5, "SAE (b) ghost gradients", ghost_ablation);
    criterion(5, "SAE (c) gradient checks", gradient_checks);
    const double t = seconds_since(t5);
    criterion(5, "SAE runtime", [t] { return Outcome{t < 900.0, fmt("%.0f", t) + "s for 5a-5c (limit 900s)"}; });
  }
  if (want(6)) criterion(6, "adaptive mask", adaptive_mask);
  if (want(7)) criterion(7, "MNIST trends", mnist_trends);
  if (want(8)) criterion(8, "MoE trend", moe_trend);
  if (want(9)) criterion(9, "statistical plumbing", statistical_plumbing);
  if (want(10)) criterion(10, "concentration diagnostics", concentration);
  std::printf("acceptance finished: %d failing line(s), %.0fs\n", failures, seconds_since(t0));
  return strict && failures > 0 ? 1 : 0;
}
