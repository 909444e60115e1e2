#include "suplab/concept_model.hpp"
#include "suplab/errors.hpp"
#include "suplab/sae.hpp"

#include <doctest.h>

#include <vector>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace suplab;

namespace {

SaeModel small_model(SaeVariant variant, std::uint64_t seed) {
  SaeConfig cfg;
  cfg.concepts = 10;
  cfg.sparsity = 3;
  cfg.variant = variant;
  Rng rng(seed);
  SaeModel m = init_sae(cfg, 6, rng);
  for (Eigen::Index i = 0; i < m.bias.size(); ++i) m.bias(i) = 0.1 * rng.normal();
  for (Eigen::Index i = 0; i < m.decoder.size(); ++i) m.decoder.data()[i] += 0.2 * rng.normal();
  if (variant == SaeVariant::threshold) {
    for (Eigen::Index i = 0; i < m.thresholds.size(); ++i) m.thresholds(i) = 0.05 * rng.normal();
  }
  return m;
}

Matrix random_batch(Eigen::Index n, Eigen::Index d, Rng& rng) {
  Matrix b(n, d);
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.normal();
  return b;
}

// Tracker in which features 1, 4 and 7 have never fired.
ActivityTracker tracker_with_dead(std::size_t d1) {
  ActivityTracker t(d1, 1e-4);
  std::vector<std::uint64_t> counts(d1, 50);
  counts[1] = counts[4] = counts[7] = 0;
  t.observe(counts, 100);
  return t;
}

Vector to_vec(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }
Matrix to_col(const Vector& v) { return Eigen::Map<const Matrix>(v.data(), v.size(), 1); }

}  // namespace

TEST_SUITE("sae") {
  TEST_CASE("top-k activation") {
    Vector v(3);
    v << 3, 1, 2;
    const SparseVector s = top_k_activation(v, 2);
    CHECK(s == SparseVector(3, {{0, 3.0}, {2, 2.0}}));
    CHECK(top_k_activation(v, 3).to_dense() == v);
    Vector ties(4);
    ties << 1, 2, 2, 2;
    CHECK(top_k_activation(ties, 2) == SparseVector(4, {{1, 2.0}, {2, 2.0}}));
    CHECK_THROWS_AS(top_k_activation(v, 0), ConfigError);
  }

  TEST_CASE("top-k equals a full-sort oracle") {
    Rng rng(1);
    for (int t = 0; t < 1000; ++t) {
      Vector v(20);
      for (auto& x : v) x = std::round(rng.normal() * 4) / 4;  // coarse values force ties
      const std::size_t s = 1 + rng.below(20);
      std::vector<std::size_t> idx(20);
      std::iota(idx.begin(), idx.end(), 0);
      std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v(a) > v(b); });
      idx.resize(s);
      std::sort(idx.begin(), idx.end());
      const SparseVector got = top_k_activation(v, s);
      REQUIRE(got.nnz() == s);
      for (std::size_t i = 0; i < s; ++i) CHECK(got.entries()[i].index == idx[i]);
    }
  }

  TEST_CASE("forward pass") {
    SaeModel m;
    m.encoder = Matrix::Identity(4, 4);
    m.decoder = Matrix::Identity(4, 4);
    m.bias = Vector::Zero(4);
    m.sparsity = 4;
    Vector psi(4);
    psi << 0.5, 2.0, 0.0, 1.5;
    CHECK((sae_forward(m, psi).reconstruction - psi).norm() == 0.0);
    CHECK(sae_forward(m, Vector::Zero(4)).reconstruction.norm() == 0.0);
    m.sparsity = 2;
    const SaeOutput out = sae_forward(m, psi);
    CHECK(out.code.nnz() == 2);
    CHECK(out.reconstruction(0) == 0.0);

    m.variant = SaeVariant::threshold;
    m.thresholds = Vector::Constant(4, 1.0);
    const SaeOutput thr = sae_forward(m, psi);
    CHECK(thr.code.nnz() == 2);
    for (const auto& e : thr.code.entries()) CHECK(e.value > 0.0);
  }

  TEST_CASE("gradients match finite differences (top-k, ghost, dropout)") {
    Rng rng(2);
    const SaeModel base = small_model(SaeVariant::top_k, 3);
    const Matrix batch = random_batch(5, 6, rng);
    REQUIRE(selection_margin(base, batch) > 1e-3);
    const ActivityTracker tracker = tracker_with_dead(10);
    const auto dead = tracker.dead_mask();
    Matrix dropout(5, 10);
    for (Eigen::Index i = 0; i < dropout.size(); ++i) dropout.data()[i] = rng.bernoulli(0.8) ? 1.25 : 0.0;

    for (const Matrix* drop : std::vector<const Matrix*>{nullptr, &dropout}) {
      SaeLossOptions opts;
      opts.dropout = drop;
      const double w = 0.7;
      const SaeLoss analytic = sae_loss_and_grads(base, batch, tracker, w, opts);
      const Matrix residual = sae_reconstruct(base, batch) - batch;
      // With dropout the residual used by the ghost term is the dropped-out one.
      Matrix fixed_residual = residual;
      if (drop != nullptr) {
        SaeModel tmp = base;
        Matrix pre = batch * base.encoder.transpose();
        pre.rowwise() += base.bias.transpose();
        pre = pre.cwiseProduct(*drop);
        Matrix codes = Matrix::Zero(5, 10);
        for (Eigen::Index r = 0; r < 5; ++r) {
          const SparseVector sv = top_k_activation(pre.row(r).transpose(), 3);
          for (const auto& e : sv.entries()) codes(r, static_cast<Eigen::Index>(e.index)) = e.value;
        }
        fixed_residual = codes * base.decoder.transpose() - batch;
      }
      auto total = [&](const SaeModel& m) {
        return sae_loss_and_grads(m, batch, tracker, 0.0, opts).total + ghost_loss(m, batch, dead, fixed_residual, w);
      };
      const double h = 1e-6;
      const Matrix fe = finite_difference_gradient(
          [&](const Matrix& e) {
            SaeModel m = base;
            m.encoder = e;
            return total(m);
          },
          base.encoder, h);
      const Matrix fd = finite_difference_gradient(
          [&](const Matrix& d) {
            SaeModel m = base;
            m.decoder = d;
            return total(m);
          },
          base.decoder, h);
      const Matrix fb = finite_difference_gradient(
          [&](const Matrix& b) {
            SaeModel m = base;
            m.bias = to_vec(b);
            return total(m);
          },
          to_col(base.bias), h);
      CHECK(max_relative_error(analytic.grads.encoder, fe, 1e-6) < 1e-4);
      CHECK(max_relative_error(analytic.grads.decoder, fd, 1e-6) < 1e-4);
      CHECK(max_relative_error(to_col(analytic.grads.bias), fb, 1e-6) < 1e-4);
    }
  }

  TEST_CASE("gradients match finite differences (threshold variant)") {
    Rng rng(4);
    const SaeModel base = small_model(SaeVariant::threshold, 5);
    const Matrix batch = random_batch(6, 6, rng);
    REQUIRE(selection_margin(base, batch) > 1e-3);
    const ActivityTracker tracker(10, 1e-4);
    const SaeLoss analytic = sae_loss_and_grads(base, batch, tracker, 0.0);
    auto loss = [&](const SaeModel& m) { return sae_loss_and_grads(m, batch, tracker, 0.0).total; };
    const Matrix ft = finite_difference_gradient(
        [&](const Matrix& t) {
          SaeModel m = base;
          m.thresholds = to_vec(t);
          return loss(m);
        },
        to_col(base.thresholds), 1e-6);
    const Matrix fe = finite_difference_gradient(
        [&](const Matrix& e) {
          SaeModel m = base;
          m.encoder = e;
          return loss(m);
        },
        base.encoder, 1e-6);
    CHECK(max_relative_error(to_col(analytic.grads.thresholds), ft, 1e-6) < 1e-4);
    CHECK(max_relative_error(analytic.grads.encoder, fe, 1e-6) < 1e-4);
  }

  TEST_CASE("ghost term") {
    Rng rng(6);
    const SaeModel m = small_model(SaeVariant::top_k, 7);
    const Matrix batch = random_batch(8, 6, rng);
    const ActivityTracker alive(10, 1e-4);
    const SaeLoss plain = sae_loss_and_grads(m, batch, alive, 0.0);
    const SaeLoss ghosted = sae_loss_and_grads(m, batch, alive, 1e6);
    CHECK(ghosted.ghost == 0.0);
    CHECK((ghosted.grads.encoder - plain.grads.encoder).norm() == 0.0);

    const ActivityTracker some_dead = tracker_with_dead(10);
    const SaeLoss g = sae_loss_and_grads(m, batch, some_dead, 1e6);
    const Matrix delta = g.grads.encoder - plain.grads.encoder;
    const auto dead = some_dead.dead_mask();
    for (Eigen::Index j = 0; j < 10; ++j) {
      if (dead[static_cast<std::size_t>(j)]) {
        CHECK(delta.row(j).norm() > 0.0);
      } else {
        CHECK(delta.row(j).norm() == 0.0);
      }
    }
  }

  TEST_CASE("perfect reconstruction with no dead features has zero loss") {
    SaeModel m;
    m.encoder = Matrix::Identity(3, 3);
    m.decoder = Matrix::Identity(3, 3);
    m.bias = Vector::Zero(3);
    m.sparsity = 3;
    Matrix batch(2, 3);
    batch << 1, 2, 3, 0.5, 0.1, 0.2;
    CHECK(sae_loss_and_grads(m, batch, ActivityTracker(3, 1e-4), 1e6).total == 0.0);
  }

  TEST_CASE("activity tracker") {
    ActivityTracker t(4, 0.25);
    CHECK(t.dead_fraction() == 0.0);
    const std::vector<std::uint64_t> c{4, 1, 0, 2};
    t.observe(c, 4);
    const Vector f = t.frequencies();
    CHECK(f(0) == 1.0);
    CHECK(f(1) == 0.25);
    CHECK(t.dead_mask() == std::vector<bool>{false, true, true, false});
    t.observe(SparseVector(4, {{2, 1.0}}));
    CHECK(t.samples() == 5);
    CHECK_THROWS_AS(t.observe(std::vector<std::uint64_t>{9, 0, 0, 0}, 2), DataError);
  }

  TEST_CASE("windowed activity forgets old batches") {
    ActivityTracker t(3, 0.0, 4);
    t.observe(std::vector<std::uint64_t>{2, 0, 0}, 2);
    t.observe(std::vector<std::uint64_t>{0, 2, 0}, 2);
    CHECK(t.samples() == 4);
    CHECK(t.dead_mask() == std::vector<bool>{false, false, true});
    t.observe(std::vector<std::uint64_t>{0, 1, 1}, 2);
    // Oldest batch dropped: the remaining two still cover the window.
    CHECK(t.samples() == 4);
    CHECK(t.dead_mask() == std::vector<bool>{true, false, false});
    CHECK(t.frequencies()(1) == 0.75);
    ActivityTracker cumulative(3, 0.0);
    cumulative.observe(std::vector<std::uint64_t>{2, 0, 0}, 2);
    cumulative.observe(std::vector<std::uint64_t>{0, 1, 1}, 2);
    CHECK(cumulative.dead_mask() == std::vector<bool>{false, false, false});
  }

  TEST_CASE("decoder normalization and the rescaling symmetry") {
    SaeModel m = small_model(SaeVariant::threshold, 8);
    m.normalize_decoder();
    CHECK((m.decoder.colwise().norm().array() - 1.0).abs().maxCoeff() < 1e-10);
    Rng rng(9);
    const Matrix batch = random_batch(4, 6, rng);
    SaeModel scaled = m;
    const double c = 3.0;
    scaled.decoder.col(2) /= c;
    scaled.encoder.row(2) *= c;
    scaled.bias(2) *= c;
    scaled.thresholds(2) *= c;
    const ActivityTracker t(10, 1e-4);
    CHECK(sae_loss_and_grads(scaled, batch, t, 0.0).reconstruction ==
          doctest::Approx(sae_loss_and_grads(m, batch, t, 0.0).reconstruction).epsilon(1e-12));
  }

  TEST_CASE("config and schedules") {
    SaeConfig cfg;
    CHECK(scheduled_sparsity(cfg, 5000) == 72);
    CHECK(scheduled_sparsity(cfg, 0) == 128);
    CHECK(scheduled_sparsity(cfg, 20000) == 16);
    cfg.concepts = 8;
    CHECK_THROWS_AS(cfg.validate(4), ConfigError);
    SaeConfig defaults;
    CHECK(defaults.peak_lr == 3e-4);
    CHECK(defaults.warmup_steps == 5000);
    CHECK(defaults.horizon == 100000);
    CHECK(defaults.initial_sparsity == 128);
    CHECK(defaults.ramp_steps == 10000);
    CHECK(defaults.batch_size == 4096);
    CHECK(defaults.dropout == 0.5);
    CHECK(defaults.ghost_weight == 1e6);
    CHECK(defaults.dead_threshold == 1e-4);
  }

  TEST_CASE("init ties the decoder to the encoder") {
    SaeConfig cfg;
    cfg.concepts = 16;
    cfg.sparsity = 2;
    cfg.normalize_decoder = false;
    Rng rng(1);
    const SaeModel m = init_sae(cfg, 8, rng);
    CHECK((m.decoder - m.encoder.transpose()).norm() == 0.0);
    CHECK(m.bias.norm() == 0.0);
  }

  TEST_CASE("training lowers reconstruction error and respects sparsity") {
    WorldConfig wc;
    wc.concept_dim = 32;
    wc.feature_dim = 16;
    wc.sparsity = 2;
    wc.seed = 2;
    const ConceptWorld w = make_world(wc);
    Rng rng(3);
    const Matrix data = feature_matrix(sample_dataset(w, 512, rng));
    SaeConfig cfg;
    cfg.concepts = 32;
    cfg.sparsity = 4;
    cfg.batch_size = 128;
    cfg.epochs = 100;
    cfg.max_steps = 200;
    cfg.peak_lr = 1e-2;
    cfg.warmup_steps = 10;
    cfg.horizon = 200;
    cfg.initial_sparsity = 8;
    cfg.ramp_steps = 50;
    cfg.dropout = 0.0;
    cfg.ghost_weight = 0.0;
    std::vector<SaeStepLog> log;
    const SaeModel m = train_sae(cfg, data, rng, &log);
    REQUIRE(log.size() == 200);
    double first = 0, last = 0;
    for (int i = 0; i < 20; ++i) first += log[static_cast<std::size_t>(i)].reconstruction;
    for (int i = 80; i < 100; ++i) last += log[static_cast<std::size_t>(i)].reconstruction;
    CHECK(last < first);
    for (const auto& entry : log) CHECK(entry.sparsity == scheduled_sparsity(cfg, entry.step));
    const Matrix codes = sae_encode(m, data);
    for (Eigen::Index r = 0; r < codes.rows(); ++r) CHECK((codes.row(r).array() != 0.0).count() <= 4);
    CHECK((m.decoder.colwise().norm().array() - 1.0).abs().maxCoeff() < 1e-10);
  }

  TEST_CASE("mask surrogate is monotone in |theta|") {
    ConceptMask mask;
    mask.temperature = 0.1;
    mask.logits = Vector::LinSpaced(21, 0.0, 1.0);
    const Vector g = mask.surrogate_gradient();
    for (Eigen::Index i = 1; i < g.size(); ++i) CHECK(g(i) < g(i - 1));
    mask.logits = -mask.logits;
    const Vector h = mask.surrogate_gradient();
    for (Eigen::Index i = 0; i < g.size(); ++i) CHECK(h(i) == doctest::Approx(g(i)));
    CHECK(mask.mask().sum() == 0.0);
  }

  TEST_CASE("mask learning limits") {
    Rng rng(5);
    Matrix x(60, 8);
    std::vector<int> y(60);
    for (Eigen::Index i = 0; i < 60; ++i) {
      for (Eigen::Index j = 0; j < 8; ++j) x(i, j) = rng.normal();
      y[static_cast<std::size_t>(i)] = x(i, 0) + 0.5 * x(i, 1) > 0 ? 1 : 0;
    }
    y[0] = 1;
    MaskConfig strong;
    strong.penalty = 100.0;
    const MaskedHead empty = learn_concept_mask(x, y, 2, strong);
    CHECK(empty.mask.active() == 0);
    const auto pred = empty.head.predict(empty.mask.apply(x));
    const int majority = std::count(y.begin(), y.end(), 1) * 2 > 60 ? 1 : 0;
    for (int p : pred) CHECK(p == majority);

    MaskConfig unpenalized;
    unpenalized.penalty = 0.0;
    const MaskedHead dense = learn_concept_mask(x, y, 2, unpenalized);
    TttConfig plain;
    plain.steps = unpenalized.steps;
    plain.learning_rate = unpenalized.head_learning_rate;
    const LinearHead unmasked = ttt_finetune(LinearHead::zeros(2, 8), x, y, plain);
    CHECK(dense.loss <= softmax_xent_grad(unmasked, x, y).loss + 0.05);
  }
}
