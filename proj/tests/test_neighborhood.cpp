#include "suplab/concept_model.hpp"
#include "suplab/errors.hpp"
#include "suplab/neighborhood.hpp"
#include "suplab/stats.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace suplab;

namespace {

Matrix random_points(Eigen::Index n, Eigen::Index d, Rng& rng) {
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

std::vector<std::size_t> full_sort(const Matrix& x, const Vector& q) {
  std::vector<double> s(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double dot = 0, nx = 0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      dot += x(i, j) * q(j);
      nx += x(i, j) * x(i, j);
    }
    s[static_cast<std::size_t>(i)] = dot / (std::sqrt(nx) * q.norm());
  }
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  return idx;
}

}  // namespace

TEST_SUITE("neighborhood") {
  TEST_CASE("cosine similarity") {
    Vector a(2), b(2);
    a << 1, 0;
    b << 1, 1;
    CHECK(cosine_similarity(a, a) == doctest::Approx(1.0));
    CHECK(cosine_similarity(a, Vector::Unit(2, 1)) == 0.0);
    CHECK(cosine_similarity(a, b) == doctest::Approx(std::sqrt(2.0) / 2));
    CHECK_THROWS_AS(cosine_similarity(a, Vector::Zero(2)), DataError);
  }

  TEST_CASE("knn equals a full-sort oracle") {
    Rng rng(1);
    const Matrix x = random_points(1000, 8, rng);
    for (int t = 0; t < 5; ++t) {
      Vector q(8);
      for (auto& v : q) v = rng.normal();
      const auto nb = knn(q, x, 25);
      const auto oracle = full_sort(x, q);
      CHECK(nb.size() == 25);
      for (std::size_t i = 0; i < 25; ++i) CHECK(nb.members[i] == oracle[i]);
      CHECK(std::is_sorted(nb.similarities.rbegin(), nb.similarities.rend()));
    }
    const Vector q0 = x.row(17).transpose();
    CHECK(knn(q0, x, 1).members.front() == 17);
    CHECK(knn(q0, x, 1000).size() == 1000);
    CHECK_THROWS_AS(knn(q0, x, 1001), RetrievalError);
    CHECK_THROWS_AS(knn(q0, Matrix(0, 8), 1), RetrievalError);
  }

  TEST_CASE("ties go to the lower index and reordering is stable") {
    Matrix x(4, 2);
    x << 1, 0, 2, 0, 0, 1, 3, 0;
    Vector q(2);
    q << 1, 0;
    const auto nb = knn(q, x, 3);
    CHECK(nb.members == std::vector<std::size_t>{0, 1, 3});
  }

  TEST_CASE("cosine and l2 rankings agree on unit vectors") {
    Rng rng(2);
    Matrix x = random_points(300, 6, rng);
    x.rowwise().normalize();
    const Vector q = x.row(5).transpose() * 0.7 + x.row(9).transpose() * 0.3;
    const Vector qn = q.normalized();
    const auto a = knn(qn, x, 30, Space::feature, Metric::cosine);
    const auto b = knn(qn, x, 30, Space::feature, Metric::euclidean);
    CHECK(a.members == b.members);
  }

  TEST_CASE("radius neighborhoods") {
    Rng rng(3);
    const Matrix x = random_points(500, 5, rng);
    Vector q(5);
    for (auto& v : q) v = rng.normal();
    for (double r : {0.1, 0.5, 1.0}) {
      const auto nb = radius_neighborhood(q, x, r);
      std::size_t expected = 0;
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double c = x.row(i).dot(q) / (x.row(i).norm() * q.norm());
        expected += c >= 1.0 - r;
      }
      CHECK(nb.size() == expected);
      for (double s : nb.similarities) CHECK(s >= 1.0 - r);
    }
    CHECK(radius_neighborhood(q, x, 2.0).size() == 500);
    Matrix y(3, 2);
    y << 1, 0, 2, 0, 1, 1;
    Vector e(2);
    e << 1, 0;
    CHECK(radius_neighborhood(e, y, 0.0).members == std::vector<std::size_t>{0, 1});
  }

  TEST_CASE("sparse dual norm") {
    Vector z = Vector::Zero(6);
    z(3) = 5.0;
    CHECK(sparse_dual_norm(z, 1) == 5.0);
    CHECK(sparse_dual_norm(z, 4) == 5.0);
    Rng rng(4);
    for (int t = 0; t < 100; ++t) {
      Vector v(8);
      for (auto& x : v) x = rng.normal();
      double best = 0.0;
      for (int a = 0; a < 8; ++a)
        for (int b = a + 1; b < 8; ++b)
          for (int c = b + 1; c < 8; ++c)
            best = std::max(best, std::sqrt(v(a) * v(a) + v(b) * v(b) + v(c) * v(c)));
      CHECK(sparse_dual_norm(v, 3) == doctest::Approx(best).epsilon(1e-12));
      CHECK(sparse_dual_norm(v, 8) == doctest::Approx(v.norm()));
      double prev = 0.0;
      for (std::size_t m = 1; m <= 8; ++m) {
        const double cur = sparse_dual_norm(v, m);
        CHECK(cur >= prev);
        CHECK(cur <= v.norm() + 1e-12);
        prev = cur;
      }
    }
  }

  TEST_CASE("containment slack") {
    WorldConfig cfg;
    cfg.concept_dim = 16;
    cfg.feature_dim = 16;
    cfg.law = SupportLaw::uniform;
    ConceptWorld w = make_world(cfg);
    w.projection = Matrix::Identity(16, 16);
    Rng rng(5);
    std::vector<Sample> data;
    for (int i = 0; i < 200; ++i) {
      Sample s = sample_point(w, rng);
      s.feature = s.phi.to_dense();
      data.push_back(s);
    }
    CHECK(containment_slack(data[0], data, 0.6) < 1e-12);

    WorldConfig c2;
    c2.seed = 2;
    const ConceptWorld w2 = make_world(c2);
    const auto d2 = sample_dataset(w2, 400, rng);
    for (double r : {0.2, 0.8, 1.5}) {
      const double eta = containment_slack(d2[1], d2, r);
      CHECK(eta >= 0.0);
      CHECK(eta <= 2.0);
    }
  }

  TEST_CASE("concentration diagnostics") {
    WorldConfig cfg;
    cfg.noise_variance = 0.0;
    const ConceptWorld w = make_world(cfg);
    Rng rng(6);
    const auto data = sample_dataset(w, 64, rng);
    const Matrix phi = concept_matrix(data);
    const auto quiet = concentration_diagnostics(phi, w, 2, 20, rng);
    for (double v : quiet.dual_norm_samples) CHECK(v == 0.0);
    const Vector zero = Vector::Zero(64);
    CHECK(concentration_diagnostics(phi, w, 2, 0, rng, &zero).eta_delta == 0.0);
  }

  TEST_CASE("O1: feature-space neighbours are nearly as concept-similar as concept-space ones") {
    WorldConfig cfg;
    cfg.seed = 12;
    cfg.concept_dim = 256;
    cfg.feature_dim = 64;
    cfg.sparsity = 2;
    const ConceptWorld w = make_world(cfg);
    Rng rng(7);
    const auto data = sample_dataset(w, 3000, rng);
    double via_feature = 0.0, via_concept = 0.0;
    const int queries = 30;
    for (int q = 0; q < queries; ++q) {
      const Sample test = sample_point(w, rng);
      const Vector qc = test.phi.to_dense();
      const auto nf = knn(test.feature, data, 50, Space::feature);
      const auto nc = knn(qc, data, 50, Space::concepts);
      via_feature += mean(neighbor_geometry(test, data, nf).concept_cosines);
      via_concept += mean(neighbor_geometry(test, data, nc).concept_cosines);
    }
    CHECK(std::abs(via_feature - via_concept) / queries <= 0.05);
  }

  TEST_CASE("quantile") {
    CHECK(quantile({1, 2, 3, 4, 5}, 0.5) == 3.0);
    CHECK(quantile({1, 2}, 0.5) == 1.5);
    CHECK(quantile({7}, 0.95) == 7.0);
  }
}
