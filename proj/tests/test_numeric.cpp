#include "oracles.hpp"
#include "suplab/errors.hpp"
#include "suplab/numeric.hpp"
#include "suplab/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace suplab;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

}  // namespace

TEST_SUITE("numeric") {
  TEST_CASE("matmul") {
    Rng rng(1);
    const Matrix m = random_matrix(3, 3, rng);
    CHECK((matmul(Matrix::Identity(3, 3), m) - m).norm() == 0.0);

    Matrix a(2, 2), b(2, 1);
    a << 1, 2, 3, 4;
    b << 1, 1;
    const Matrix c = matmul(a, b);
    CHECK(c(0, 0) == 3.0);
    CHECK(c(1, 0) == 7.0);

    const Matrix x = random_matrix(5, 7, rng), y = random_matrix(7, 3, rng);
    CHECK((matmul(x, y) - oracle::triple_loop_matmul(x, y)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(matmul(x, x), DimensionError);
  }

  TEST_CASE("adam first step is -lr sign(g)") {
    AdamState s(1, 3, 0.01);
    s.epsilon = 0.0;
    Matrix p = Matrix::Zero(1, 3), g(1, 3);
    g << 2.0, -0.5, 7.0;
    s.update(p, g);
    CHECK(p(0, 0) == doctest::Approx(-0.01));
    CHECK(p(0, 1) == doctest::Approx(0.01));
    CHECK(p(0, 2) == doctest::Approx(-0.01));
    CHECK(s.step == 1);
  }

  TEST_CASE("adam leaves params alone on zero gradient") {
    AdamState s(2, 2, 0.1);
    Matrix p = Matrix::Constant(2, 2, 3.0);
    for (int i = 0; i < 5; ++i) s.update(p, Matrix::Zero(2, 2));
    CHECK((p.array() == 3.0).all());
    CHECK(s.step == 5);
  }

  TEST_CASE("adam matches a hand-stepped trace on w^2/2") {
    double w = 1.0, m = 0.0, v = 0.0;
    const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    AdamState s(1, 1, lr);
    Matrix p = Matrix::Constant(1, 1, 1.0);
    for (int t = 1; t <= 10; ++t) {
      const double g = w;
      m = b1 * m + (1 - b1) * g;
      v = b2 * v + (1 - b2) * g * g;
      const double mh = m / (1 - std::pow(b1, t));
      const double vh = v / (1 - std::pow(b2, t));
      w -= lr * mh / (std::sqrt(vh) + eps);
      s.update(p, p);
    }
    CHECK(std::abs(p(0, 0) - w) < 1e-10);
  }

  TEST_CASE("adam step size with constant gradient") {
    AdamState s(1, 1, 0.01);
    Matrix p = Matrix::Zero(1, 1);
    double prev = 0.0, delta = 0.0;
    for (int i = 0; i < 5000; ++i) {
      s.update(p, Matrix::Constant(1, 1, 0.3));
      delta = prev - p(0, 0);
      prev = p(0, 0);
    }
    CHECK(delta == doctest::Approx(0.01 * 0.3 / (0.3 + 1e-8)).epsilon(1e-6));
  }

  TEST_CASE("adam rejects non-finite gradients without mutating") {
    AdamState s(1, 2, 0.1);
    Matrix p = Matrix::Ones(1, 2), g(1, 2);
    g << 1.0, std::nan("");
    CHECK_THROWS_AS(s.update(p, g), NumericError);
    CHECK(s.step == 0);
    CHECK((p.array() == 1.0).all());
  }

  TEST_CASE("adam functional form and weight decay") {
    AdamState a(1, 1, 0.1, 0.5), b(1, 1, 0.1);
    Matrix p = Matrix::Constant(1, 1, 2.0);
    const Matrix q = adam_step(a, p, Matrix::Zero(1, 1));
    CHECK(q(0, 0) < 2.0);
    CHECK(p(0, 0) == 2.0);
    const Matrix r = adam_step(b, p, Matrix::Constant(1, 1, 1.0));
    CHECK(q(0, 0) == doctest::Approx(r(0, 0)));
  }

  TEST_CASE("clip_gradient_norm") {
    Matrix g(1, 2);
    g << 0.3, 0.4;
    CHECK((clip_gradient_norm(g, 1.0) - g).norm() == 0.0);
    g << 3.0, 4.0;
    const Matrix c = clip_gradient_norm(g, 1.0);
    CHECK(c(0, 0) == doctest::Approx(0.6));
    CHECK(c(0, 1) == doctest::Approx(0.8));
    CHECK(std::abs(c.norm() - 1.0) < 1e-12);

    Matrix a = Matrix::Constant(2, 2, 1.0), b = Matrix::Constant(1, 1, 2.0);
    const double before = clip_gradient_norm({&a, &b}, 0.5);
    CHECK(before == doctest::Approx(std::sqrt(8.0)));
    CHECK(std::sqrt(a.squaredNorm() + b.squaredNorm()) == doctest::Approx(0.5));
    CHECK_THROWS_AS(clip_gradient_norm(g, 0.0), ConfigError);
  }

  TEST_CASE("warmup cosine schedule") {
    const Schedule s = Schedule::warmup_cosine(3e-4, 5000, 100000);
    CHECK(schedule_value(s, 0) == 0.0);
    CHECK(schedule_value(s, 5000) == doctest::Approx(3e-4));
    CHECK(schedule_value(s, 52500) == doctest::Approx(1.5e-4));
    CHECK(std::abs(schedule_value(s, 100000)) < 1e-18);
    CHECK(std::abs(schedule_value(s, 200000)) < 1e-18);
    CHECK(std::abs(schedule_value(s, 5000) - schedule_value(s, 4999)) < 1e-7);
    for (std::int64_t t = 0; t < 100000; t += 777) {
      const double v = schedule_value(s, t);
      CHECK(v >= 0.0);
      CHECK(v <= 3e-4 + 1e-18);
    }
    CHECK_THROWS_AS(Schedule::warmup_cosine(1.0, 10, 10).validate(), ConfigError);
  }

  TEST_CASE("sparsity ramp") {
    const Schedule s = Schedule::linear_ramp(128, 16, 10000);
    CHECK(std::lround(schedule_value(s, 5000)) == 72);
    CHECK(schedule_value(s, 0) == 128.0);
    CHECK(std::abs(schedule_value(s, 10000) - 16.0) < 1e-12);
    CHECK(schedule_value(s, 20000) == 16.0);
    CHECK(schedule_value(Schedule::constant(2.5), 123) == 2.5);
  }

  TEST_CASE("finite differences") {
    Matrix w = Matrix::Constant(1, 1, 3.0);
    const Matrix g = finite_difference_gradient([](const Matrix& p) { return p(0, 0) * p(0, 0); }, w, 1e-4);
    CHECK(g(0, 0) == doctest::Approx(6.0).epsilon(1e-8));
    const Matrix z = finite_difference_gradient([](const Matrix&) { return 4.0; }, Matrix::Ones(2, 3), 1e-3);
    CHECK(z.norm() == 0.0);
  }

  TEST_CASE("require_finite") {
    Vector v = Vector::Ones(3);
    CHECK_NOTHROW(require_finite(v, "v"));
    v(1) = INFINITY;
    CHECK_THROWS_AS(require_finite(v, "v"), NumericError);
  }
}
