#include "suplab/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

using namespace suplab;

TEST_SUITE("rng") {
  TEST_CASE("same seed and stream reproduce") {
    Rng a(42, 7), b(42, 7), c(42, 8);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
      const auto x = a(), y = b(), z = c();
      CHECK(x == y);
      differs |= x != z;
    }
    CHECK(differs);
  }

  TEST_CASE("split streams are independent of consumption") {
    Rng a(5);
    const Rng s1 = a.split(3);
    for (int i = 0; i < 10; ++i) a();
    Rng s2 = Rng(5).split(3);
    Rng s1c = s1;
    for (int i = 0; i < 20; ++i) CHECK(s1c() == s2());
  }

  TEST_CASE("uniform and normal moments") {
    Rng r(11);
    double su = 0, sn = 0, sn2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double u = r.uniform();
      CHECK_UNARY(u >= 0.0);
      CHECK_UNARY(u < 1.0);
      su += u;
      const double z = r.normal();
      sn += z;
      sn2 += z * z;
    }
    CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(std::abs(sn / n) < 0.01);
    CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
  }

  TEST_CASE("below is in range and roughly uniform") {
    Rng r(3);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 70000; ++i) ++counts[r.below(7)];
    for (int c : counts) CHECK(std::abs(c - 10000) < 500);
  }

  TEST_CASE("sample without replacement") {
    Rng r(9);
    const auto s = r.sample_without_replacement(50, 20);
    CHECK(s.size() == 20);
    CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == 20);
    CHECK(*std::max_element(s.begin(), s.end()) < 50);
  }

  TEST_CASE("shuffle is a permutation") {
    Rng r(1);
    std::vector<int> v(100);
    for (int i = 0; i < 100; ++i) v[i] = i;
    r.shuffle(std::span<int>(v));
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 100; ++i) CHECK(sorted[i] == i);
    CHECK(v != sorted);
  }
}
