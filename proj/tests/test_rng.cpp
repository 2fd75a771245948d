#include "avgrl/rng.hpp"

#include <cmath>

#include "doctest.h"

using avgrl::Rng;

TEST_CASE("same seed gives the same stream") {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
}

TEST_CASE("state round-trips through text") {
  Rng a(7);
  for (int i = 0; i < 13; ++i) a.uniform();
  const Rng b = Rng::from_string(a.to_string());
  Rng a_copy = a;
  Rng b_copy = b;
  CHECK(a_copy.normal() == b_copy.normal());
  CHECK(a == b);
}

TEST_CASE("normal moments look standard") {
  Rng rng(3);
  const int n = 200000;
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("uniform_int covers its range without bias") {
  Rng rng(5);
  int counts[5] = {0, 0, 0, 0, 0};
  for (int i = 0; i < 50000; ++i) counts[rng.uniform_int(5)] += 1;
  for (const int c : counts) CHECK(std::abs(c - 10000) < 500);
}
