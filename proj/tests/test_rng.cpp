#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

#include "ntklab/rng.hpp"

using ntklab::Rng;

TEST_CASE("same seed reproduces the stream bit for bit") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  Rng c(42), d(42);
  for (int i = 0; i < 1000; ++i) {
    const double x = c.normal();
    const double y = d.normal();
    CHECK(std::memcmp(&x, &y, sizeof(double)) == 0);
  }
}

TEST_CASE("distinct seeds give distinct streams") {
  Rng a(1), b(2);
  int same = 0;
  for (int i = 0; i < 64; ++i)
    if (a.next_u64() == b.next_u64()) ++same;
  CHECK(same == 0);
}

TEST_CASE("uniform draws live in [0,1) and positive variant in (0,1]") {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double v = rng.uniform_pos();
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("normal consumes exactly two words per draw") {
  Rng rng(9);
  const std::uint64_t before = rng.draws();
  rng.normal();
  CHECK(rng.draws() == before + 2);
}

TEST_CASE("normal moments match a standard Gaussian within 5 sigma") {
  // With n = 1e6 draws the sample mean has sd 1/sqrt(n) and the sample
  // variance has sd ~ sqrt(2/n); both checks sit at five of those.
  const int n = 1000000;
  Rng rng(123);
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sumsq += z * z;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 5.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(var - 1.0) < 5.0 * std::sqrt(2.0 / n));
}

TEST_CASE("child streams are reproducible and independent of parent state") {
  Rng parent(77);
  parent.normal();  // advance the parent; children must not care
  Rng c0 = parent.child(0);
  Rng c1 = parent.child(1);
  CHECK(c0.seed() != c1.seed());
  CHECK(c0.next_u64() != c1.next_u64());

  Rng parent2(77);
  Rng c0_again = parent2.child(0);
  CHECK(c0.seed() == c0_again.seed());
}
