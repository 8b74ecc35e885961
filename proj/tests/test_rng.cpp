#include "ope/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "doctest.h"

TEST_CASE("StreamRng is deterministic for a fixed key") {
  ope::StreamRng a(42);
  ope::StreamRng b(42);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
}

TEST_CASE("derive_key separates replications and purposes") {
  using namespace ope;
  const std::uint64_t seed = 7;
  const std::uint64_t p1[] = {0, rng_purpose::kContext};
  const std::uint64_t p2[] = {0, rng_purpose::kReward};
  const std::uint64_t p3[] = {1, rng_purpose::kContext};
  const auto k1 = StreamRng::derive_key(seed, p1);
  const auto k2 = StreamRng::derive_key(seed, p2);
  const auto k3 = StreamRng::derive_key(seed, p3);
  CHECK(k1 != k2);
  CHECK(k1 != k3);
  CHECK(k2 != k3);
  // Same path, same key.
  CHECK(k1 == StreamRng::derive_key(seed, p1));
  // Substreams replay the derived key.
  CHECK(StreamRng::substream(seed, 0, rng_purpose::kContext).next_u64() ==
        StreamRng(k1).next_u64());
}

TEST_CASE("next_unit stays inside the open interval") {
  ope::StreamRng r(123);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.next_unit();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("next_unit mean and variance are near uniform moments") {
  ope::StreamRng r(2024);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = r.next_unit();
    sum += u;
    sumsq += u * u;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean - 0.5) < 0.002);
  CHECK(std::abs(var - 1.0 / 12.0) < 0.002);
}

TEST_CASE("next_normal has standard moments") {
  ope::StreamRng r(9);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = r.next_normal();
    sum += z;
    sumsq += z * z;
  }
  const double mean = sum / n;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(sumsq / n - 1.0) < 0.02);
}

TEST_CASE("next_index covers the full range uniformly") {
  ope::StreamRng r(5);
  std::array<int, 7> counts{};
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const int k = r.next_index(7);
    REQUIRE(k >= 0);
    REQUIRE(k < 7);
    counts[static_cast<std::size_t>(k)]++;
  }
  for (int c : counts) {
    CHECK(c > 9000);
    CHECK(c < 11000);
  }
}

TEST_CASE("next_categorical follows the supplied masses") {
  ope::StreamRng r(77);
  const std::vector<double> probs = {0.1, 0.2, 0.7};
  std::array<int, 3> counts{};
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    counts[static_cast<std::size_t>(r.next_categorical(probs))]++;
  }
  CHECK(std::abs(counts[0] / double(n) - 0.1) < 0.01);
  CHECK(std::abs(counts[1] / double(n) - 0.2) < 0.01);
  CHECK(std::abs(counts[2] / double(n) - 0.7) < 0.01);
}

TEST_CASE("shuffled_indices is a permutation and deterministic") {
  ope::StreamRng a(31), b(31);
  auto pa = a.shuffled_indices(10);
  auto pb = b.shuffled_indices(10);
  CHECK(pa == pb);
  std::sort(pa.begin(), pa.end());
  std::vector<int> expect(10);
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(pa == expect);
}

TEST_CASE("distinct keys give decorrelated streams") {
  ope::StreamRng a(1), b(2);
  int agree = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    agree += (a.next_u64() >> 63) == (b.next_u64() >> 63);
  }
  // Top bits should agree about half the time.
  CHECK(agree > n / 2 - 300);
  CHECK(agree < n / 2 + 300);
}
