#include "doctest.h"

#include <atomic>
#include <cmath>

#include "groundlex/common.hpp"

using namespace groundlex;

TEST_CASE("log_add basics") {
  CHECK(log_add(kLogZero, kLogZero) == kLogZero);
  CHECK(log_add(0.0, kLogZero) == 0.0);
  CHECK(log_add(std::log(2.0), std::log(3.0)) == doctest::Approx(std::log(5.0)));
  // no overflow for large magnitudes
  CHECK(log_add(-1000.0, -1000.0) == doctest::Approx(-1000.0 + std::log(2.0)));
}

TEST_CASE("log_sum matches pairwise accumulation") {
  std::vector<double> values{-1.0, -2.5, -0.3, kLogZero, -4.0};
  double expected = kLogZero;
  for (double v : values) expected = log_add(expected, v);
  CHECK(log_sum(values) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(is_log_zero(log_sum({kLogZero, kLogZero})));
}

TEST_CASE("rng reproducibility and fork independence") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.uniform() == b.uniform());
  }
  Rng base(7);
  Rng f1 = base.fork(1);
  Rng f1_again = base.fork(1);
  CHECK(f1.next_u64() == f1_again.next_u64());
  CHECK(base.fork(1).next_u64() != base.fork(2).next_u64());
}

TEST_CASE("rng uniform_int is in range") {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    int v = rng.uniform_int(7);
    CHECK(v >= 0);
    CHECK(v < 7);
  }
  CHECK_THROWS_AS(rng.uniform_int(0), ConfigError);
}

TEST_CASE("parallel_for covers every index once regardless of job count") {
  for (int jobs : {1, 2, 5}) {
    std::vector<std::atomic<int>> hits(257);
    for (auto& h : hits) h = 0;
    parallel_for(hits.size(), jobs, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) CHECK(h == 1);
  }
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-12, 123456.789, 0.0}) {
    CHECK(std::stod(format_double(v)) == v);
  }
}
