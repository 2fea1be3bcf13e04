#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace groundlex {

// Log-space zero. Scores of impossible events are represented by this value
// and flagged by is_log_zero() rather than by raising.
inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline bool is_log_zero(double x) { return std::isinf(x) && x < 0.0; }

// log(exp(a) + exp(b)); kLogZero acts as the additive identity.
inline double log_add(double a, double b) {
  if (is_log_zero(a)) return b;
  if (is_log_zero(b)) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

double log_sum(const std::vector<double>& values);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ScoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Deterministic random source. std::mt19937_64 output is pinned by the
// standard; the distribution helpers are hand-rolled so that generated
// streams do not depend on the standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);

  // Box-Muller normal deviate.
  double normal(double mean = 0.0, double stddev = 1.0);

  // Uniform integer in [0, bound); bound > 0. Rejection sampled.
  int uniform_int(int bound);

  // Inversion-sampled Poisson; suitable for small means.
  int poisson(double mean);

  // Child generator for an independent, order-insensitive stream.
  Rng fork(std::uint64_t stream) const;

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(static_cast<int>(i)));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// Runs fn(0..count-1), distributing indices over at most `jobs` threads.
// Each index must write only to its own slot of any shared output, which
// keeps results identical for every job count.
void parallel_for(std::size_t count, int jobs,
                  const std::function<void(std::size_t)>& fn);

std::string format_double(double value);  // round-trip-exact decimal form

}  // namespace groundlex
