#pragma once

#include <cstdint>
#include <limits>

namespace dtrmis {

/// Named sub-streams of one replication.
enum class Purpose : std::uint64_t {
  generate = 1,
  split = 2,
  corrupt = 3,
  bootstrap = 4,
  test_data = 5,
  evaluate = 6,
};

/// Counter-based generator keyed by (seed, replication, purpose).
///
/// Output k of a stream is a SplitMix64 finalization of key + k * golden, so a
/// stream is fully determined by its key and the number of draws taken;
/// streams with different keys are statistically independent. Satisfies
/// UniformRandomBitGenerator.
class Stream {
 public:
  using result_type = std::uint64_t;

  Stream(std::uint64_t seed, std::uint64_t replication, Purpose purpose,
         std::uint64_t subkey = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double normal(double mean = 0.0, double sd = 1.0);
  bool bernoulli(double p) { return uniform() < p; }
  /// +1 with probability p, -1 otherwise.
  int sign(double p) { return bernoulli(p) ? 1 : -1; }
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

  std::uint64_t draws() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace dtrmis
