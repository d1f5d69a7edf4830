#pragma once

#include <array>
#include <cstdint>

namespace coagflow {

// Philox4x64-10 counter-based generator.  A (seed, stream) pair selects an
// independent substream; the whole run is reproducible from those two values.
class Philox {
 public:
  Philox() : Philox(0, 0) {}
  Philox(std::uint64_t seed, std::uint64_t stream);

  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~std::uint64_t{0}; }

  result_type operator()();

  // One full block for the given counter/key, exposed for known-answer tests.
  static std::array<std::uint64_t, 4> block(
      const std::array<std::uint64_t, 4>& counter,
      const std::array<std::uint64_t, 2>& key);

  double uniform();                    // [0, 1)
  double uniform_open();               // (0, 1]
  double exponential(double rate);     // mean 1/rate
  double uniform_range(double a, double b);
  std::uint64_t uniform_below(std::uint64_t n);  // {0, ..., n-1}, unbiased

 private:
  void refill();

  std::array<std::uint64_t, 4> counter_;
  std::array<std::uint64_t, 2> key_;
  std::array<std::uint64_t, 4> buffer_;
  int buffered_;
};

}  // namespace coagflow
