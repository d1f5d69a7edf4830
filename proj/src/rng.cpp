#include "coagflow/rng.hpp"

#include <cmath>

namespace coagflow {

namespace {

constexpr std::uint64_t kMult0 = 0xD2E7470EE14C6C93ULL;
constexpr std::uint64_t kMult1 = 0xCA5A826395121157ULL;
constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi,
                    std::uint64_t& lo) {
  unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
  hi = static_cast<std::uint64_t>(p >> 64);
  lo = static_cast<std::uint64_t>(p);
}

}  // namespace

Philox::Philox(std::uint64_t seed, std::uint64_t stream)
    : counter_{0, 0, 0, 0}, key_{seed, stream}, buffer_{}, buffered_(0) {}

std::array<std::uint64_t, 4> Philox::block(
    const std::array<std::uint64_t, 4>& counter,
    const std::array<std::uint64_t, 2>& key) {
  std::array<std::uint64_t, 4> x = counter;
  std::uint64_t k0 = key[0], k1 = key[1];
  for (int round = 0; round < 10; ++round) {
    std::uint64_t hi0, lo0, hi1, lo1;
    mulhilo(kMult0, x[0], hi0, lo0);
    mulhilo(kMult1, x[2], hi1, lo1);
    x = {hi1 ^ x[1] ^ k0, lo1, hi0 ^ x[3] ^ k1, lo0};
    k0 += kWeyl0;
    k1 += kWeyl1;
  }
  return x;
}

void Philox::refill() {
  buffer_ = block(counter_, key_);
  buffered_ = 4;
  for (int i = 0; i < 4; ++i) {
    if (++counter_[i] != 0) break;  // 256-bit little-endian increment
  }
}

Philox::result_type Philox::operator()() {
  if (buffered_ == 0) refill();
  return buffer_[4 - buffered_--];
}

double Philox::uniform() {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double Philox::uniform_open() { return 1.0 - uniform(); }

double Philox::exponential(double rate) {
  return -std::log(uniform_open()) / rate;
}

double Philox::uniform_range(double a, double b) {
  return a + (b - a) * uniform();
}

std::uint64_t Philox::uniform_below(std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = max() - max() % n;
  std::uint64_t x;
  do {
    x = (*this)();
  } while (x >= limit);
  return x % n;
}

}  // namespace coagflow
