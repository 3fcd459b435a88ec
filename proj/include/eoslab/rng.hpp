#pragma once
#include <cstdint>
#include <cstddef>
#include <string_view>

#include <Eigen/Dense>

namespace eoslab {

// Counter-based random stream. Output k of stream (seed, stream) is
//
//   mix(base + k * GAMMA),   base = mix(seed ^ mix(stream * GAMMA + STREAM_SALT)),
//
// where mix is the splitmix64 finalizer (Steele/Lea/Flood constants) and
// GAMMA = 0x9E3779B97F4A7C15 (2^64/φ). Everything is unsigned 64-bit arithmetic,
// so the sequence is identical on every platform, and jumping the counter is O(1).
// That jump is what gives sample i of a generated dataset a fixed counter window,
// making a size-n train set a byte-exact prefix of a size-n' > n one.
class RngStream {
 public:
  static constexpr std::uint64_t GAMMA = 0x9E3779B97F4A7C15ull;
  static constexpr std::uint64_t STREAM_SALT = 0x632BE59BD9B4E019ull;

  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
      : base_(mix(seed ^ mix(stream * GAMMA + STREAM_SALT))) {}

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() { return mix(base_ + (counter_++) * GAMMA); }

  std::uint64_t counter() const { return counter_; }
  void set_counter(std::uint64_t c) { counter_ = c; }

  // Uniform on [0,1) with 53-bit resolution; consumes one output.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0,1]; safe as a log() argument. Consumes one output.
  double uniform_open() { return double((next_u64() >> 11) + 1) * 0x1.0p-53; }

  // Box–Muller pair: exactly two outputs consumed, no rejection. Fixed
  // consumption keeps per-sample counter strides exact.
  void gaussian_pair(double& z0, double& z1);

  // One standard normal; consumes exactly two outputs (the sine partner of the
  // Box–Muller pair is discarded so stride bookkeeping stays in whole pairs).
  double gaussian() {
    double z0, z1;
    gaussian_pair(z0, z1);
    return z0;
  }

  std::uint64_t uniform_below(std::uint64_t bound);  // unbiased integer in [0, bound)

 private:
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

// FNV-1a 64-bit of a label; used to derive stream ids from readable names.
std::uint64_t stream_id(std::string_view label);

// Fills len gaussians consuming exactly 2*ceil(len/2) outputs.
void fill_gaussian(RngStream& rng, double* dst, std::size_t len);

Eigen::VectorXd gaussian_vector(RngStream& rng, int len);

// Uniform direction on the unit sphere of R^m (normalized gaussian vector;
// resamples the measure-zero event of a zero draw).
Eigen::VectorXd unit_vector(RngStream& rng, int m);

}  // namespace eoslab
