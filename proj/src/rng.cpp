#include "eoslab/rng.hpp"

#include <cmath>

namespace eoslab {

void RngStream::gaussian_pair(double& z0, double& z1) {
  const double u1 = uniform_open();
  const double u2 = uniform();
  const double rad = std::sqrt(-2.0 * std::log(u1));
  const double ang = 2.0 * M_PI * u2;
  z0 = rad * std::cos(ang);
  z1 = rad * std::sin(ang);
}

std::uint64_t RngStream::uniform_below(std::uint64_t bound) {
  // Rejection from the top of the range; variable consumption, so only used
  // where counter strides are not load-bearing (subsampling, shuffles).
  if (bound == 0) return 0;
  const std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % bound);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % bound;
}

std::uint64_t stream_id(std::string_view label) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

void fill_gaussian(RngStream& rng, double* dst, std::size_t len) {
  std::size_t i = 0;
  for (; i + 1 < len; i += 2) rng.gaussian_pair(dst[i], dst[i + 1]);
  if (i < len) {
    double z0, z1;
    rng.gaussian_pair(z0, z1);
    dst[i] = z0;
  }
}

Eigen::VectorXd gaussian_vector(RngStream& rng, int len) {
  Eigen::VectorXd out(len);
  fill_gaussian(rng, out.data(), static_cast<std::size_t>(len));
  return out;
}

Eigen::VectorXd unit_vector(RngStream& rng, int m) {
  for (;;) {
    Eigen::VectorXd g = gaussian_vector(rng, m);
    const double norm = g.norm();
    if (norm > 0) return g / norm;
  }
}

}  // namespace eoslab
