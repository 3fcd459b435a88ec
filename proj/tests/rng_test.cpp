#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "eoslab/rng.hpp"

using namespace eoslab;

TEST_CASE("streams replay exactly and never collide across labels") {
  RngStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  std::vector<std::uint64_t> seq;
  for (int i = 0; i < 64; ++i) seq.push_back(a.next_u64());
  for (int i = 0; i < 64; ++i) CHECK(b.next_u64() == seq[i]);
  int same_c = 0, same_d = 0;
  for (int i = 0; i < 64; ++i) {
    if (c.next_u64() == seq[i]) ++same_c;
    if (d.next_u64() == seq[i]) ++same_d;
  }
  CHECK(same_c == 0);
  CHECK(same_d == 0);
}

TEST_CASE("counter jumps are equivalent to sequential draws") {
  RngStream a(1, 2);
  for (int i = 0; i < 10; ++i) a.next_u64();
  const std::uint64_t tenth = a.next_u64();
  RngStream b(1, 2);
  b.set_counter(10);
  CHECK(b.next_u64() == tenth);
  CHECK(b.counter() == 11);
}

TEST_CASE("gaussian draws consume a fixed, even number of outputs") {
  RngStream rng(5, 0);
  CHECK(rng.counter() == 0);
  (void)rng.gaussian();
  CHECK(rng.counter() == 2);
  double z0, z1;
  rng.gaussian_pair(z0, z1);
  CHECK(rng.counter() == 4);

  double buf7[7], buf8[8];
  RngStream f1(5, 1), f2(5, 1);
  fill_gaussian(f1, buf7, 7);
  CHECK(f1.counter() == 8);
  fill_gaussian(f2, buf8, 8);
  CHECK(f2.counter() == 8);
  // The shorter fill is a prefix of the longer one.
  for (int i = 0; i < 7; ++i) CHECK(buf7[i] == buf8[i]);
}

TEST_CASE("uniform variants stay inside their ranges") {
  RngStream rng(9, 9);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double v = rng.uniform_open();
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("uniform_below covers the range without bias artifacts") {
  RngStream rng(17, 3);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const std::uint64_t k = rng.uniform_below(7);
    REQUIRE(k < 7);
    ++counts[static_cast<int>(k)];
  }
  for (int k = 0; k < 7; ++k) {
    CHECK(counts[k] > 9000);  // expected 10000, generous band
    CHECK(counts[k] < 11000);
  }
  CHECK(rng.uniform_below(1) == 0);
}

TEST_CASE("gaussian moments look standard normal") {
  RngStream rng(123, 0);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.gaussian();
    sum += z;
    sumsq += z * z;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("stream ids separate nearby labels") {
  std::set<std::uint64_t> ids;
  ids.insert(stream_id("init"));
  ids.insert(stream_id("init/"));
  ids.insert(stream_id("init/arch=fcn/d=10/seed=0"));
  ids.insert(stream_id("init/arch=fcn/d=10/seed=1"));
  ids.insert(stream_id("data/arch=fcn/d=10/seed=0"));
  ids.insert(stream_id(""));
  CHECK(ids.size() == 6);
}

TEST_CASE("unit_vector is unit norm and deterministic") {
  RngStream a(7, 7), b(7, 7);
  for (int m : {1, 2, 5, 33}) {
    const Eigen::VectorXd u = unit_vector(a, m);
    CHECK(u.size() == m);
    CHECK(std::abs(u.norm() - 1.0) < 1e-12);
    CHECK((unit_vector(b, m) - u).norm() == 0.0);
  }
}
