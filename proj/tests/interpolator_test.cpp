#include <cmath>

#include "doctest.h"
#include "eoslab/datagen.hpp"
#include "eoslab/interpolator.hpp"
#include "eoslab/stability.hpp"
#include "support.hpp"

using namespace eoslab;
using namespace eoslab::testsupport;

namespace {

Dataset axis_pair() {
  Dataset d;
  d.X.resize(2, 2);
  d.X << 1.0, 0.0, 0.0, 1.0;
  d.y.resize(2);
  d.y << 1.0, -1.0;
  d.R = 1.0;
  d.D = 1.0;
  return d;
}

}  // namespace

TEST_CASE("two orthogonal samples, worked end to end") {
  const ReceptiveFields f = ReceptiveFields::fcn(2);
  const Dataset d = axis_pair();
  const AnchorMap anchors = find_anchors(d, f);

  REQUIRE(anchors.entries.size() == 2);
  CHECK(anchors.entries[0].sample == 0);
  CHECK(anchors.entries[0].patch == 0);
  CHECK(anchors.entries[0].rho == 0.0);  // the other sample is orthogonal
  CHECK(anchors.entries[1].rho == 0.0);

  const ModelParams p = construct_interpolant(d, f, anchors);
  REQUIRE(p.K == 2);
  CHECK(p.beta == 0.0);
  // Pre-rescaling the construction is w = p, b = 1/2, v = y/(1 - 1/2) = 2y;
  // sliding to |v| = 1 doubles the first layer.
  for (int k = 0; k < 2; ++k) {
    CHECK(std::abs(p.v[k]) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(p.b[k] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p.W.row(k).norm() == doctest::Approx(2.0).epsilon(1e-14));
  }
  CHECK(p.v[0] == doctest::Approx(1.0));
  CHECK(p.v[1] == doctest::Approx(-1.0));

  const InterpolationReport rep = verify_interpolant(p, d, f);
  CHECK(rep.max_residual <= 1e-10 * (1.0 + d.D));
  CHECK(rep.sharp_converged);
  // n = 2, J = 1, D = 1: the cap 1 + (D^2 + 2)/n = 5/2 is attained exactly.
  CHECK(rep.bound == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(rep.lambda_max == doctest::Approx(2.5).epsilon(1e-6));
  CHECK(rep.pass);
}

TEST_CASE("anchor selection failures name the sample") {
  const ReceptiveFields f = ReceptiveFields::fcn(2);
  SUBCASE("duplicated sample has no unique patch") {
    Dataset d;
    d.X.resize(2, 2);
    d.X << 1.0, 0.0, 1.0, 0.0;
    d.y.resize(2);
    d.y << 1.0, 2.0;
    d.R = 1.0;
    d.D = 2.0;
    CHECK_THROWS_WITH_AS((void)find_anchors(d, f),
                         doctest::Contains("interpolation assumption violated"),
                         std::runtime_error);
  }
  SUBCASE("off-sphere patch breaks the norm hypothesis") {
    Dataset d;
    d.X.resize(1, 2);
    d.X << 0.5, 0.0;
    d.y.resize(1);
    d.y << 1.0;
    d.R = 1.0;
    d.D = 1.0;
    CHECK_THROWS_AS((void)find_anchors(d, f), std::runtime_error);
  }
}

TEST_CASE("zero labels produce no neurons yet stay interpolated") {
  const ReceptiveFields f = ReceptiveFields::disjoint(4, 2);
  RngStream rng(3001, 0);
  Dataset d = unit_anchor_dataset(f, 6, 17);
  d.y[2] = 0.0;
  d.y[5] = 0.0;
  d.D = d.y.cwiseAbs().maxCoeff();

  const AnchorMap anchors = find_anchors(d, f);
  REQUIRE(anchors.entries.size() == 4);
  for (const auto& e : anchors.entries) CHECK(d.y[e.sample] != 0.0);

  const ModelParams p = construct_interpolant(d, f, anchors);
  CHECK(p.K == 4);
  const InterpolationReport rep = verify_interpolant(p, d, f);
  CHECK(rep.max_residual <= 1e-10 * (1.0 + d.D));
  CHECK(rep.pass);
}

TEST_CASE("all-zero labels give the empty network") {
  const ReceptiveFields f = ReceptiveFields::disjoint(6, 3);
  Dataset d = unit_anchor_dataset(f, 5, 4);
  d.y.setZero();
  d.D = 0.0;

  const AnchorMap anchors = find_anchors(d, f);
  CHECK(anchors.entries.empty());
  const ModelParams p = construct_interpolant(d, f, anchors);
  CHECK(p.K == 0);
  const InterpolationReport rep = verify_interpolant(p, d, f);
  CHECK(rep.max_residual == 0.0);
  CHECK(rep.lambda_max == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rep.bound == doctest::Approx(1.0 + 2.0 / (2.0 * 2.0) / 5.0).epsilon(1e-15));
  CHECK(rep.pass);
}

TEST_CASE("each constructed neuron fires on exactly one patch") {
  const ReceptiveFields f = ReceptiveFields::disjoint(6, 2);
  const Dataset d = unit_anchor_dataset(f, 8, 23);
  const AnchorMap anchors = find_anchors(d, f);
  const ModelParams p = construct_interpolant(d, f, anchors);
  REQUIRE(p.K == 8);

  const GateMatrix g = gates(p, f, d);
  const PatchCloud cloud = extract_cloud(d, f);
  const int nJ = 8 * 3;
  for (int k = 0; k < p.K; ++k) {
    int on = 0;
    for (int r = 0; r < nJ; ++r) on += g(r, k);
    CHECK(on == 1);
    // Same fact through the half-space statistics of the cloud.
    const double norm = p.W.row(k).norm();
    const Eigen::VectorXd u = p.W.row(k).transpose() / norm;
    const WeightStats s = weight_stats(cloud, u, p.b[k] / norm);
    CHECK(s.p_bar == doctest::Approx(1.0 / nJ).epsilon(1e-15));
  }
}

TEST_CASE("random unit-anchor datasets satisfy the curvature cap") {
  RngStream rng(3002, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const int m = 1 + static_cast<int>(rng.uniform_below(4));
    const int J = 1 + static_cast<int>(rng.uniform_below(4));
    const ReceptiveFields f = ReceptiveFields::disjoint(J * m, m);
    const int n = 2 + static_cast<int>(rng.uniform_below(20));
    const Dataset d = unit_anchor_dataset(f, n, 100 + trial);
    const AnchorMap anchors = find_anchors(d, f);
    const ModelParams p = construct_interpolant(d, f, anchors);

    for (int k = 0; k < p.K; ++k)
      CHECK(std::abs(p.v[k]) == doctest::Approx(1.0).epsilon(1e-15));

    const InterpolationReport rep = verify_interpolant(p, d, f);
    CHECK(rep.max_residual <= 1e-10 * (1.0 + d.D));
    CHECK(rep.bound == doctest::Approx(1.0 + (d.D * d.D + 2.0 / (J * J)) / n).epsilon(1e-15));
    CHECK(rep.lambda_max <= rep.bound + 1e-8);
    CHECK(rep.pass);

    const InterpolationReport flat = verify_interpolant(p, d, f, false);
    CHECK(flat.bound == doctest::Approx((d.D * d.D + 2.0 / (J * J)) / n).epsilon(1e-15));
    CHECK(flat.lambda_max <= flat.bound + 1e-8);
    CHECK(flat.max_residual == doctest::Approx(rep.max_residual).epsilon(1e-15));
  }
}
