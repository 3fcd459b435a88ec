#include <cmath>
#include <limits>

#include "doctest.h"
#include "eoslab/datagen.hpp"
#include "eoslab/stability.hpp"
#include "support.hpp"

using namespace eoslab;
using namespace eoslab::testsupport;

namespace {

PatchCloud cloud_from_rows(std::initializer_list<std::vector<double>> rows) {
  PatchCloud c;
  c.m = static_cast<int>(rows.begin()->size());
  c.points.resize(static_cast<long>(rows.size()), c.m);
  int i = 0;
  for (const auto& r : rows) {
    for (int j = 0; j < c.m; ++j) c.points(i, j) = r[static_cast<std::size_t>(j)];
    ++i;
  }
  return c;
}

double wpn_by_hand(const ModelParams& p, const PatchCloud& cloud) {
  double acc = 0.0;
  for (int k = 0; k < p.K; ++k) {
    const double norm = p.W.row(k).norm();
    const Eigen::VectorXd u = p.W.row(k).transpose() / norm;
    acc += std::abs(p.v[k]) * norm * weight_function(cloud, u, p.b[k] / norm);
  }
  return acc;
}

double simpson_density_mass(const SphereMarginals& sm) {
  // Integrate f_d(sin s) cos s over s in [-pi/2, pi/2]; the substitution
  // removes the endpoint singularity that appears for d = 2. At the exact
  // endpoints the integrand is the limit c_d cos(s)^(d-2), i.e. c_2 for
  // d = 2 and 0 otherwise.
  const int segments = 200000;
  const double a = -M_PI / 2.0, b = M_PI / 2.0;
  const double h = (b - a) / segments;
  auto f = [&](double s) {
    const double c = std::cos(s);
    if (c <= 0.0) return sm.d == 2 ? sm.c_d : 0.0;
    return sm.density(std::sin(s)) * c;
  };
  double acc = f(a) + f(b);
  for (int i = 1; i < segments; ++i) acc += (i % 2 == 1 ? 4.0 : 2.0) * f(a + i * h);
  return acc * h / 3.0;
}

}  // namespace

TEST_CASE("weight statistics on tiny clouds") {
  const PatchCloud c = cloud_from_rows({{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}});
  Eigen::VectorXd u(2);
  u << 1.0, 0.0;

  SUBCASE("half-space with one strict member") {
    const WeightStats s = weight_stats(c, u, 0.5);
    CHECK(s.p_bar == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(s.r_bar == doctest::Approx(0.5 / 3.0).epsilon(1e-15));
    CHECK(s.a_bar[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(s.a_bar[1] == 0.0);
  }
  SUBCASE("boundary points are excluded") {
    const WeightStats s = weight_stats(c, u, 1.0);
    CHECK(s.p_bar == 0.0);
    CHECK(s.r_bar == 0.0);
    CHECK(s.a_bar.norm() == 0.0);
  }
  SUBCASE("empty half-space gives zero weight") {
    CHECK(weight_product_form(c, u, 2.0) == 0.0);
    CHECK(weight_conditional_form(c, u, 2.0) == 0.0);
  }
}

TEST_CASE("single-point clouds carry no weight") {
  // With one point, one of the two orientations is always inactive, so the
  // orientation minimum vanishes for every hyperplane.
  const PatchCloud c = cloud_from_rows({{0.3, -0.7}});
  RngStream rng(2101, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::VectorXd u = unit_vector(rng, 2);
    const double t = 2.0 * rng.uniform() - 1.0;
    CHECK(weight_function(c, u, t) == 0.0);
  }
}

TEST_CASE("antipodal clouds make the orientations agree") {
  RngStream rng(2102, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 2 + static_cast<int>(rng.uniform_below(4));
    const int half = 5 + static_cast<int>(rng.uniform_below(10));
    PatchCloud c;
    c.m = m;
    c.points.resize(2 * half, m);
    for (int i = 0; i < half; ++i) {
      const Eigen::VectorXd p = gaussian_vector(rng, m);
      c.points.row(2 * i) = p;
      c.points.row(2 * i + 1) = -p;
    }
    const Eigen::VectorXd u = unit_vector(rng, m);
    const double t = 0.5 * (2.0 * rng.uniform() - 1.0);
    const double fwd = weight_product_form(c, u, t);
    const double rev = weight_product_form(c, Eigen::VectorXd(-u), -t);
    CHECK(rel_err(fwd, rev) < 1e-12);
    CHECK(rel_err(weight_function(c, u, t), fwd) < 1e-12);
  }
}

TEST_CASE("product and conditional forms coincide on active half-spaces") {
  RngStream rng(2103, 0);
  int active_seen = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 1 + static_cast<int>(rng.uniform_below(5));
    PatchCloud c;
    c.m = m;
    c.points.resize(20, m);
    for (int i = 0; i < 20; ++i) c.points.row(i) = gaussian_vector(rng, m);
    const Eigen::VectorXd u = unit_vector(rng, m);
    const double t = 1.5 * (2.0 * rng.uniform() - 1.0);
    if (weight_stats(c, u, t).p_bar == 0.0) continue;
    ++active_seen;
    const double prod = weight_product_form(c, u, t);
    const double cond = weight_conditional_form(c, u, t);
    CHECK(rel_err(prod, cond) < 1e-10);
  }
  CHECK(active_seen > 100);
}

TEST_CASE("weighted path norm") {
  RngStream rng(2104, 0);
  const ReceptiveFields f = ReceptiveFields::disjoint(6, 3);
  const ModelParams p = random_params(f, 5, rng);
  const Dataset d = sphere_dataset(f, 12, rng);
  const PatchCloud cloud = extract_cloud(d, f);
  REQUIRE(cloud.N() == 12 * 2);
  REQUIRE(cloud.source == PatchCloud::Source::dataset);

  SUBCASE("matches the per-neuron assembly") {
    CHECK(rel_err(weighted_path_norm(p, cloud), wpn_by_hand(p, cloud)) < 1e-12);
  }
  SUBCASE("width zero means zero") {
    ModelParams empty;
    empty.K = 0;
    empty.m = 3;
    empty.W.resize(0, 3);
    empty.beta = 4.0;
    CHECK(weighted_path_norm(empty, cloud) == 0.0);
  }
  SUBCASE("invariant under the per-neuron rescaling") {
    ModelParams q = p;
    const double c = 3.7;
    q.W.row(2) *= c;
    q.b[2] *= c;
    q.v[2] /= c;
    CHECK(rel_err(weighted_path_norm(q, cloud), weighted_path_norm(p, cloud)) < 1e-12);
  }
  SUBCASE("invariant under neuron permutation") {
    ModelParams q = p;
    for (int k = 0; k < p.K; ++k) {
      const int src = (k + 2) % p.K;
      q.W.row(k) = p.W.row(src);
      q.b[k] = p.b[src];
      q.v[k] = p.v[src];
    }
    CHECK(rel_err(weighted_path_norm(q, cloud), weighted_path_norm(p, cloud)) < 1e-12);
  }
  SUBCASE("capped by the unweighted path norm when every weight is small") {
    double unweighted = 0.0;
    bool all_below_one = true;
    for (int k = 0; k < p.K; ++k) {
      const double norm = p.W.row(k).norm();
      unweighted += std::abs(p.v[k]) * norm;
      const Eigen::VectorXd u = p.W.row(k).transpose() / norm;
      if (weight_function(cloud, u, p.b[k] / norm) > 1.0) all_below_one = false;
    }
    REQUIRE(all_below_one);  // unit-sphere patch clouds keep g modest
    CHECK(weighted_path_norm(p, cloud) <= unweighted + 1e-12);
  }
  SUBCASE("zero filters are rejected") {
    ModelParams q = p;
    q.W.row(0).setZero();
    CHECK_THROWS_AS((void)weighted_path_norm(q, cloud), std::invalid_argument);
  }
}

TEST_CASE("certificate hand case with no hidden neurons") {
  ReceptiveFields f = ReceptiveFields::fcn(2);
  ModelParams p;
  p.K = 0;
  p.m = 2;
  p.W.resize(0, 2);
  p.beta = 0.5;
  RngStream rng(2105, 0);
  Dataset d = sphere_dataset(f, 6, rng);

  const Certificate cert = certificate(p, f, d, 0.25);
  const double L = loss(p, f, d);
  CHECK(cert.lhs == 0.0);
  CHECK(cert.loss == doctest::Approx(L).epsilon(1e-12));
  CHECK(cert.sharp_converged);
  CHECK(cert.sharpness == doctest::Approx(1.0).epsilon(1e-9));
  const double want_rhs = (d.R + 1.0) * std::sqrt(2.0 * L);
  CHECK(cert.rhs == doctest::Approx(want_rhs).epsilon(1e-9));
  REQUIRE(cert.rhs_beos.has_value());
  CHECK(*cert.rhs_beos == doctest::Approx(4.0 - 0.5 + want_rhs).epsilon(1e-9));
  CHECK(cert.holds);
  CHECK(cert.margin == std::numeric_limits<double>::infinity());
}

TEST_CASE("certificate holds at random points and matches its pieces") {
  RngStream rng(2106, 0);
  ReceptiveFields f;
  ModelParams p;
  Dataset d;
  for (int trial = 0; trial < 25; ++trial) {
    margin_safe_instance(rng, 1 + trial % 3, 1 + trial % 4, 1 + trial % 6, 2 + trial % 9,
                         1e-4, f, p, d);
    const Certificate cert = certificate(p, f, d);
    CHECK(cert.holds);
    CHECK(cert.sharp_converged);
    CHECK(cert.slack == doctest::Approx(cert.rhs - cert.lhs).epsilon(1e-15));

    const PatchCloud cloud = extract_cloud(d, f);
    CHECK(rel_err(cert.lhs, wpn_by_hand(p, cloud)) < 1e-12);
    const double lam = dense_top_eig(dense_hessian(p, f, d));
    const double want_rhs =
        (lam + 2.0 * (d.R + 1.0) * std::sqrt(2.0 * loss(p, f, d)) - 1.0) / 2.0;
    CHECK(rel_err(cert.rhs, want_rhs) < 1e-6);
    CHECK(cert.margin == doctest::Approx(min_margin(p, f, d)).epsilon(1e-15));
    CHECK_FALSE(cert.rhs_beos.has_value());
  }
}

TEST_CASE("one-coordinate sphere marginal") {
  SUBCASE("density integrates to one for d up to 64") {
    for (int d : {2, 3, 4, 5, 8, 16, 33, 64}) {
      const SphereMarginals sm = SphereMarginals::make(d);
      CHECK(std::abs(simpson_density_mass(sm) - 1.0) < 1e-8);
    }
  }
  SUBCASE("d = 3 is the uniform marginal") {
    const SphereMarginals sm = SphereMarginals::make(3);
    CHECK(sm.alpha == 0.0);
    CHECK(sm.c_d == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(sm.density(0.3) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(sm.density(1.5) == 0.0);
  }
}

TEST_CASE("polynomial tail brackets") {
  SUBCASE("d = 3 collapses the brackets to the exact values") {
    for (double t : {0.0, 0.1, 0.4, 0.9}) {
      const Bracket tail = sphere_tail(3, t);
      CHECK(tail.lower == doctest::Approx((1.0 - t) / 2.0).epsilon(1e-13));
      CHECK(tail.upper == doctest::Approx((1.0 - t) / 2.0).epsilon(1e-13));
      const Bracket margin = sphere_relu_margin(3, t);
      const double exact = (1.0 - t) * (1.0 - t) / 4.0;
      CHECK(margin.lower == doctest::Approx(exact).epsilon(1e-13));
      CHECK(margin.upper == doctest::Approx(exact).epsilon(1e-13));
      const Bracket prod = sphere_product(3, t);
      const double cube = (1.0 - t) * (1.0 - t) * (1.0 - t) / 8.0;
      CHECK(prod.lower == doctest::Approx(cube).epsilon(1e-13));
      CHECK(prod.upper == doctest::Approx(cube).epsilon(1e-13));
    }
  }
  SUBCASE("t = 0 brackets the exact half mass") {
    for (int d : {4, 6, 10, 25, 50}) {
      const Bracket tail = sphere_tail(d, 0.0);
      CHECK(tail.lower <= 0.5);
      CHECK(tail.upper >= 0.5);
      CHECK(tail.lower > 0.0);
    }
  }
  SUBCASE("brackets are ordered and vanish at the edge") {
    for (int d : {3, 6, 12}) {
      double prev_upper = 1.0;
      for (double t : {0.1, 0.3, 0.6, 0.9, 0.999}) {
        const Bracket b = sphere_relu_margin(d, t);
        CHECK(b.lower <= b.upper);
        CHECK(b.upper < prev_upper);
        prev_upper = b.upper;
      }
      CHECK(sphere_relu_margin(d, 0.999).upper < 1e-5);
    }
  }
}

TEST_CASE("projected-radius boundary bracket") {
  SUBCASE("d = 4, m = 2 reduces to the uniform square radius") {
    // ||proj||^2 is Uniform(0,1) here, so P(||proj|| > 1-t) = 2t - t^2.
    for (double t : {0.01, 0.1, 0.25}) {
      const BoundaryBracket bb = boundary_tail(4, 2, t);
      CHECK(bb.beta_a == 1.0);
      CHECK(bb.beta_b == 1.0);
      CHECK(bb.c_L == doctest::Approx(1.0).epsilon(1e-13));
      CHECK(bb.c_U == doctest::Approx(2.0).epsilon(1e-13));
      const double exact = 2.0 * t - t * t;
      CHECK(bb.lower <= exact);
      CHECK(bb.upper >= exact);
      CHECK(bb.lower == doctest::Approx(t).epsilon(1e-13));
      CHECK(bb.upper == doctest::Approx(2.0 * t).epsilon(1e-13));
    }
  }
  SUBCASE("bracket width ratio is the closed-form power of two") {
    for (auto [d, m] : std::vector<std::pair<int, int>>{{4, 2}, {6, 2}, {10, 3}, {5, 4}, {20, 10}}) {
      const BoundaryBracket bb = boundary_tail(d, m, 0.2);
      const double want = std::pow(2.0, 2.0 * std::abs(m / 2.0 - 1.0) + (d - m) / 2.0);
      CHECK(rel_err(bb.c_U / bb.c_L, want) < 1e-12);
      CHECK(rel_err(bb.upper / bb.lower, want) < 1e-12);
    }
  }
  SUBCASE("domain limits are enforced") {
    CHECK_THROWS_AS((void)boundary_tail(4, 2, 0.3), std::invalid_argument);
    CHECK_THROWS_AS((void)boundary_tail(4, 2, 0.0), std::invalid_argument);
    CHECK_THROWS_AS((void)boundary_tail(4, 4, 0.1), std::invalid_argument);
  }
}

TEST_CASE("rate exponent calculator") {
  SUBCASE("d = 10, m = 1 pins the published exponents") {
    const RateBound rb = rate_bound(10, 1, 10.0, 1e4, 0.2, 1.0, 0.05, 1.0);
    CHECK(rb.valid);
    CHECK(rb.P == doctest::Approx(9 * 13 + 200).epsilon(1e-15));
    CHECK(std::abs(rb.alpha_n - 117.0 / 634.0) < 1e-12);
    CHECK(std::abs(rb.alpha_A - 90.0 / 317.0) < 1e-12);
    CHECK(std::abs(rb.alpha_J - 110.0 / 317.0) < 1e-12);
    CHECK(std::abs(rb.alpha_M - 13412.0 / 7291.0) < 1e-12);
  }
  SUBCASE("full patches give a flat rate and an invalid flag") {
    const RateBound rb = rate_bound(8, 8, 1.0, 100.0, 0.2, 1.0, 0.05, 1.0);
    CHECK_FALSE(rb.valid);
    CHECK(rb.alpha_n == 0.0);
  }
  SUBCASE("validity threshold in m") {
    CHECK(rate_bound(10, 5, 2.0, 100.0, 0.2, 1.0, 0.05, 1.0).valid);       // 5 < 70/13
    CHECK_FALSE(rate_bound(10, 6, 2.0, 100.0, 0.2, 1.0, 0.05, 1.0).valid); // 6 > 70/13
    CHECK_FALSE(rate_bound(3, 1, 3.0, 100.0, 0.2, 1.0, 0.05, 1.0).valid);  // d too small
  }
  SUBCASE("large-d exponent limits") {
    const RateBound rb = rate_bound(100000, 10, 1.0, 1e6, 0.2, 1.0, 0.05, 1.0);
    CHECK(std::abs(rb.alpha_n - 1.0 / 6.0) < 1e-3);
    CHECK(std::abs(rb.alpha_A - 1.0 / 3.0) < 1e-3);
    CHECK(std::abs(rb.alpha_J - 1.0 / 3.0) < 1e-3);
    CHECK(std::abs(rb.alpha_M - 11.0 / 6.0) < 1e-3);
  }
}

TEST_CASE("uniform-deviation experiment shrinks with the sample size") {
  DeviationConfig cfg;
  cfg.n_dirs = 24;
  cfg.n_offsets = 16;
  cfg.n_pop = 8192;
  const std::vector<int> n_list = {8, 64, 2048};
  const auto rows = deviation_experiment(8, 2, 4, n_list, cfg, 99);
  REQUIRE(rows.size() == 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].n == n_list[i]);
    CHECK(std::isfinite(rows[i].max_dev));
    CHECK(rows[i].max_dev >= 0.0);
  }
  CHECK(rows[2].max_dev < rows[0].max_dev);

  const auto again = deviation_experiment(8, 2, 4, n_list, cfg, 99);
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(again[i].max_dev == rows[i].max_dev);

  CHECK_THROWS_AS(deviation_experiment(7, 2, 4, n_list, cfg, 99), std::invalid_argument);
}
