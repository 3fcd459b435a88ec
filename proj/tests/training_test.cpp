#include <cmath>
#include <sstream>

#include "doctest.h"
#include "eoslab/ablation.hpp"
#include "eoslab/datagen.hpp"
#include "eoslab/training.hpp"
#include "support.hpp"

using namespace eoslab;
using namespace eoslab::testsupport;

TEST_CASE("initialization statistics and determinism") {
  const ReceptiveFields f = ReceptiveFields::disjoint(12, 4);
  const ModelParams a = init_params(f, 2000, 5);
  const ModelParams b = init_params(f, 2000, 5);
  CHECK((a.W - b.W).norm() == 0.0);
  CHECK((a.v - b.v).norm() == 0.0);
  CHECK(a.b.cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.beta == 0.0);
  CHECK(std::abs(a.W.array().square().mean() - 0.5) < 0.05 * 0.5);
  CHECK(std::abs(a.v.array().square().mean() - 0.001) < 0.10 * 0.001);

  const ModelParams c = init_params(f, 2000, 6);
  CHECK((a.W - c.W).norm() > 0.0);
}

TEST_CASE("offset-only training contracts at rate 1 - eta") {
  const ReceptiveFields f = ReceptiveFields::fcn(3);
  RngStream rng(6001, 0);
  const Dataset d = sphere_dataset(f, 9, rng);
  const double ybar = d.y.mean();

  ModelParams start;
  start.K = 0;
  start.m = 3;
  start.W.resize(0, 3);
  TrainConfig cfg;
  cfg.eta = 0.3;
  cfg.epochs = 40;
  cfg.sharpness_every = 10;
  const TrainResult res = gd_train(f, d, cfg, &start);

  CHECK_FALSE(res.trajectory.diverged);
  const double want_beta = ybar * (1.0 - std::pow(1.0 - cfg.eta, 40.0));
  CHECK(rel_err(res.params.beta, want_beta) < 1e-12);

  REQUIRE(res.trajectory.rows.size() == 5);  // epochs 0,10,20,30,40
  for (const auto& row : res.trajectory.rows) {
    CHECK(row.risk == doctest::Approx(2.0 * row.loss).epsilon(1e-15));
    CHECK(row.sharpness == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(row.sharp_converged);
    CHECK(row.beos);  // 1 <= 2/0.3
    CHECK(row.margin == std::numeric_limits<double>::infinity());
    // Loss of the contraction in closed form.
    const double shrink = std::pow(1.0 - cfg.eta, static_cast<double>(row.epoch));
    const double c0 = (d.y.array() - ybar).square().mean() / 2.0;
    const double want = c0 + ybar * ybar * shrink * shrink / 2.0;
    CHECK(rel_err(row.loss, want) < 1e-12);
  }
}

TEST_CASE("trajectories are bit-identical across reruns") {
  const ReceptiveFields f = ReceptiveFields::disjoint(8, 4);
  RngStream trng(6002, 0);
  const ModelParams teacher = sample_teacher(f, 8, trng);
  const RegressionSplits s = make_regression_dataset(teacher, f, 24, 8, 0.3, 11);

  TrainConfig cfg;
  cfg.K = 16;
  cfg.eta = 0.2;
  cfg.epochs = 60;
  cfg.sharpness_every = 20;
  cfg.with_certificate = true;

  const TrainResult r1 = gd_train(f, s.train, cfg);
  const TrainResult r2 = gd_train(f, s.train, cfg);
  CHECK((flatten(r1.params) - flatten(r2.params)).norm() == 0.0);
  REQUIRE(r1.trajectory.rows.size() == r2.trajectory.rows.size());
  for (std::size_t i = 0; i < r1.trajectory.rows.size(); ++i) {
    const auto& a = r1.trajectory.rows[i];
    const auto& b = r2.trajectory.rows[i];
    CHECK(a.epoch == b.epoch);
    CHECK(a.loss == b.loss);
    CHECK(a.sharpness == b.sharpness);
    CHECK(a.margin == b.margin);
    CHECK(a.cert_lhs == b.cert_lhs);
    CHECK(a.cert_rhs == b.cert_rhs);
  }
  CHECK(trajectory_csv(r1.trajectory) == trajectory_csv(r2.trajectory));

  // Training lowered the loss, telemetry certs are populated.
  CHECK(r1.trajectory.rows.back().loss < r1.trajectory.rows.front().loss);
  for (const auto& row : r1.trajectory.rows) {
    CHECK(std::isfinite(row.cert_lhs));
    CHECK(std::isfinite(row.cert_rhs));
  }
}

TEST_CASE("an explicit initial point overrides the seeded one") {
  const ReceptiveFields f = ReceptiveFields::disjoint(4, 2);
  RngStream rng(6003, 0);
  const Dataset d = sphere_dataset(f, 8, rng);
  const ModelParams start = random_params(f, 3, rng, 0.2);

  TrainConfig cfg;
  cfg.K = 3;
  cfg.epochs = 1;
  cfg.sharpness_every = 1;
  const TrainResult res = gd_train(f, d, cfg, &start);
  REQUIRE(res.trajectory.rows.size() == 2);
  CHECK(res.trajectory.rows[0].epoch == 0);
  CHECK(res.trajectory.rows[0].loss == doctest::Approx(loss(start, f, d)).epsilon(1e-15));
  CHECK(res.trajectory.rows[1].epoch == 1);
}

TEST_CASE("divergence is detected and flagged") {
  const ReceptiveFields f = ReceptiveFields::disjoint(4, 2);
  RngStream rng(6004, 0);
  const Dataset d = sphere_dataset(f, 8, rng);
  // A deliberately huge starting point: the Hessian scale dwarfs 2/eta, so
  // the step amplifies the residual every epoch.
  const ModelParams start = random_params(f, 8, rng, 5.0);

  TrainConfig cfg;
  cfg.eta = 1.0;
  cfg.epochs = 4000;
  cfg.sharpness_every = 1000;
  cfg.divergence_loss = 1e6;
  const TrainResult res = gd_train(f, d, cfg, &start);
  CHECK(res.trajectory.diverged);
  CHECK(res.trajectory.final_epoch < cfg.epochs);
  const TelemetryRow& last = res.trajectory.rows.back();
  CHECK((last.loss > 1e6 || !std::isfinite(last.loss)));
  CHECK(std::isnan(last.sharpness));
}

TEST_CASE("excess risk and generalization-gap estimates") {
  const ReceptiveFields f = ReceptiveFields::disjoint(6, 3);
  RngStream trng(6005, 0);
  const ModelParams teacher = sample_teacher(f, 6, trng);
  const RegressionSplits s = make_regression_dataset(teacher, f, 32, 64, 0.5, 3);

  SUBCASE("the teacher itself has zero excess") {
    CHECK(estimate_excess(teacher, f, s.test) == doctest::Approx(0.0).epsilon(1e-15));
    const GapEstimate g = gap_estimate(teacher, f, s.train, s.test, 0.5);
    CHECK(g.excess == 0.0);
    CHECK(g.sigma2 == 0.25);
    CHECK(g.train_risk == doctest::Approx(plugin_risk(teacher, f, s.train)).epsilon(1e-15));
    CHECK(g.gap == doctest::Approx(std::abs(0.25 - g.train_risk)).epsilon(1e-12));
  }
  SUBCASE("matches the naive accumulation") {
    RngStream rng(6006, 0);
    const ModelParams p = random_params(f, 5, rng, 0.4);
    double acc = 0.0;
    for (int i = 0; i < s.test.n(); ++i) {
      const double diff = naive_forward(p, f, s.test.X.row(i)) - s.test.f_true[i];
      acc += diff * diff;
    }
    CHECK(rel_err(estimate_excess(p, f, s.test), acc / s.test.n()) < 1e-12);
  }
  SUBCASE("a test split without stored teacher values is rejected") {
    Dataset bare = s.test;
    bare.f_true.resize(0);
    CHECK_THROWS_AS((void)estimate_excess(teacher, f, bare), std::invalid_argument);
  }
}

TEST_CASE("log-log slope fits") {
  SUBCASE("recovers an exact power law") {
    std::vector<std::pair<double, double>> pts;
    for (double n : {32.0, 64.0, 128.0, 256.0})
      pts.push_back({n, 7.0 * std::pow(n, -0.375)});
    const SlopeFit fit = slope_fit(pts);
    CHECK(std::abs(fit.slope + 0.375) < 1e-12);
    CHECK(std::abs(fit.intercept - std::log(7.0)) < 1e-12);
    CHECK(fit.used == 4);
    CHECK(fit.dropped == 0);
  }
  SUBCASE("non-positive gaps are dropped with a warning") {
    std::vector<std::string> warnings;
    std::vector<std::pair<double, double>> pts = {
        {32.0, 1.0}, {64.0, 0.0}, {128.0, 0.25}, {256.0, -0.5}};
    const SlopeFit fit = slope_fit(pts, &warnings);
    CHECK(fit.used == 2);
    CHECK(fit.dropped == 2);
    CHECK(std::abs(fit.slope + 1.0) < 1e-12);
    CHECK(warnings.size() == 2);
  }
  SUBCASE("fewer than two distinct sizes is an error") {
    std::vector<std::pair<double, double>> pts = {{64.0, 1.0}, {64.0, 2.0}};
    CHECK_THROWS_AS((void)slope_fit(pts), std::invalid_argument);
    std::vector<std::pair<double, double>> empty;
    CHECK_THROWS_AS((void)slope_fit(empty), std::invalid_argument);
  }
}

TEST_CASE("csv serializations") {
  TrajectoryRecord rec;
  rec.eta = 0.2;
  TelemetryRow row;
  row.epoch = 0;
  row.loss = 0.5;
  row.risk = 1.0;
  rec.rows.push_back(row);
  const std::string csv = trajectory_csv(rec);
  CHECK(csv.rfind("epoch,loss,risk,sharpness,beos,cert_lhs,cert_rhs\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);

  GapRow g;
  g.arch = "lcn-ws";
  g.d = 50;
  g.m = 10;
  g.J = 5;
  g.K = 256;
  g.n = 128;
  g.seed = 1;
  g.gap = 0.125;
  const std::string gcsv = gap_csv({g});
  CHECK(gcsv.rfind("arch,d,m,J,K,n,seed,gap,excess,train_risk\n", 0) == 0);
  CHECK(gcsv.find("lcn-ws,50,10,5,256,128,1,") != std::string::npos);
}

TEST_CASE("unshared bank agrees with the shared model when tied") {
  const int J = 3, m = 2, K = 4;
  const ReceptiveFields f = ReceptiveFields::disjoint(J * m, m);
  RngStream rng(6007, 0);
  const ModelParams shared = random_params(f, K, rng);
  const Dataset d = sphere_dataset(f, 10, rng);
  const Workspace ws(f, d);

  UnsharedParams tied;
  tied.K = K;
  tied.J = J;
  tied.m = m;
  tied.W.resize(J * K, m);
  tied.b.resize(J * K);
  for (int j = 0; j < J; ++j)
    for (int k = 0; k < K; ++k) {
      tied.W.row(j * K + k) = shared.W.row(k);
      tied.b[j * K + k] = shared.b[k];
    }
  tied.v = shared.v;
  tied.beta = shared.beta;

  const Eigen::VectorXd pu = predict_unshared(tied, ws);
  const Eigen::VectorXd ps = predict(shared, ws);
  CHECK((pu - ps).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(rel_err(loss_unshared(tied, ws), loss(shared, f, d)) < 1e-12);
}

TEST_CASE("one unshared step lowers a smooth objective") {
  const ReceptiveFields f = ReceptiveFields::disjoint(6, 2);
  RngStream rng(6008, 0);
  const Dataset d = sphere_dataset(f, 16, rng);
  const Workspace ws(f, d);
  UnsharedParams p = init_unshared(f, 12, 4);
  REQUIRE(p.J == 3);

  const double before = loss_unshared(p, ws);
  const double reported = unshared_gd_step(p, ws, 0.05);
  CHECK(reported == doctest::Approx(before).epsilon(1e-15));
  const double after = loss_unshared(p, ws);
  CHECK(after < before);

  // Descent continues for a while under a conservative step.
  double prev = after;
  for (int step = 0; step < 50; ++step) {
    unshared_gd_step(p, ws, 0.05);
    const double now = loss_unshared(p, ws);
    CHECK(now <= prev + 1e-12);
    prev = now;
  }
}

TEST_CASE("ablation training runs the three architectures") {
  const int J = 2, m = 2;
  const ClusteredPatchSpec spec = ClusteredPatchSpec::standard(J, m, 1.0);
  RngStream rng(6009, 0);
  const Dataset train = clustered_patch_sample(spec, 48, rng);
  const Dataset test = clustered_patch_sample(spec, 128, rng);

  AblationRunConfig cfg;
  cfg.K = 16;
  cfg.eta = 0.2;
  cfg.epochs = 200;
  cfg.record_every = 50;
  cfg.seed = 0;

  for (AblationArch arch : {AblationArch::fcn, AblationArch::lcn, AblationArch::lcn_ws}) {
    const LossCurve curve = ablation_train(arch, J, m, train, test, cfg);
    CHECK_FALSE(curve.diverged);
    REQUIRE(curve.epochs.size() == 5);  // 0,50,100,150,200
    CHECK(curve.epochs.front() == 0);
    CHECK(curve.epochs.back() == 200);
    REQUIRE(curve.train_loss.size() == curve.epochs.size());
    REQUIRE(curve.test_loss.size() == curve.epochs.size());
    CHECK(curve.train_loss.back() < curve.train_loss.front());
    CHECK(curve.final_test() == curve.test_loss.back());
    for (double v : curve.train_loss) CHECK(std::isfinite(v));
  }

  CHECK(std::string(arch_name(AblationArch::fcn)) == "fcn");
  CHECK(std::string(arch_name(AblationArch::lcn)) == "lcn");
  CHECK(std::string(arch_name(AblationArch::lcn_ws)) == "lcn-ws");

  const LossCurve c1 = ablation_train(AblationArch::lcn, J, m, train, test, cfg);
  const LossCurve c2 = ablation_train(AblationArch::lcn, J, m, train, test, cfg);
  CHECK(c1.train_loss == c2.train_loss);
  CHECK(c1.test_loss == c2.test_loss);
}
