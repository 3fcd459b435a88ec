#include "eoslab/training.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "eoslab/io.hpp"
#include "eoslab/rng.hpp"
#include "eoslab/stability.hpp"

namespace eoslab {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

void TrainConfig::validate() const {
  require(eta > 0.0 && eta < 2.0, "train config: eta must be in (0,2)");
  require(epochs >= 1, "train config: epochs must be >= 1");
  require(sharpness_every >= 1, "train config: sharpness_every must be >= 1");
  require(K >= 1, "train config: K must be >= 1");
  require(sharp_tol > 0.0 && sharp_max_iter >= 1, "train config: bad sharpness settings");
  require(divergence_loss > 0.0, "train config: bad divergence threshold");
}

ModelParams init_params(const ReceptiveFields& fields, int K, std::uint64_t seed,
                        const std::string& label) {
  require(K >= 1, "init_params: K must be >= 1");
  RngStream rng(seed, stream_id(label));
  ModelParams p;
  p.K = K;
  p.m = fields.m;
  p.W.resize(K, fields.m);
  const double w_scale = std::sqrt(2.0 / fields.m);
  std::vector<double> buf(fields.m);
  for (int k = 0; k < K; ++k) {
    fill_gaussian(rng, buf.data(), fields.m);
    for (int c = 0; c < fields.m; ++c) p.W(k, c) = w_scale * buf[c];
    if (p.W.row(k).norm() == 0.0) p.W(k, 0) = w_scale;
  }
  p.b = Eigen::VectorXd::Zero(K);
  p.v.resize(K);
  fill_gaussian(rng, p.v.data(), K);
  p.v *= std::sqrt(2.0 / K);
  p.beta = 0.0;
  p.validate();
  return p;
}

TrainResult gd_train(const ReceptiveFields& fields, const Dataset& data,
                     const TrainConfig& cfg, const ModelParams* init) {
  cfg.validate();
  Workspace ws(fields, data);
  TrainResult res;
  res.params = init != nullptr ? *init : init_params(fields, cfg.K, cfg.seed);
  require(res.params.m == fields.m, "gd_train: init params patch size mismatch");
  res.trajectory.eta = cfg.eta;

  PatchCloud cloud;
  if (cfg.with_certificate) {
    cloud.m = ws.m;
    cloud.points = ws.P;
    cloud.source = PatchCloud::Source::dataset;
  }

  Eigen::VectorXd warm;  // carries the top eigenvector between checkpoints
  const double beos_level = 2.0 / cfg.eta;

  auto telemetry = [&](long epoch, const PointState& st) {
    TelemetryRow row;
    row.epoch = epoch;
    row.loss = st.L;
    row.risk = 2.0 * st.L;
    const EigResult eig =
        sharpness(res.params, ws, st, cfg.sharp_tol, cfg.sharp_max_iter, cfg.seed,
                  warm.size() == res.params.param_count() ? &warm : nullptr);
    warm = eig.vector;
    row.sharpness = eig.value;
    row.sharp_converged = eig.converged;
    row.beos = eig.value <= beos_level;
    row.margin = min_margin(res.params, ws);
    if (cfg.with_certificate) {
      row.cert_lhs = weighted_path_norm(res.params, cloud);
      row.cert_rhs = (eig.value + 2.0 * (data.R + 1.0) * std::sqrt(2.0 * st.L) - 1.0) / 2.0;
    }
    res.trajectory.rows.push_back(row);
  };

  for (long epoch = 0; epoch <= cfg.epochs; ++epoch) {
    PointState st = point_state(res.params, ws);
    res.trajectory.final_epoch = epoch;
    if (!std::isfinite(st.L) || st.L > cfg.divergence_loss) {
      // Diagnostic row without sharpness: the iterate is already useless and
      // its Hessian may overflow the power iteration.
      TelemetryRow row;
      row.epoch = epoch;
      row.loss = st.L;
      row.risk = 2.0 * st.L;
      row.margin = min_margin(res.params, ws);
      res.trajectory.rows.push_back(row);
      res.trajectory.diverged = true;
      return res;
    }
    if (epoch == cfg.epochs) {
      telemetry(epoch, st);
      break;
    }
    if (epoch % cfg.sharpness_every == 0) telemetry(epoch, st);
    const Eigen::VectorXd g = gradient(res.params, ws, st);
    Eigen::VectorXd theta = flatten(res.params);
    theta -= cfg.eta * g;
    res.params = unflatten(theta, res.params.K, res.params.m);
  }
  return res;
}

double estimate_excess(const ModelParams& p, const ReceptiveFields& fields,
                       const Dataset& test) {
  require(test.f_true.size() == test.y.size(),
          "estimate_excess: test split lacks stored noiseless values");
  Workspace ws(fields, test);
  const Eigen::VectorXd f = predict(p, ws);
  return (f - test.f_true).squaredNorm() / test.n();
}

GapEstimate gap_estimate(const ModelParams& p, const ReceptiveFields& fields,
                         const Dataset& train, const Dataset& test, double sigma) {
  require(sigma >= 0.0, "gap_estimate: sigma must be >= 0");
  GapEstimate out;
  out.excess = estimate_excess(p, fields, test);
  out.sigma2 = sigma * sigma;
  out.train_risk = plugin_risk(p, fields, train);
  out.gap = std::abs(out.excess + out.sigma2 - out.train_risk);
  return out;
}

SlopeFit slope_fit(const std::vector<std::pair<double, double>>& n_gap,
                   std::vector<std::string>* warnings) {
  SlopeFit fit;
  std::vector<std::pair<double, double>> pts;  // (log n, log gap)
  std::map<double, int> distinct;
  for (const auto& [n, gap] : n_gap) {
    require(n > 0.0, "slope_fit: sample counts must be positive");
    if (!(gap > 0.0)) {
      ++fit.dropped;
      if (warnings != nullptr)
        warnings->push_back("slope_fit: dropped non-positive gap " + fmt_g17(gap) + " at n = " +
                            fmt_g17(n));
      continue;
    }
    pts.emplace_back(std::log(n), std::log(gap));
    ++distinct[n];
  }
  require(distinct.size() >= 2, "slope_fit: need positive gaps at >= 2 distinct n");

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double N = static_cast<double>(pts.size());
  fit.slope = (N * sxy - sx * sy) / (N * sxx - sx * sx);
  fit.intercept = (sy - fit.slope * sx) / N;
  fit.used = pts.size();
  return fit;
}

std::string trajectory_csv(const TrajectoryRecord& record) {
  std::string out = "epoch,loss,risk,sharpness,beos,cert_lhs,cert_rhs\n";
  for (const TelemetryRow& row : record.rows) {
    out += std::to_string(row.epoch) + "," + fmt_g17(row.loss) + "," + fmt_g17(row.risk) + "," +
           fmt_g17(row.sharpness) + "," + (row.beos ? "1" : "0") + "," +
           fmt_g17(row.cert_lhs) + "," + fmt_g17(row.cert_rhs) + "\n";
  }
  return out;
}

std::string gap_csv(const std::vector<GapRow>& rows) {
  std::string out = "arch,d,m,J,K,n,seed,gap,excess,train_risk\n";
  for (const GapRow& row : rows) {
    out += row.arch + "," + std::to_string(row.d) + "," + std::to_string(row.m) + "," +
           std::to_string(row.J) + "," + std::to_string(row.K) + "," + std::to_string(row.n) +
           "," + std::to_string(row.seed) + "," + fmt_g17(row.gap) + "," +
           fmt_g17(row.excess) + "," + fmt_g17(row.train_risk) + "\n";
  }
  return out;
}

}  // namespace eoslab
