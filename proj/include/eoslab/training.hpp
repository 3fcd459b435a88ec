#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "eoslab/model.hpp"

namespace eoslab {

struct TrainConfig {
  double eta = 0.2;          // step size, must lie in (0,2)
  long epochs = 1000;
  long sharpness_every = 100;  // telemetry period; the final epoch is always recorded
  std::uint64_t seed = 0;
  int K = 256;
  bool with_certificate = false;  // fill cert_lhs/cert_rhs at telemetry epochs
  double sharp_tol = 1e-8;
  int sharp_max_iter = 1000;
  double divergence_loss = 1e12;

  void validate() const;
};

struct TelemetryRow {
  long epoch = 0;
  double loss = 0.0;       // L, the halved objective
  double risk = 0.0;       // plug-in risk 2L
  double sharpness = std::numeric_limits<double>::quiet_NaN();
  bool sharp_converged = false;
  bool beos = false;       // sharpness <= 2/eta
  double margin = 0.0;     // min pre-activation margin (kink-distance diagnostic)
  double cert_lhs = std::numeric_limits<double>::quiet_NaN();
  double cert_rhs = std::numeric_limits<double>::quiet_NaN();
};

struct TrajectoryRecord {
  std::vector<TelemetryRow> rows;
  double eta = 0.0;
  bool diverged = false;
  long final_epoch = 0;
};

struct TrainResult {
  ModelParams params;
  TrajectoryRecord trajectory;
};

// Gaussian 2/fan_in filters and output weights, zero biases and offset
// (fan_in = m for filters, K for output weights), drawn from the stream
// keyed by `label`.
ModelParams init_params(const ReceptiveFields& fields, int K, std::uint64_t seed,
                        const std::string& label = "init");

// Full-batch gradient descent theta <- theta - eta grad L(theta) with
// sharpness telemetry (warm-started power iteration between checkpoints).
// Aborts, flagging the trajectory, when the loss passes the divergence
// threshold. Deterministic for a fixed config. `init` overrides the default
// seeded initialization when given.
TrainResult gd_train(const ReceptiveFields& fields, const Dataset& data,
                     const TrainConfig& cfg, const ModelParams* init = nullptr);

// Monte-Carlo excess risk (1/N) sum (f(x) - f_true(x))^2 over a test split
// that stores the generator's noiseless values.
double estimate_excess(const ModelParams& p, const ReceptiveFields& fields,
                       const Dataset& test);

struct GapEstimate {
  double excess = 0.0;
  double sigma2 = 0.0;
  double train_risk = 0.0;  // plug-in risk on the train split
  double gap = 0.0;         // |excess + sigma^2 - train_risk|
};

GapEstimate gap_estimate(const ModelParams& p, const ReceptiveFields& fields,
                         const Dataset& train, const Dataset& test, double sigma);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;  // of log(gap) on log(n)
  long used = 0;
  long dropped = 0;
};

// Least squares of log(gap) on log(n). Non-positive gaps are dropped with a
// warning (appended to *warnings when given); fewer than 2 distinct n
// afterwards is invalid-argument.
SlopeFit slope_fit(const std::vector<std::pair<double, double>>& n_gap,
                   std::vector<std::string>* warnings = nullptr);

struct GapRow {
  std::string arch;
  int d = 0, m = 0, J = 0, K = 0, n = 0;
  std::uint64_t seed = 0;
  double gap = 0.0, excess = 0.0, train_risk = 0.0;
};

std::string trajectory_csv(const TrajectoryRecord& record);
std::string gap_csv(const std::vector<GapRow>& rows);

}  // namespace eoslab
