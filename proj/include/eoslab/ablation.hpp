#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eoslab/model.hpp"

namespace eoslab {

// Locally connected bank without weight sharing: an independent filter set
// per patch location, responses still averaged over locations. The minimal
// unsharing of the shared model; used only for the clustered-patch
// comparison.
struct UnsharedParams {
  int K = 0;
  int J = 1;
  int m = 1;
  Eigen::MatrixXd W;  // (J*K) x m, row j*K + k holds filter k of location j
  Eigen::VectorXd b;  // J*K, same layout
  Eigen::VectorXd v;  // K output weights (shared across locations by GAP)
  double beta = 0.0;

  long param_count() const { return static_cast<long>(J) * K * (m + 1) + K + 1; }
  void validate() const;
};

UnsharedParams init_unshared(const ReceptiveFields& fields, int K, std::uint64_t seed,
                             const std::string& label = "init");

Eigen::VectorXd predict_unshared(const UnsharedParams& p, const Workspace& ws);
double loss_unshared(const UnsharedParams& p, const Workspace& ws);

// One full-batch GD step in place; returns the loss at the pre-step point.
double unshared_gd_step(UnsharedParams& p, const Workspace& ws, double eta);

enum class AblationArch { fcn, lcn, lcn_ws };
const char* arch_name(AblationArch arch);  // "fcn" / "lcn" / "lcn-ws"

struct AblationRunConfig {
  int K = 256;
  double eta = 0.2;
  long epochs = 10000;
  long record_every = 100;
  std::uint64_t seed = 0;
  double divergence_loss = 1e12;

  void validate() const;
};

struct LossCurve {
  std::vector<long> epochs;
  std::vector<double> train_loss;
  std::vector<double> test_loss;
  bool diverged = false;

  double final_test() const { return test_loss.back(); }
};

// Trains one architecture on inputs in R^{J*m}: fcn sees the flat input as a
// single patch, the other two use the disjoint patch structure (lcn without
// sharing, lcn-ws with). Records train/test losses every record_every epochs
// plus the final epoch.
LossCurve ablation_train(AblationArch arch, int J, int m, const Dataset& train,
                         const Dataset& test, const AblationRunConfig& cfg);

}  // namespace eoslab
