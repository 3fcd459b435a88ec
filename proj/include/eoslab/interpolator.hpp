#pragma once

#include <vector>

#include <Eigen/Dense>

#include "eoslab/model.hpp"

namespace eoslab {

// One anchor per nonzero-label sample: the patch the constructed neuron
// will fire on, and the largest correlation rho any other patch in the
// cloud has with it.
struct AnchorEntry {
  long sample = 0;    // index i into the dataset
  int patch = 0;      // chosen patch index tau(i)
  Eigen::VectorXd p;  // anchor vector pi_{tau(i)}(x_i), unit norm
  double rho = 0.0;   // max over all other patches of patch . p
};

struct AnchorMap {
  std::vector<AnchorEntry> entries;
};

// For every sample with y_i != 0, picks the smallest patch index whose patch
// has norm within norm_tol of 1 and is exactly unique in the patch cloud
// (coordinate-wise, -0.0 == 0.0). Requires every patch norm <= 1 + norm_tol.
// Throws std::runtime_error naming the offending sample when no anchor
// exists or a hypothesis fails.
AnchorMap find_anchors(const Dataset& data, const ReceptiveFields& fields,
                       double norm_tol = 1e-9);

// One neuron per anchor: w = p, b = (rho+1)/2 (midpoint of the separating
// interval), v = J y / (1 - b), beta = 0; then rescaled along the relu
// homogeneity direction so every |v_k| = 1. The result fires on exactly one
// patch of one sample and interpolates the data.
ModelParams construct_interpolant(const Dataset& data, const ReceptiveFields& fields,
                                  const AnchorMap& anchors);

struct InterpolationReport {
  double max_residual = 0.0;
  double lambda_max = 0.0;
  bool sharp_converged = false;
  double bound = 0.0;  // 1 + (D^2 + 2/J^2)/n, no leading 1 without the offset
  bool pass = false;
};

// Checks exact interpolation and the curvature guarantee. with_offset=false
// scores the network without its offset parameter: the offset coordinate is
// projected out of the curvature operator and the bound drops its leading 1.
InterpolationReport verify_interpolant(const ModelParams& params, const Dataset& data,
                                       const ReceptiveFields& fields,
                                       bool with_offset = true);

}  // namespace eoslab
