#pragma once

#include <string>

#include <Eigen/Dense>

#include "eoslab/model.hpp"
#include "eoslab/rng.hpp"
#include "eoslab/stability.hpp"

namespace eoslab {

struct DepthProfile {
  Eigen::VectorXd thresholds;  // grid on [0, 1/2]
  Eigen::VectorXd psi;         // fraction of probes with depth >= threshold
  int n_dirs = 0;
  long n_probe = 0;
};

struct VarianceSpectrum {
  Eigen::VectorXd eigenvalues;  // descending, clipped at 0
  Eigen::VectorXd cumulative;   // explained-variance fractions, ends at 1
};

struct RateHistogram {
  Eigen::VectorXd bin_low;
  Eigen::VectorXd bin_high;
  Eigen::VectorXd mass;   // sums to 1
  Eigen::VectorXd rates;  // per-neuron activation probabilities
};

// Half-space depth of z in the cloud, minimized over n_dirs random unit
// directions with the closed-half-space tie convention u.p >= u.z. An upper
// bound on the true depth; non-increasing as the direction set grows from
// the same rng prefix.
double approx_depth(const PatchCloud& cloud, const Eigen::Ref<const Eigen::VectorXd>& z,
                    int n_dirs, RngStream& rng);

Eigen::VectorXd default_depth_grid();  // 0 to 0.5 in steps of 0.02

// Depth distribution over the cloud itself: draws n_dirs directions, then
// subsamples n_probe cloud points (in that order on the stream) and reports
// the fraction whose estimated depth reaches each threshold.
DepthProfile concentration_curve(const PatchCloud& cloud, int n_dirs, long n_probe,
                                 const Eigen::VectorXd& grid, RngStream& rng);

double curve_area(const DepthProfile& profile);  // trapezoid integral of psi

// Eigen-decomposition of the centered empirical covariance (divisor N). When
// the cloud is wider than it is tall the Gram-matrix route gives the same
// nonzero spectrum at N x N cost. Returns min(m, N) eigenvalues.
VarianceSpectrum variance_spectrum(const PatchCloud& cloud);

// Per-neuron empirical activation probability over the cloud (strict gate
// w.p > b), binned into `bins` equal bins on [0,1]; rate 1 lands in the top
// bin.
RateHistogram activation_rate_histogram(const ModelParams& params, const PatchCloud& cloud,
                                        int bins);

std::string depth_csv(const DepthProfile& profile);        // T,psi
std::string spectrum_csv(const VarianceSpectrum& spec);    // rank,eigenvalue,cumulative_fraction
std::string rates_csv(const RateHistogram& hist);          // bin_low,bin_high,mass

}  // namespace eoslab
