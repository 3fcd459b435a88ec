#include "eoslab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "eoslab/io.hpp"

namespace eoslab {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

double approx_depth(const PatchCloud& cloud, const Eigen::Ref<const Eigen::VectorXd>& z,
                    int n_dirs, RngStream& rng) {
  cloud.validate();
  require(z.size() == cloud.m, "approx_depth: probe dimension mismatch");
  require(n_dirs >= 1, "approx_depth: need n_dirs >= 1");
  const double N = static_cast<double>(cloud.N());
  double depth = 1.0;
  for (int it = 0; it < n_dirs; ++it) {
    const Eigen::VectorXd u = unit_vector(rng, cloud.m);
    const double zu = u.dot(z);
    const long cnt = ((cloud.points * u).array() >= zu).count();
    depth = std::min(depth, cnt / N);
  }
  return depth;
}

Eigen::VectorXd default_depth_grid() {
  Eigen::VectorXd grid(26);
  for (int i = 0; i < 26; ++i) grid[i] = 0.02 * i;
  return grid;
}

DepthProfile concentration_curve(const PatchCloud& cloud, int n_dirs, long n_probe,
                                 const Eigen::VectorXd& grid, RngStream& rng) {
  cloud.validate();
  require(n_dirs >= 1, "concentration_curve: need n_dirs >= 1");
  require(n_probe >= 1, "concentration_curve: need n_probe >= 1");
  require(grid.size() >= 1, "concentration_curve: empty threshold grid");
  const long N = cloud.N();

  Eigen::MatrixXd U(n_dirs, cloud.m);
  for (int it = 0; it < n_dirs; ++it) U.row(it) = unit_vector(rng, cloud.m).transpose();

  // Probe points are a without-replacement subsample of the cloud (all of it
  // when n_probe >= N), chosen after the directions on the same stream.
  std::vector<long> probe;
  if (n_probe >= N) {
    probe.resize(N);
    for (long i = 0; i < N; ++i) probe[i] = i;
  } else {
    std::vector<char> taken(N, 0);
    while (static_cast<long>(probe.size()) < n_probe) {
      const long cand = static_cast<long>(rng.uniform_below(static_cast<std::uint64_t>(N)));
      if (!taken[cand]) {
        taken[cand] = 1;
        probe.push_back(cand);
      }
    }
    std::sort(probe.begin(), probe.end());
  }
  const long P = static_cast<long>(probe.size());

  // Per direction, one sort of the projections answers every probe's count
  // of points on the closed upper side by binary search.
  std::vector<double> depth(P, 1.0);
  std::vector<double> sorted(N);
  constexpr int kBlock = 64;  // keeps the projection buffer small
  for (int b0 = 0; b0 < n_dirs; b0 += kBlock) {
    const int bs = std::min(kBlock, n_dirs - b0);
    const Eigen::MatrixXd S = cloud.points * U.middleRows(b0, bs).transpose();
    for (int c = 0; c < bs; ++c) {
      for (long i = 0; i < N; ++i) sorted[i] = S(i, c);
      std::sort(sorted.begin(), sorted.end());
      for (long p = 0; p < P; ++p) {
        const double s = S(probe[p], c);
        const long below = std::lower_bound(sorted.begin(), sorted.end(), s) - sorted.begin();
        depth[p] = std::min(depth[p], static_cast<double>(N - below) / N);
      }
    }
  }

  DepthProfile profile;
  profile.thresholds = grid;
  profile.psi.resize(grid.size());
  profile.n_dirs = n_dirs;
  profile.n_probe = P;
  for (long t = 0; t < grid.size(); ++t) {
    long cnt = 0;
    for (double dv : depth)
      if (dv >= grid[t]) ++cnt;
    profile.psi[t] = static_cast<double>(cnt) / P;
  }
  return profile;
}

double curve_area(const DepthProfile& profile) {
  double area = 0.0;
  for (long t = 0; t + 1 < profile.thresholds.size(); ++t)
    area += 0.5 * (profile.psi[t] + profile.psi[t + 1]) *
            (profile.thresholds[t + 1] - profile.thresholds[t]);
  return area;
}

VarianceSpectrum variance_spectrum(const PatchCloud& cloud) {
  cloud.validate();
  const long N = cloud.N();
  require(N >= 2, "variance_spectrum: need at least 2 points");
  const Eigen::MatrixXd centered = cloud.points.rowwise() - cloud.points.colwise().mean();

  Eigen::VectorXd ev;
  if (cloud.m <= N) {
    const Eigen::MatrixXd C = centered.transpose() * centered / static_cast<double>(N);
    ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(C).eigenvalues();
  } else {
    // Gram route: X X^T / N shares the nonzero spectrum of the covariance.
    const Eigen::MatrixXd G = centered * centered.transpose() / static_cast<double>(N);
    ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(G).eigenvalues();
  }

  VarianceSpectrum spec;
  const long len = std::min<long>(cloud.m, N);
  spec.eigenvalues.resize(len);
  for (long i = 0; i < len; ++i) spec.eigenvalues[i] = std::max(0.0, ev[ev.size() - 1 - i]);
  const double total = spec.eigenvalues.sum();
  spec.cumulative.resize(len);
  double run = 0.0;
  for (long i = 0; i < len; ++i) {
    run += spec.eigenvalues[i];
    // A constant cloud has nothing to explain; call that fully explained.
    spec.cumulative[i] = total > 0.0 ? run / total : 1.0;
  }
  return spec;
}

RateHistogram activation_rate_histogram(const ModelParams& params, const PatchCloud& cloud,
                                        int bins) {
  cloud.validate();
  params.validate();
  require(params.m == cloud.m, "activation_rate_histogram: dimension mismatch");
  require(bins >= 1, "activation_rate_histogram: need bins >= 1");
  require(params.K >= 1, "activation_rate_histogram: need at least one neuron");
  const double N = static_cast<double>(cloud.N());

  RateHistogram hist;
  hist.rates.resize(params.K);
  for (int k = 0; k < params.K; ++k) {
    const long cnt = ((cloud.points * params.W.row(k).transpose()).array() > params.b[k]).count();
    hist.rates[k] = cnt / N;
  }
  hist.bin_low.resize(bins);
  hist.bin_high.resize(bins);
  hist.mass = Eigen::VectorXd::Zero(bins);
  for (int b = 0; b < bins; ++b) {
    hist.bin_low[b] = static_cast<double>(b) / bins;
    hist.bin_high[b] = static_cast<double>(b + 1) / bins;
  }
  for (int k = 0; k < params.K; ++k) {
    const int b = std::min(bins - 1, static_cast<int>(hist.rates[k] * bins));
    hist.mass[b] += 1.0 / params.K;
  }
  return hist;
}

std::string depth_csv(const DepthProfile& profile) {
  std::string out = "T,psi\n";
  for (long t = 0; t < profile.thresholds.size(); ++t)
    out += fmt_g17(profile.thresholds[t]) + "," + fmt_g17(profile.psi[t]) + "\n";
  return out;
}

std::string spectrum_csv(const VarianceSpectrum& spec) {
  std::string out = "rank,eigenvalue,cumulative_fraction\n";
  for (long i = 0; i < spec.eigenvalues.size(); ++i)
    out += std::to_string(i + 1) + "," + fmt_g17(spec.eigenvalues[i]) + "," +
           fmt_g17(spec.cumulative[i]) + "\n";
  return out;
}

std::string rates_csv(const RateHistogram& hist) {
  std::string out = "bin_low,bin_high,mass\n";
  for (long b = 0; b < hist.mass.size(); ++b)
    out += fmt_g17(hist.bin_low[b]) + "," + fmt_g17(hist.bin_high[b]) + "," +
           fmt_g17(hist.mass[b]) + "\n";
  return out;
}

}  // namespace eoslab
