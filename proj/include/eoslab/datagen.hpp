#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eoslab/model.hpp"
#include "eoslab/rng.hpp"
#include "eoslab/stability.hpp"

namespace eoslab {

// n rows, each a normalized d-dimensional Gaussian draw. Every sample
// consumes a fixed number of rng values, so the first n rows of a longer
// draw from the same stream are identical to a shorter one (prefix
// stability; the one-in-never zero-norm draw maps to e_0 instead of
// resampling for the same reason).
Eigen::MatrixXd sample_sphere(int n, int d, RngStream& rng);

// Random ground-truth network: filter entries N(0, 2/m), output weights
// N(0, 2/K_true), biases and offset zero. Any exactly-zero filter row is
// replaced by e_0 so downstream norm preconditions hold.
ModelParams sample_teacher(const ReceptiveFields& fields, int K_true, RngStream& rng);

struct RegressionSplits {
  Dataset train;
  Dataset test;
};

// Spherical inputs, labels y = f_true(x) + N(0, sigma^2). f_true values are
// stored on both splits. The four streams (train/test x noise) are derived
// from `seed` and the stream label prefix, so train and test are disjoint
// and growing n_train only appends samples.
RegressionSplits make_regression_dataset(const ModelParams& teacher,
                                         const ReceptiveFields& fields, int n_train,
                                         int n_test, double sigma, std::uint64_t seed,
                                         const std::string& label_prefix = "regression");

struct ClusteredPatchSpec {
  int J = 1;
  int m = 2;
  Eigen::VectorXd v_plus;   // unit signal direction, class +
  Eigen::VectorXd v_minus;  // unit signal direction, class -
  double E_total = 1.0;     // J*m*sigma^2, total noise energy
  double target_plus = 1.0;
  double target_minus = -1.0;

  double sigma() const;
  void validate() const;
  // v_plus = e_0, v_minus = e_1 (needs m >= 2).
  static ClusteredPatchSpec standard(int J, int m, double E_total = 1.0);
};

// Per sample: uniform class c and location j*, patch j* carries the class
// signal v_c plus noise, every other patch is pure noise N(0, sigma^2 I_m);
// the target is the class scalar. Inputs live in R^{J*m} (disjoint patches).
Dataset clustered_patch_sample(const ClusteredPatchSpec& spec, int n, RngStream& rng);

// Every patch of every sample is an independent uniform point on the unit
// sphere S^{m-1}, labels are standard Gaussians. The fields must tile the
// coordinates exactly (each index covered once), so patch directions are
// free of cross-patch constraints. Inputs and labels come from separate
// streams keyed off `seed` and `label`, giving the usual prefix property
// in n. R = sqrt(J) by construction.
Dataset unit_anchor_dataset(const ReceptiveFields& fields, int n, std::uint64_t seed,
                            const std::string& label = "unit-anchor");

struct ImageBatch {
  int count = 0;
  static constexpr int height = 32;
  static constexpr int width = 32;
  static constexpr int channels = 3;
  // One row per image, 3072 normalized values, channel-planar then row-major
  // (the order of the binary format).
  Eigen::MatrixXd pixels;
  std::vector<std::uint8_t> labels;

  double pixel(int i, int c, int y, int x) const {
    return pixels(i, (c * height + y) * width + x);
  }
};

struct Cifar10Norm {
  std::array<double, 3> mu{0.4914, 0.4822, 0.4465};
  std::array<double, 3> sigma{0.2470, 0.2435, 0.2616};
};

// Reads CIFAR-10 binary batches (3073-byte records: label byte + 3072 pixel
// bytes, planar R,G,B row-major), scales to [0,1], then normalizes each
// channel as (x - mu_c)/sigma_c. `path` may be a single .bin file or a
// directory holding data_batch_*.bin / test_batch.bin.
ImageBatch cifar10_load(const std::string& path, const Cifar10Norm& norm = {});

// All kernel x kernel windows of every image (3 channels, so patch dimension
// 3*kernel^2), flattened channel-major then row-major, uniformly subsampled
// down to sample_count patches (everything if sample_count >= total).
// Only padding 0 is supported.
PatchCloud image_patches(const ImageBatch& batch, int kernel, int stride, int padding,
                         long sample_count, RngStream& rng);

// Whole images as a cloud in R^3072 (kernel = 32 special case convenience).
PatchCloud image_cloud(const ImageBatch& batch, long sample_count, RngStream& rng);

// Columnar text serialization, lossless via hexfloats.
std::string dataset_text(const Dataset& data);
void save_dataset(const Dataset& data, const std::string& path);
Dataset parse_dataset(const std::string& text);
Dataset load_dataset(const std::string& path);

}  // namespace eoslab
