#include "eoslab/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include "eoslab/io.hpp"

namespace eoslab {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

Eigen::MatrixXd sample_sphere(int n, int d, RngStream& rng) {
  require(n >= 1 && d >= 1, "sample_sphere: need n >= 1 and d >= 1");
  Eigen::MatrixXd X(n, d);
  std::vector<double> buf(d);
  for (int i = 0; i < n; ++i) {
    fill_gaussian(rng, buf.data(), d);
    double sq = 0.0;
    for (double g : buf) sq += g * g;
    if (sq == 0.0) {
      X.row(i).setZero();
      X(i, 0) = 1.0;
      continue;
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (int c = 0; c < d; ++c) X(i, c) = buf[c] * inv;
  }
  return X;
}

ModelParams sample_teacher(const ReceptiveFields& fields, int K_true, RngStream& rng) {
  require(K_true >= 1, "sample_teacher: need K_true >= 1");
  ModelParams p;
  p.K = K_true;
  p.m = fields.m;
  p.W.resize(K_true, fields.m);
  const double w_scale = std::sqrt(2.0 / fields.m);
  std::vector<double> buf(fields.m);
  for (int k = 0; k < K_true; ++k) {
    fill_gaussian(rng, buf.data(), fields.m);
    for (int c = 0; c < fields.m; ++c) p.W(k, c) = w_scale * buf[c];
    if (p.W.row(k).norm() == 0.0) p.W(k, 0) = w_scale;
  }
  p.b = Eigen::VectorXd::Zero(K_true);
  p.v.resize(K_true);
  const double v_scale = std::sqrt(2.0 / K_true);
  fill_gaussian(rng, p.v.data(), K_true);
  p.v *= v_scale;
  p.beta = 0.0;
  p.validate();
  return p;
}

namespace {

Dataset regression_split(const ModelParams& teacher, const ReceptiveFields& fields, int n,
                         double sigma, std::uint64_t seed, const std::string& x_label,
                         const std::string& noise_label) {
  RngStream x_rng(seed, stream_id(x_label));
  RngStream noise_rng(seed, stream_id(noise_label));
  Dataset data;
  data.X = sample_sphere(n, fields.d, x_rng);
  data.f_true.resize(n);
  for (int i = 0; i < n; ++i) data.f_true[i] = forward(teacher, fields, data.X.row(i));
  data.y = data.f_true;
  if (sigma > 0.0) {
    Eigen::VectorXd noise(n);
    fill_gaussian(noise_rng, noise.data(), n);
    data.y += sigma * noise;
  }
  data.R = 1.0;
  data.D = data.y.cwiseAbs().maxCoeff();
  data.validate();
  return data;
}

}  // namespace

RegressionSplits make_regression_dataset(const ModelParams& teacher,
                                         const ReceptiveFields& fields, int n_train,
                                         int n_test, double sigma, std::uint64_t seed,
                                         const std::string& label_prefix) {
  require(n_train >= 1 && n_test >= 1, "make_regression_dataset: need positive split sizes");
  require(sigma >= 0.0, "make_regression_dataset: sigma must be >= 0");
  RegressionSplits out;
  out.train = regression_split(teacher, fields, n_train, sigma, seed,
                               label_prefix + "/train/x", label_prefix + "/train/noise");
  out.test = regression_split(teacher, fields, n_test, sigma, seed,
                              label_prefix + "/test/x", label_prefix + "/test/noise");
  return out;
}

double ClusteredPatchSpec::sigma() const { return std::sqrt(E_total / (J * m)); }

void ClusteredPatchSpec::validate() const {
  require(J >= 1 && m >= 1, "clustered spec: need J >= 1 and m >= 1");
  require(v_plus.size() == m && v_minus.size() == m,
          "clustered spec: signal direction dimension != m");
  require(std::abs(v_plus.norm() - 1.0) < 1e-10 && std::abs(v_minus.norm() - 1.0) < 1e-10,
          "clustered spec: signal directions must be unit norm");
  require(E_total >= 0.0, "clustered spec: negative noise energy");
}

ClusteredPatchSpec ClusteredPatchSpec::standard(int J, int m, double E_total) {
  require(m >= 2, "clustered spec: standard() needs m >= 2 for orthogonal signals");
  ClusteredPatchSpec spec;
  spec.J = J;
  spec.m = m;
  spec.v_plus = Eigen::VectorXd::Zero(m);
  spec.v_plus[0] = 1.0;
  spec.v_minus = Eigen::VectorXd::Zero(m);
  spec.v_minus[1] = 1.0;
  spec.E_total = E_total;
  return spec;
}

Dataset clustered_patch_sample(const ClusteredPatchSpec& spec, int n, RngStream& rng) {
  spec.validate();
  require(n >= 1, "clustered_patch_sample: need n >= 1");
  const int d = spec.J * spec.m;
  const double sd = spec.sigma();
  Dataset data;
  data.X.resize(n, d);
  data.y.resize(n);
  std::vector<double> noise(d);
  for (int i = 0; i < n; ++i) {
    // Fixed consumption per sample: one draw for the class, one for the
    // location (multiply-shift, no rejection), then the noise block.
    const bool plus = (rng.next_u64() & 1) != 0;
    const int loc = static_cast<int>(
        (static_cast<unsigned __int128>(rng.next_u64()) * spec.J) >> 64);
    fill_gaussian(rng, noise.data(), d);
    for (int c = 0; c < d; ++c) data.X(i, c) = sd * noise[c];
    const Eigen::VectorXd& v = plus ? spec.v_plus : spec.v_minus;
    data.X.row(i).segment(loc * spec.m, spec.m) += v.transpose();
    data.y[i] = plus ? spec.target_plus : spec.target_minus;
  }
  data.R = data.X.rowwise().norm().maxCoeff();
  data.D = data.y.cwiseAbs().maxCoeff();
  data.f_true = data.y;  // targets are noiseless; all randomness is in X
  data.validate();
  return data;
}

Dataset unit_anchor_dataset(const ReceptiveFields& fields, int n, std::uint64_t seed,
                            const std::string& label) {
  fields.validate();
  require(n >= 1, "unit_anchor_dataset: need n >= 1");
  // The patches must tile the coordinates, otherwise normalizing one patch
  // would disturb another.
  std::vector<int> covered(fields.d, 0);
  for (const auto& s : fields.subsets)
    for (int c : s) covered[c] += 1;
  for (int c = 0; c < fields.d; ++c) {
    require(covered[c] == 1, "unit_anchor_dataset: fields must cover every coordinate exactly once");
  }

  RngStream xs(seed, stream_id(label + "/x"));
  RngStream ys(seed, stream_id(label + "/y"));
  Dataset data;
  data.X.resize(n, fields.d);
  data.y.resize(n);
  std::vector<double> row(fields.d);
  for (int i = 0; i < n; ++i) {
    fill_gaussian(xs, row.data(), fields.d);
    for (int c = 0; c < fields.d; ++c) data.X(i, c) = row[c];
    for (const auto& s : fields.subsets) {
      double sq = 0.0;
      for (int c : s) sq += data.X(i, c) * data.X(i, c);
      if (sq == 0.0) {
        for (int c : s) data.X(i, c) = 0.0;
        data.X(i, s[0]) = 1.0;
      } else {
        const double inv = 1.0 / std::sqrt(sq);
        for (int c : s) data.X(i, c) *= inv;
      }
    }
    data.y[i] = ys.gaussian();
  }
  data.R = std::sqrt(static_cast<double>(fields.J()));
  data.D = data.y.cwiseAbs().maxCoeff();
  data.validate();
  return data;
}

// --- CIFAR-10 ingestion -----------------------------------------------------

namespace {

constexpr long kRecordBytes = 3073;

void append_cifar_file(const std::string& file, const Cifar10Norm& norm,
                       std::vector<double>& pixels, std::vector<std::uint8_t>& labels) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cifar10: cannot open " + file);
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const long size = static_cast<long>(raw.size());
  if (size == 0 || size % kRecordBytes != 0) {
    char msg[256];
    std::snprintf(msg, sizeof(msg),
                  "cifar10: %s: size %ld is not a positive multiple of %ld "
                  "(truncated record starts at byte offset %ld)",
                  file.c_str(), size, kRecordBytes, (size / kRecordBytes) * kRecordBytes);
    throw std::runtime_error(msg);
  }
  const long records = size / kRecordBytes;
  double scale[3], shift[3];
  for (int c = 0; c < 3; ++c) {
    scale[c] = 1.0 / (255.0 * norm.sigma[c]);
    shift[c] = norm.mu[c] / norm.sigma[c];
  }
  for (long r = 0; r < records; ++r) {
    const unsigned char* rec = reinterpret_cast<const unsigned char*>(raw.data()) + r * kRecordBytes;
    labels.push_back(rec[0]);
    for (int c = 0; c < 3; ++c)
      for (int px = 0; px < 1024; ++px)
        pixels.push_back(rec[1 + c * 1024 + px] * scale[c] - shift[c]);
  }
}

}  // namespace

ImageBatch cifar10_load(const std::string& path, const Cifar10Norm& norm) {
  namespace fs = std::filesystem;
  std::vector<std::string> files;
  if (fs::is_directory(path)) {
    for (const char* name : {"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin",
                             "data_batch_4.bin", "data_batch_5.bin", "test_batch.bin"}) {
      const fs::path p = fs::path(path) / name;
      if (fs::exists(p)) files.push_back(p.string());
    }
    if (files.empty())
      throw std::runtime_error("cifar10: no batch files (data_batch_*.bin, test_batch.bin) in " +
                               path);
  } else if (fs::exists(path)) {
    files.push_back(path);
  } else {
    throw std::runtime_error("cifar10: no such file or directory: " + path);
  }

  std::vector<double> pixels;
  ImageBatch batch;
  for (const auto& f : files) append_cifar_file(f, norm, pixels, batch.labels);
  batch.count = static_cast<int>(batch.labels.size());
  batch.pixels = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                Eigen::RowMajor>>(pixels.data(), batch.count,
                                                                  3072);
  return batch;
}

namespace {

std::vector<long> subsample_indices(long total, long want, RngStream& rng) {
  std::vector<long> idx;
  if (want >= total) {
    idx.resize(total);
    for (long i = 0; i < total; ++i) idx[i] = i;
    return idx;
  }
  std::unordered_set<long> seen;
  idx.reserve(want);
  while (static_cast<long>(idx.size()) < want) {
    const long cand = static_cast<long>(rng.uniform_below(static_cast<std::uint64_t>(total)));
    if (seen.insert(cand).second) idx.push_back(cand);
  }
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

PatchCloud image_patches(const ImageBatch& batch, int kernel, int stride, int padding,
                         long sample_count, RngStream& rng) {
  require(batch.count >= 1, "image_patches: empty batch");
  require(kernel >= 1 && kernel <= ImageBatch::width, "image_patches: kernel must be in [1,32]");
  require(stride >= 1, "image_patches: stride must be >= 1");
  require(padding == 0, "image_patches: only padding 0 is supported");
  require(sample_count >= 1, "image_patches: need sample_count >= 1");

  const int side = (ImageBatch::width - kernel) / stride + 1;
  const long per_image = static_cast<long>(side) * side;
  const long total = per_image * batch.count;
  const int dim = ImageBatch::channels * kernel * kernel;

  const std::vector<long> idx = subsample_indices(total, sample_count, rng);
  PatchCloud cloud;
  cloud.m = dim;
  cloud.points.resize(static_cast<long>(idx.size()), dim);
  cloud.source = PatchCloud::Source::external;
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const long g = idx[r];
    const int img = static_cast<int>(g / per_image);
    const long win = g % per_image;
    const int wy = static_cast<int>(win / side) * stride;
    const int wx = static_cast<int>(win % side) * stride;
    int out = 0;
    for (int c = 0; c < ImageBatch::channels; ++c)
      for (int ky = 0; ky < kernel; ++ky)
        for (int kx = 0; kx < kernel; ++kx)
          cloud.points(r, out++) = batch.pixel(img, c, wy + ky, wx + kx);
  }
  cloud.validate();
  return cloud;
}

PatchCloud image_cloud(const ImageBatch& batch, long sample_count, RngStream& rng) {
  require(batch.count >= 1, "image_cloud: empty batch");
  require(sample_count >= 1, "image_cloud: need sample_count >= 1");
  const std::vector<long> idx = subsample_indices(batch.count, sample_count, rng);
  PatchCloud cloud;
  cloud.m = 3072;
  cloud.points.resize(static_cast<long>(idx.size()), 3072);
  cloud.source = PatchCloud::Source::external;
  for (std::size_t r = 0; r < idx.size(); ++r) cloud.points.row(r) = batch.pixels.row(idx[r]);
  cloud.validate();
  return cloud;
}

// --- text serialization -----------------------------------------------------

std::string dataset_text(const Dataset& data) {
  data.validate();
  const bool has_f = data.f_true.size() == data.y.size();
  std::string out = "eoslab-dataset v1\n";
  out += "n " + std::to_string(data.n()) + " d " + std::to_string(data.d()) + " f_true " +
         (has_f ? "1" : "0") + "\n";
  out += "R " + fmt_hex(data.R) + " D " + fmt_hex(data.D) + "\n";
  out += "data\n";
  for (long i = 0; i < data.n(); ++i) {
    std::string row;
    for (long c = 0; c < data.d(); ++c) {
      row += fmt_hex(data.X(i, c));
      row += ' ';
    }
    row += fmt_hex(data.y[i]);
    if (has_f) {
      row += ' ';
      row += fmt_hex(data.f_true[i]);
    }
    row += '\n';
    out += row;
  }
  return out;
}

void save_dataset(const Dataset& data, const std::string& path) {
  atomic_write_file(path, dataset_text(data));
}

Dataset parse_dataset(const std::string& text) {
  TokenCursor cur(text, "dataset");
  cur.expect("eoslab-dataset");
  cur.expect("v1");
  cur.expect("n");
  const long n = cur.integer();
  cur.expect("d");
  const long d = cur.integer();
  cur.expect("f_true");
  const long has_f = cur.integer();
  if (n < 1 || d < 1 || (has_f != 0 && has_f != 1))
    throw std::runtime_error("dataset: malformed header counts");
  Dataset data;
  cur.expect("R");
  data.R = cur.real();
  cur.expect("D");
  data.D = cur.real();
  cur.expect("data");
  data.X.resize(n, d);
  data.y.resize(n);
  if (has_f) data.f_true.resize(n);
  for (long i = 0; i < n; ++i) {
    for (long c = 0; c < d; ++c) data.X(i, c) = cur.real();
    data.y[i] = cur.real();
    if (has_f) data.f_true[i] = cur.real();
  }
  cur.finish();
  try {
    data.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("dataset: ") + e.what());
  }
  return data;
}

Dataset load_dataset(const std::string& path) { return parse_dataset(read_file(path)); }

}  // namespace eoslab
