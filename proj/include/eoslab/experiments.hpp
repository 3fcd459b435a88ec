#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "eoslab/ablation.hpp"
#include "eoslab/config.hpp"
#include "eoslab/datagen.hpp"
#include "eoslab/geometry.hpp"
#include "eoslab/training.hpp"

namespace eoslab {

// Collects run artifacts under one output directory (created on demand).
// Every file goes through an atomic temp+rename write and is hashed, so the
// closing manifest pins the byte content of the whole run.
class ArtifactSink {
 public:
  explicit ArtifactSink(std::string dir);
  const std::string& dir() const { return dir_; }

  // `name` is relative to the sink directory and may contain subdirectories.
  void write(const std::string& name, const std::string& content);

  // Writes config.txt (the resolved key-value text) and manifest.json.
  // The manifest covers config.txt and everything written before finish().
  void finish(const std::string& resolved_config);

 private:
  std::string dir_;
  std::vector<std::pair<std::string, std::uint64_t>> entries_;
};

// ---------------------------------------------------------------------------
// Teacher-student scaling sweep
// ---------------------------------------------------------------------------

struct ScalingPreset {
  std::vector<int> d_list{50, 100, 200};  // LCN-WS input dims, each m | d
  int fcn_d = 10;
  int m = 10;
  int K = 256;
  int K_true = 20;
  std::vector<int> n_list{128, 256, 512};
  int seeds = 3;
  double eta = 0.2;
  double sigma = 1.0;
  long epochs = 8000;
  long sharpness_every = 100;
  int n_test_factor = 16;  // held-out size = n_test_factor * n
  std::uint64_t base_seed = 0;
  bool with_certificate = false;

  static ScalingPreset desk();  // the reference configuration
  void validate() const;
};

struct ScalingCell {
  std::string arch;  // "fcn" or "lcn-ws"
  int d = 0;
  int n = 0;
  int seed_index = 0;

  std::string tag() const;  // e.g. "lcn-ws-d100-n256-s0"; used in file names
};

struct ScalingCellResult {
  ScalingCell cell;
  GapRow row;
  TrajectoryRecord trajectory;
  bool diverged = false;
};

// One teacher-student run. Stream labels are chosen so the teacher depends
// only on (arch, d), and data/init only on (arch, d, seed): n is deliberately
// absent from the data label, so a larger n extends the same sample.
ScalingCellResult run_scaling_cell(const ScalingPreset& preset, const ScalingCell& cell);

// All cells of a preset in deterministic order: lcn-ws sorted by (d, n, seed),
// then fcn by (n, seed).
std::vector<ScalingCell> scaling_cells(const ScalingPreset& preset);

struct ArchSlope {
  std::string arch;
  int d = 0;
  SlopeFit fit;
};

struct ScalingOutcome {
  std::vector<ScalingCellResult> results;  // scaling_cells() order
  std::vector<ArchSlope> fits;
  // Mean gap over seeds at the middle n of the sweep, one entry per LCN-WS d
  // (ascending d); feeds the fixed-n trend check.
  int mid_n = 0;
  std::vector<std::pair<int, double>> gap_at_mid_n;
  std::vector<std::string> warnings;
};

// Runs every cell on `threads` workers. With a sink, writes gap.csv,
// slopes.json, scaling.svg and one trajectory CSV per cell.
ScalingOutcome scaling_run(const ScalingPreset& preset, int threads, ArtifactSink* sink);

// ---------------------------------------------------------------------------
// Clustered-patch architecture ablation
// ---------------------------------------------------------------------------

struct AblationPreset {
  int J = 8;
  int m = 8;
  int K = 256;
  int n = 256;
  int n_test = 4096;
  double eta = 0.2;
  long epochs = 10000;
  long record_every = 100;
  int seeds = 3;
  double E_total = 1.0;
  std::uint64_t base_seed = 0;

  static AblationPreset desk();
  void validate() const;
};

inline constexpr std::array<AblationArch, 3> kAblationArchs{
    AblationArch::fcn, AblationArch::lcn, AblationArch::lcn_ws};

struct AblationOutcome {
  // Indexed [seed][arch], arch order fcn / lcn / lcn-ws.
  std::vector<std::array<LossCurve, 3>> curves;
  std::vector<std::array<double, 3>> final_test;
  int lcn_ws_wins = 0;  // seeds where lcn-ws has strictly the smallest final test loss
};

AblationOutcome cluster_ablation_run(const AblationPreset& preset, int threads,
                                     ArtifactSink* sink);

// ---------------------------------------------------------------------------
// Cloud geometry profiling
// ---------------------------------------------------------------------------

struct CloudProfile {
  std::string name;
  VarianceSpectrum spectrum;
  DepthProfile depth;
  double top3 = 0.0;  // cumulative explained variance at rank 3 (or last rank)
  double area = 0.0;  // trapezoidal area under the concentration curve
};

CloudProfile profile_cloud(const std::string& name, const PatchCloud& cloud, int n_dirs,
                           long n_probe, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Config-driven entry points, one per subcommand. Each parses its keys,
// runs, writes artifacts and a manifest under out_dir, and returns a process
// exit code (0 success; 2 when the run completed but its check failed, e.g.
// divergence or a certificate that does not hold).
// ---------------------------------------------------------------------------

int run_train(Config& cfg, const std::string& out_dir);
int run_scaling(Config& cfg, const std::string& out_dir, int threads);
int run_interpolate(Config& cfg, const std::string& out_dir);
int run_geometry(Config& cfg, const std::string& out_dir);
int run_cluster_ablation(Config& cfg, const std::string& out_dir, int threads);
int run_bound(Config& cfg, const std::string& out_dir);
int run_certify(Config& cfg, const std::string& out_dir);
int run_datagen(Config& cfg, const std::string& out_dir);

}  // namespace eoslab
