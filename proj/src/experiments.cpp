#include "eoslab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <thread>

#include "json.hpp"

#include "eoslab/checkpoint.hpp"
#include "eoslab/interpolator.hpp"
#include "eoslab/io.hpp"
#include "eoslab/stability.hpp"
#include "eoslab/svg.hpp"

namespace eoslab {

using nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

// Run `count` independent work items on up to `threads` workers. The first
// exception aborts the remaining queue and is rethrown on the caller thread.
template <typename Fn>
void parallel_for(long count, int threads, Fn&& fn) {
  if (count <= 0) return;
  const int workers = static_cast<int>(std::clamp<long>(threads, 1, count));
  if (workers == 1) {
    for (long i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<long> next{0};
  std::atomic<bool> failed{false};
  std::mutex mu;
  std::string what;
  auto body = [&] {
    for (;;) {
      const long i = next.fetch_add(1);
      if (i >= count || failed.load()) return;
      try {
        fn(i);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> g(mu);
        failed.store(true);
        if (what.empty()) what = e.what();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (failed.load()) throw std::runtime_error("worker failed: " + what);
}

// NaN and infinities have no JSON literal; emit null instead of relying on
// the serializer's silent coercion.
ordered_json json_num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

}  // namespace

// --- ArtifactSink -----------------------------------------------------------

ArtifactSink::ArtifactSink(std::string dir) : dir_(std::move(dir)) {
  require(!dir_.empty(), "ArtifactSink: empty output directory");
  std::filesystem::create_directories(dir_);
}

void ArtifactSink::write(const std::string& name, const std::string& content) {
  require(!name.empty(), "ArtifactSink: empty artifact name");
  const std::filesystem::path path = std::filesystem::path(dir_) / name;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  atomic_write_file(path.string(), content);
  const std::uint64_t hash = fnv1a64(content);
  for (auto& e : entries_) {
    if (e.first == name) {
      e.second = hash;
      return;
    }
  }
  entries_.emplace_back(name, hash);
}

void ArtifactSink::finish(const std::string& resolved_config) {
  write("config.txt", resolved_config);
  std::sort(entries_.begin(), entries_.end());
  ordered_json manifest;
  manifest["schema_version"] = 1;
  ordered_json arts = ordered_json::object();
  for (const auto& [name, hash] : entries_) arts[name] = hex64(hash);
  manifest["artifacts"] = std::move(arts);
  const std::filesystem::path path = std::filesystem::path(dir_) / "manifest.json";
  atomic_write_file(path.string(), dump(manifest));
}

// --- scaling sweep ----------------------------------------------------------

ScalingPreset ScalingPreset::desk() { return ScalingPreset{}; }

void ScalingPreset::validate() const {
  require(m >= 1, "scaling preset: need m >= 1");
  require(!d_list.empty(), "scaling preset: empty d list");
  for (int d : d_list)
    require(d >= m && d % m == 0, "scaling preset: every d must be a multiple of m");
  require(fcn_d >= 1, "scaling preset: need fcn_d >= 1");
  require(K >= 1 && K_true >= 1, "scaling preset: need K, K_true >= 1");
  require(!n_list.empty(), "scaling preset: empty n list");
  for (int n : n_list) require(n >= 1, "scaling preset: every n must be >= 1");
  require(seeds >= 1, "scaling preset: need seeds >= 1");
  require(eta > 0.0 && eta < 2.0, "scaling preset: eta must lie in (0, 2)");
  require(sigma >= 0.0, "scaling preset: sigma must be >= 0");
  require(epochs >= 1 && sharpness_every >= 1, "scaling preset: bad epoch counts");
  require(n_test_factor >= 1, "scaling preset: need n_test_factor >= 1");
}

std::string ScalingCell::tag() const {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s-d%d-n%d-s%d", arch.c_str(), d, n, seed_index);
  return buf;
}

std::vector<ScalingCell> scaling_cells(const ScalingPreset& preset) {
  std::vector<ScalingCell> cells;
  for (int d : preset.d_list)
    for (int n : preset.n_list)
      for (int s = 0; s < preset.seeds; ++s) cells.push_back({"lcn-ws", d, n, s});
  for (int n : preset.n_list)
    for (int s = 0; s < preset.seeds; ++s) cells.push_back({"fcn", preset.fcn_d, n, s});
  return cells;
}

ScalingCellResult run_scaling_cell(const ScalingPreset& preset, const ScalingCell& cell) {
  preset.validate();
  const bool is_fcn = cell.arch == "fcn";
  require(is_fcn || cell.arch == "lcn-ws", "run_scaling_cell: unknown arch '" + cell.arch + "'");
  const ReceptiveFields fields = is_fcn ? ReceptiveFields::fcn(cell.d)
                                        : ReceptiveFields::disjoint(cell.d, preset.m);

  // Teacher depends only on (arch, d); data and init add the seed index but
  // not n, so growing n extends the same draw instead of reshuffling it.
  const std::string scope = "arch=" + cell.arch + "/d=" + std::to_string(cell.d);
  const std::string seed_scope = scope + "/seed=" + std::to_string(cell.seed_index);
  RngStream teacher_rng(preset.base_seed, stream_id("teacher/" + scope));
  const ModelParams teacher = sample_teacher(fields, preset.K_true, teacher_rng);
  const RegressionSplits splits =
      make_regression_dataset(teacher, fields, cell.n, preset.n_test_factor * cell.n,
                              preset.sigma, preset.base_seed, "data/" + seed_scope);
  const ModelParams init =
      init_params(fields, preset.K, preset.base_seed, "init/" + seed_scope);

  TrainConfig tc;
  tc.eta = preset.eta;
  tc.epochs = preset.epochs;
  tc.sharpness_every = preset.sharpness_every;
  tc.seed = preset.base_seed;
  tc.K = preset.K;
  tc.with_certificate = preset.with_certificate;
  const TrainResult trained = gd_train(fields, splits.train, tc, &init);

  ScalingCellResult res;
  res.cell = cell;
  res.trajectory = trained.trajectory;
  res.diverged = trained.trajectory.diverged;
  res.row.arch = cell.arch;
  res.row.d = cell.d;
  res.row.m = fields.m;
  res.row.J = fields.J();
  res.row.K = preset.K;
  res.row.n = cell.n;
  res.row.seed = static_cast<std::uint64_t>(cell.seed_index);
  if (res.diverged) {
    res.row.gap = res.row.excess = res.row.train_risk = kNaN;
  } else {
    const GapEstimate ge =
        gap_estimate(trained.params, fields, splits.train, splits.test, preset.sigma);
    res.row.gap = ge.gap;
    res.row.excess = ge.excess;
    res.row.train_risk = ge.train_risk;
  }
  return res;
}

namespace {

struct ArchGroup {
  std::string arch;
  int d = 0;
};

std::vector<ArchGroup> scaling_groups(const ScalingPreset& preset) {
  std::vector<ArchGroup> groups;
  for (int d : preset.d_list) groups.push_back({"lcn-ws", d});
  groups.push_back({"fcn", preset.fcn_d});
  return groups;
}

}  // namespace

ScalingOutcome scaling_run(const ScalingPreset& preset, int threads, ArtifactSink* sink) {
  preset.validate();
  const std::vector<ScalingCell> cells = scaling_cells(preset);
  ScalingOutcome out;
  out.results.resize(cells.size());
  parallel_for(static_cast<long>(cells.size()), threads,
               [&](long i) { out.results[i] = run_scaling_cell(preset, cells[i]); });

  std::vector<GapRow> rows;
  rows.reserve(out.results.size());
  for (const auto& r : out.results) rows.push_back(r.row);

  for (const auto& g : scaling_groups(preset)) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : out.results) {
      if (r.cell.arch != g.arch || r.cell.d != g.d) continue;
      if (r.diverged) {
        out.warnings.push_back("excluded diverged run " + r.cell.tag() + " from the fit");
        continue;
      }
      pts.emplace_back(static_cast<double>(r.cell.n), r.row.gap);
    }
    ArchSlope slope;
    slope.arch = g.arch;
    slope.d = g.d;
    try {
      slope.fit = slope_fit(pts, &out.warnings);
    } catch (const std::invalid_argument& e) {
      out.warnings.push_back("slope fit skipped for " + g.arch + " d=" +
                             std::to_string(g.d) + ": " + e.what());
      slope.fit.slope = slope.fit.intercept = kNaN;
      slope.fit.used = 0;
      slope.fit.dropped = static_cast<long>(pts.size());
    }
    out.fits.push_back(slope);
  }

  out.mid_n = preset.n_list[preset.n_list.size() / 2];
  for (int d : preset.d_list) {
    double sum = 0.0;
    int count = 0;
    for (const auto& r : out.results) {
      if (r.cell.arch != "lcn-ws" || r.cell.d != d || r.cell.n != out.mid_n) continue;
      if (r.diverged || !std::isfinite(r.row.gap)) continue;
      sum += r.row.gap;
      ++count;
    }
    if (count == 0) {
      out.warnings.push_back("no usable gap at n=" + std::to_string(out.mid_n) +
                             " for lcn-ws d=" + std::to_string(d));
      out.gap_at_mid_n.emplace_back(d, kNaN);
    } else {
      out.gap_at_mid_n.emplace_back(d, sum / count);
    }
  }

  if (sink != nullptr) {
    for (const auto& r : out.results)
      sink->write("cells/" + r.cell.tag() + ".csv", trajectory_csv(r.trajectory));
    sink->write("gap.csv", gap_csv(rows));

    ordered_json slopes;
    slopes["schema_version"] = 1;
    ordered_json preset_echo;
    preset_echo["d_list"] = preset.d_list;
    preset_echo["fcn_d"] = preset.fcn_d;
    preset_echo["m"] = preset.m;
    preset_echo["K"] = preset.K;
    preset_echo["K_true"] = preset.K_true;
    preset_echo["n_list"] = preset.n_list;
    preset_echo["seeds"] = preset.seeds;
    preset_echo["eta"] = preset.eta;
    preset_echo["sigma"] = preset.sigma;
    preset_echo["epochs"] = preset.epochs;
    preset_echo["sharpness_every"] = preset.sharpness_every;
    preset_echo["n_test_factor"] = preset.n_test_factor;
    preset_echo["base_seed"] = preset.base_seed;
    slopes["preset"] = std::move(preset_echo);
    ordered_json fits = ordered_json::array();
    for (const auto& f : out.fits) {
      ordered_json row;
      row["arch"] = f.arch;
      row["d"] = f.d;
      row["slope"] = json_num(f.fit.slope);
      row["intercept"] = json_num(f.fit.intercept);
      row["used"] = f.fit.used;
      row["dropped"] = f.fit.dropped;
      fits.push_back(std::move(row));
    }
    slopes["fits"] = std::move(fits);
    slopes["mid_n"] = out.mid_n;
    ordered_json trend = ordered_json::array();
    for (const auto& [d, gap] : out.gap_at_mid_n) {
      ordered_json row;
      row["d"] = d;
      row["mean_gap"] = json_num(gap);
      trend.push_back(std::move(row));
    }
    slopes["gap_at_mid_n"] = std::move(trend);
    slopes["warnings"] = out.warnings;
    sink->write("slopes.json", dump(slopes));

    std::vector<PlotSeries> series;
    for (const auto& g : scaling_groups(preset)) {
      PlotSeries s;
      s.label = g.arch + " d=" + std::to_string(g.d);
      for (int n : preset.n_list) {
        double sum = 0.0;
        int count = 0;
        for (const auto& r : out.results) {
          if (r.cell.arch != g.arch || r.cell.d != g.d || r.cell.n != n) continue;
          if (r.diverged || !std::isfinite(r.row.gap)) continue;
          sum += r.row.gap;
          ++count;
        }
        s.x.push_back(static_cast<double>(n));
        s.y.push_back(count > 0 ? sum / count : kNaN);
      }
      series.push_back(std::move(s));
    }
    PlotSpec spec;
    spec.title = "Generalization gap vs sample size";
    spec.xlabel = "n";
    spec.ylabel = "gap";
    spec.logx = true;
    spec.logy = true;
    sink->write("scaling.svg", render_plot(spec, series));
  }
  return out;
}

// --- clustered-patch ablation ----------------------------------------------

AblationPreset AblationPreset::desk() { return AblationPreset{}; }

void AblationPreset::validate() const {
  require(J >= 1, "ablation preset: need J >= 1");
  require(m >= 2, "ablation preset: need m >= 2 for the standard class directions");
  require(K >= 1, "ablation preset: need K >= 1");
  require(n >= 1 && n_test >= 1, "ablation preset: need n, n_test >= 1");
  require(eta > 0.0 && eta < 2.0, "ablation preset: eta must lie in (0, 2)");
  require(epochs >= 1 && record_every >= 1, "ablation preset: bad epoch counts");
  require(seeds >= 1, "ablation preset: need seeds >= 1");
  require(E_total > 0.0, "ablation preset: need E_total > 0");
}

AblationOutcome cluster_ablation_run(const AblationPreset& preset, int threads,
                                     ArtifactSink* sink) {
  preset.validate();
  const ClusteredPatchSpec spec = ClusteredPatchSpec::standard(preset.J, preset.m, preset.E_total);
  AblationOutcome out;
  out.curves.resize(preset.seeds);
  out.final_test.resize(preset.seeds);

  const long units = static_cast<long>(preset.seeds) * 3;
  parallel_for(units, threads, [&](long u) {
    const int s = static_cast<int>(u / 3);
    const int a = static_cast<int>(u % 3);
    const std::string scope = "ablation/data/seed=" + std::to_string(s);
    RngStream train_rng(preset.base_seed, stream_id(scope + "/train"));
    const Dataset train = clustered_patch_sample(spec, preset.n, train_rng);
    RngStream test_rng(preset.base_seed, stream_id(scope + "/test"));
    const Dataset test = clustered_patch_sample(spec, preset.n_test, test_rng);

    AblationRunConfig rc;
    rc.K = preset.K;
    rc.eta = preset.eta;
    rc.epochs = preset.epochs;
    rc.record_every = preset.record_every;
    rc.seed = preset.base_seed + static_cast<std::uint64_t>(s);
    out.curves[s][a] =
        ablation_train(kAblationArchs[a], preset.J, preset.m, train, test, rc);
  });

  const double inf = std::numeric_limits<double>::infinity();
  for (int s = 0; s < preset.seeds; ++s) {
    for (int a = 0; a < 3; ++a) {
      const LossCurve& c = out.curves[s][a];
      out.final_test[s][a] = c.diverged ? inf : c.final_test();
    }
    const auto& ft = out.final_test[s];
    if (std::isfinite(ft[2]) && ft[2] < ft[0] && ft[2] < ft[1]) ++out.lcn_ws_wins;
  }

  if (sink != nullptr) {
    std::string csv = "arch,seed,epoch,train_loss,test_loss\n";
    for (int a = 0; a < 3; ++a) {
      for (int s = 0; s < preset.seeds; ++s) {
        const LossCurve& c = out.curves[s][a];
        for (std::size_t i = 0; i < c.epochs.size(); ++i) {
          csv += arch_name(kAblationArchs[a]);
          csv += ',' + std::to_string(s) + ',' + std::to_string(c.epochs[i]) + ',' +
                 fmt_g17(c.train_loss[i]) + ',' + fmt_g17(c.test_loss[i]) + '\n';
        }
      }
    }
    sink->write("curves.csv", csv);

    std::vector<PlotSeries> series;
    for (int a = 0; a < 3; ++a) {
      for (int s = 0; s < preset.seeds; ++s) {
        const LossCurve& c = out.curves[s][a];
        PlotSeries ps;
        ps.label = std::string(arch_name(kAblationArchs[a])) + " seed " + std::to_string(s);
        ps.x.assign(c.epochs.begin(), c.epochs.end());
        ps.y = c.test_loss;
        series.push_back(std::move(ps));
      }
    }
    PlotSpec pspec;
    pspec.title = "Clustered-patch ablation, test loss";
    pspec.xlabel = "epoch";
    pspec.ylabel = "test loss";
    pspec.logy = true;
    sink->write("ablation.svg", render_plot(pspec, series));

    ordered_json report;
    report["schema_version"] = 1;
    ordered_json preset_echo;
    preset_echo["J"] = preset.J;
    preset_echo["m"] = preset.m;
    preset_echo["K"] = preset.K;
    preset_echo["n"] = preset.n;
    preset_echo["n_test"] = preset.n_test;
    preset_echo["eta"] = preset.eta;
    preset_echo["epochs"] = preset.epochs;
    preset_echo["record_every"] = preset.record_every;
    preset_echo["seeds"] = preset.seeds;
    preset_echo["E_total"] = preset.E_total;
    preset_echo["base_seed"] = preset.base_seed;
    report["preset"] = std::move(preset_echo);
    ordered_json final = ordered_json::array();
    for (int s = 0; s < preset.seeds; ++s) {
      for (int a = 0; a < 3; ++a) {
        ordered_json row;
        row["arch"] = arch_name(kAblationArchs[a]);
        row["seed"] = s;
        row["test_loss"] = json_num(out.final_test[s][a]);
        row["diverged"] = out.curves[s][a].diverged;
        final.push_back(std::move(row));
      }
    }
    report["final_test"] = std::move(final);
    report["lcn_ws_wins"] = out.lcn_ws_wins;
    sink->write("ablation.json", dump(report));
  }
  return out;
}

// --- cloud profiling --------------------------------------------------------

CloudProfile profile_cloud(const std::string& name, const PatchCloud& cloud, int n_dirs,
                           long n_probe, std::uint64_t seed) {
  CloudProfile prof;
  prof.name = name;
  prof.spectrum = variance_spectrum(cloud);
  RngStream rng(seed, stream_id("geometry/depth/" + name));
  prof.depth = concentration_curve(cloud, n_dirs, n_probe, default_depth_grid(), rng);
  prof.area = curve_area(prof.depth);
  const Eigen::Index k = std::min<Eigen::Index>(3, prof.spectrum.cumulative.size());
  prof.top3 = k > 0 ? prof.spectrum.cumulative[k - 1] : 0.0;
  return prof;
}

// --- config-driven entry points --------------------------------------------

namespace {

ReceptiveFields fields_for(const std::string& arch, int d, int m) {
  if (arch == "fcn") {
    require(m == d, "fcn requires m = d");
    return ReceptiveFields::fcn(d);
  }
  require(arch == "lcn-ws", "unknown arch '" + arch + "' (expected fcn or lcn-ws)");
  return ReceptiveFields::disjoint(d, m);
}

std::vector<int> to_ints(const std::vector<long>& xs, const char* what) {
  std::vector<int> out;
  out.reserve(xs.size());
  for (long x : xs) {
    require(x >= 1 && x <= std::numeric_limits<int>::max(), std::string(what) + " out of range");
    out.push_back(static_cast<int>(x));
  }
  return out;
}

}  // namespace

int run_train(Config& cfg, const std::string& out_dir) {
  const std::string arch = cfg.get_str("arch", "lcn-ws");
  const int d = static_cast<int>(cfg.get_int("d"));
  const int m = static_cast<int>(arch == "fcn" ? cfg.get_int("m", d) : cfg.get_int("m"));
  const ReceptiveFields fields = fields_for(arch, d, m);
  const int K = static_cast<int>(cfg.get_int("K", 256));
  const int K_true = static_cast<int>(cfg.get_int("K_true", 20));
  const int n = static_cast<int>(cfg.get_int("n"));
  const int n_test = static_cast<int>(cfg.get_int("n_test", 16L * n));
  const double sigma = cfg.get_real("sigma", 1.0);

  TrainConfig tc;
  tc.eta = cfg.get_real("eta", 0.2);
  tc.epochs = cfg.get_int("epochs", 1000);
  tc.sharpness_every = cfg.get_int("sharpness_every", 100);
  tc.seed = cfg.get_u64("seed", 0);
  tc.K = K;
  tc.with_certificate = cfg.get_flag("certificate", false);
  tc.validate();
  require(K_true >= 1, "need K_true >= 1");
  require(n >= 1 && n_test >= 1, "need n, n_test >= 1");
  require(sigma >= 0.0, "need sigma >= 0");
  cfg.finish();

  RngStream teacher_rng(tc.seed, stream_id("train/teacher"));
  const ModelParams teacher = sample_teacher(fields, K_true, teacher_rng);
  const RegressionSplits splits =
      make_regression_dataset(teacher, fields, n, n_test, sigma, tc.seed, "train/data");
  const ModelParams init = init_params(fields, K, tc.seed, "train/init");
  const TrainResult res = gd_train(fields, splits.train, tc, &init);

  ArtifactSink sink(out_dir);
  sink.write("trajectory.csv", trajectory_csv(res.trajectory));
  sink.write("checkpoint.txt", checkpoint_text(res.params, fields));

  ordered_json report;
  report["schema_version"] = 1;
  report["arch"] = arch;
  report["diverged"] = res.trajectory.diverged;
  report["final_epoch"] = res.trajectory.final_epoch;
  const TelemetryRow& last = res.trajectory.rows.back();
  ordered_json fin;
  fin["epoch"] = last.epoch;
  fin["loss"] = json_num(last.loss);
  fin["risk"] = json_num(last.risk);
  fin["sharpness"] = json_num(last.sharpness);
  fin["beos"] = last.beos;
  fin["margin"] = json_num(last.margin);
  report["final"] = std::move(fin);
  if (!res.trajectory.diverged) {
    const GapEstimate ge = gap_estimate(res.params, fields, splits.train, splits.test, sigma);
    ordered_json gap;
    gap["excess"] = json_num(ge.excess);
    gap["sigma2"] = json_num(ge.sigma2);
    gap["train_risk"] = json_num(ge.train_risk);
    gap["gap"] = json_num(ge.gap);
    report["gap"] = std::move(gap);
  }
  sink.write("train.json", dump(report));
  sink.finish(cfg.resolved_text());

  if (res.trajectory.diverged) {
    std::fprintf(stderr, "train: diverged at epoch %ld (loss %.6g)\n",
                 res.trajectory.final_epoch, last.loss);
    return 2;
  }
  return 0;
}

int run_scaling(Config& cfg, const std::string& out_dir, int threads) {
  ScalingPreset preset;
  preset.d_list = to_ints(cfg.get_int_list("d_list", {50, 100, 200}), "d_list entry");
  preset.fcn_d = static_cast<int>(cfg.get_int("fcn_d", 10));
  preset.m = static_cast<int>(cfg.get_int("m", 10));
  preset.K = static_cast<int>(cfg.get_int("K", 256));
  preset.K_true = static_cast<int>(cfg.get_int("K_true", 20));
  preset.n_list = to_ints(cfg.get_int_list("n_list", {128, 256, 512}), "n_list entry");
  preset.seeds = static_cast<int>(cfg.get_int("seeds", 3));
  preset.eta = cfg.get_real("eta", 0.2);
  preset.sigma = cfg.get_real("sigma", 1.0);
  preset.epochs = cfg.get_int("epochs", 8000);
  preset.sharpness_every = cfg.get_int("sharpness_every", 100);
  preset.n_test_factor = static_cast<int>(cfg.get_int("n_test_factor", 16));
  preset.base_seed = cfg.get_u64("seed", 0);
  preset.with_certificate = cfg.get_flag("certificate", false);
  preset.validate();
  cfg.finish();

  ArtifactSink sink(out_dir);
  const ScalingOutcome out = scaling_run(preset, threads, &sink);
  sink.finish(cfg.resolved_text());
  for (const auto& w : out.warnings) std::fprintf(stderr, "scaling: %s\n", w.c_str());
  return 0;
}

int run_interpolate(Config& cfg, const std::string& out_dir) {
  const std::string source = cfg.get_str("source", "synthetic");
  const double norm_tol = cfg.get_real("norm_tol", 1e-9);
  const bool with_offset = cfg.get_flag("with_offset", true);

  Dataset data;
  ReceptiveFields fields;
  if (source == "synthetic") {
    const int d = static_cast<int>(cfg.get_int("d"));
    const int m = static_cast<int>(cfg.get_int("m"));
    const int n = static_cast<int>(cfg.get_int("n"));
    const std::uint64_t seed = cfg.get_u64("seed", 0);
    fields = m == d ? ReceptiveFields::fcn(d) : ReceptiveFields::disjoint(d, m);
    data = unit_anchor_dataset(fields, n, seed);
  } else if (source == "file") {
    const std::string path = cfg.get_str("dataset");
    const int m = static_cast<int>(cfg.get_int("m"));
    data = load_dataset(path);
    fields = m == data.d() ? ReceptiveFields::fcn(data.d())
                           : ReceptiveFields::disjoint(data.d(), m);
  } else {
    throw std::invalid_argument("interpolate: unknown source '" + source +
                                "' (expected synthetic or file)");
  }
  cfg.finish();

  const AnchorMap anchors = find_anchors(data, fields, norm_tol);
  const ModelParams params = construct_interpolant(data, fields, anchors);
  const InterpolationReport rep = verify_interpolant(params, data, fields, with_offset);

  ArtifactSink sink(out_dir);
  sink.write("checkpoint.txt", checkpoint_text(params, fields));
  ordered_json report;
  report["schema_version"] = 1;
  report["n"] = data.n();
  report["d"] = data.d();
  report["m"] = fields.m;
  report["J"] = fields.J();
  report["width"] = params.K;
  report["width_le_n"] = params.K <= data.n();
  report["with_offset"] = with_offset;
  report["max_residual"] = json_num(rep.max_residual);
  report["lambda_max"] = json_num(rep.lambda_max);
  report["bound"] = json_num(rep.bound);
  report["sharp_converged"] = rep.sharp_converged;
  report["pass"] = rep.pass;
  sink.write("interpolate.json", dump(report));
  sink.finish(cfg.resolved_text());

  if (!rep.pass) {
    std::fprintf(stderr, "interpolate: verification failed (residual %.3g, lambda %.6g vs bound %.6g)\n",
                 rep.max_residual, rep.lambda_max, rep.bound);
    return 2;
  }
  return 0;
}

int run_geometry(Config& cfg, const std::string& out_dir) {
  const std::string source = cfg.get_str("source");
  const int n_dirs = static_cast<int>(cfg.get_int("dirs", 1000));
  const long n_probe = cfg.get_int("probes", 2000);
  const std::uint64_t seed = cfg.get_u64("seed", 0);

  std::vector<std::pair<std::string, PatchCloud>> clouds;
  if (source == "cifar") {
    const std::string path = cfg.get_str("cifar");
    const int kernel = static_cast<int>(cfg.get_int("kernel", 3));
    const int stride = static_cast<int>(cfg.get_int("stride", 1));
    const long patches = cfg.get_int("patches", 100000);
    const long images = cfg.get_int("images", 10000);
    cfg.finish();
    const ImageBatch batch = cifar10_load(path);
    RngStream patch_rng(seed, stream_id("geometry/sample/patches"));
    clouds.emplace_back("patches", image_patches(batch, kernel, stride, 0, patches, patch_rng));
    RngStream image_rng(seed, stream_id("geometry/sample/images"));
    clouds.emplace_back("images", image_cloud(batch, images, image_rng));
  } else if (source == "sphere") {
    const int m = static_cast<int>(cfg.get_int("m"));
    const long count = cfg.get_int("count", 10000);
    cfg.finish();
    require(count >= 2, "geometry: need count >= 2");
    PatchCloud cloud;
    cloud.m = m;
    RngStream rng(seed, stream_id("geometry/sample/sphere"));
    cloud.points = sample_sphere(static_cast<int>(count), m, rng);
    clouds.emplace_back("sphere", std::move(cloud));
  } else if (source == "dataset") {
    const std::string path = cfg.get_str("dataset");
    const int m = static_cast<int>(cfg.get_int("m"));
    cfg.finish();
    const Dataset data = load_dataset(path);
    const ReceptiveFields fields = m == data.d() ? ReceptiveFields::fcn(data.d())
                                                 : ReceptiveFields::disjoint(data.d(), m);
    clouds.emplace_back("dataset", extract_cloud(data, fields));
  } else {
    throw std::invalid_argument("geometry: unknown source '" + source +
                                "' (expected cifar, sphere or dataset)");
  }

  ArtifactSink sink(out_dir);
  std::vector<CloudProfile> profiles;
  for (const auto& [name, cloud] : clouds) {
    profiles.push_back(profile_cloud(name, cloud, n_dirs, n_probe, seed));
    sink.write(name + ".spectrum.csv", spectrum_csv(profiles.back().spectrum));
    sink.write(name + ".depth.csv", depth_csv(profiles.back().depth));
  }

  std::vector<PlotSeries> depth_series;
  std::vector<PlotSeries> spectrum_series;
  for (const auto& p : profiles) {
    PlotSeries ds;
    ds.label = p.name;
    ds.x.assign(p.depth.thresholds.begin(), p.depth.thresholds.end());
    ds.y.assign(p.depth.psi.begin(), p.depth.psi.end());
    depth_series.push_back(std::move(ds));
    PlotSeries ss;
    ss.label = p.name;
    for (Eigen::Index i = 0; i < p.spectrum.cumulative.size(); ++i) {
      ss.x.push_back(static_cast<double>(i + 1));
      ss.y.push_back(p.spectrum.cumulative[i]);
    }
    spectrum_series.push_back(std::move(ss));
  }
  PlotSpec depth_spec;
  depth_spec.title = "Half-space depth concentration";
  depth_spec.xlabel = "depth threshold T";
  depth_spec.ylabel = "fraction with depth >= T";
  sink.write("geometry.svg", render_plot(depth_spec, depth_series));
  PlotSpec spec_spec;
  spec_spec.title = "Explained variance";
  spec_spec.xlabel = "rank";
  spec_spec.ylabel = "cumulative fraction";
  spec_spec.logx = true;
  sink.write("spectrum.svg", render_plot(spec_spec, spectrum_series));

  ordered_json report;
  report["schema_version"] = 1;
  ordered_json arr = ordered_json::array();
  for (const auto& p : profiles) {
    ordered_json row;
    row["name"] = p.name;
    row["top3_cumulative_ev"] = json_num(p.top3);
    row["depth_curve_area"] = json_num(p.area);
    arr.push_back(std::move(row));
  }
  report["clouds"] = std::move(arr);
  sink.write("geometry.json", dump(report));
  sink.finish(cfg.resolved_text());
  return 0;
}

int run_cluster_ablation(Config& cfg, const std::string& out_dir, int threads) {
  AblationPreset preset;
  preset.J = static_cast<int>(cfg.get_int("J", 8));
  preset.m = static_cast<int>(cfg.get_int("m", 8));
  preset.K = static_cast<int>(cfg.get_int("K", 256));
  preset.n = static_cast<int>(cfg.get_int("n", 256));
  preset.n_test = static_cast<int>(cfg.get_int("n_test", 4096));
  preset.eta = cfg.get_real("eta", 0.2);
  preset.epochs = cfg.get_int("epochs", 10000);
  preset.record_every = cfg.get_int("record_every", 100);
  preset.seeds = static_cast<int>(cfg.get_int("seeds", 3));
  preset.E_total = cfg.get_real("E_total", 1.0);
  preset.base_seed = cfg.get_u64("seed", 0);
  preset.validate();
  cfg.finish();

  ArtifactSink sink(out_dir);
  cluster_ablation_run(preset, threads, &sink);
  sink.finish(cfg.resolved_text());
  return 0;
}

int run_bound(Config& cfg, const std::string& out_dir) {
  const int d = static_cast<int>(cfg.get_int("d"));
  const int m = static_cast<int>(cfg.get_int("m"));
  const double J = cfg.get_real("J", m > 0 ? static_cast<double>(d) / m : 1.0);
  const double n = cfg.get_real("n");
  const double eta = cfg.get_real("eta", 0.2);
  const double M = cfg.get_real("M", 1.0);
  const double delta = cfg.get_real("delta", 0.05);
  const double D = cfg.get_real("D", M);
  RateBoundConstants consts;
  consts.C_ep = cfg.get_real("C_ep", 1.0);
  consts.C_val = cfg.get_real("C_val", 1.0);
  cfg.finish();

  const RateBound rb = rate_bound(d, m, J, n, eta, M, delta, D, consts);

  ordered_json report;
  report["schema_version"] = 1;
  report["d"] = rb.d;
  report["m"] = rb.m;
  report["J"] = rb.J;
  report["n"] = rb.n;
  report["eta"] = rb.eta;
  report["M"] = rb.M;
  report["delta"] = rb.delta;
  report["D"] = rb.D;
  report["C_ep"] = rb.consts.C_ep;
  report["C_val"] = rb.consts.C_val;
  report["constants_are_surrogates"] = true;
  report["A"] = json_num(rb.A);
  report["P"] = json_num(rb.P);
  report["alpha_A"] = json_num(rb.alpha_A);
  report["alpha_J"] = json_num(rb.alpha_J);
  report["alpha_M"] = json_num(rb.alpha_M);
  report["alpha_n"] = json_num(rb.alpha_n);
  report["eps_min"] = json_num(rb.eps_min);
  report["eps_star"] = json_num(rb.eps_star);
  report["eps_dagger"] = json_num(rb.eps_dagger);
  report["term_approx"] = json_num(rb.term_approx);
  report["term_fluct"] = json_num(rb.term_fluct);
  report["bound"] = json_num(rb.bound);
  report["valid"] = rb.valid;

  ArtifactSink sink(out_dir);
  sink.write("bound.json", dump(report));
  sink.finish(cfg.resolved_text());
  return 0;
}

int run_certify(Config& cfg, const std::string& out_dir) {
  const std::string ckpt_path = cfg.get_str("checkpoint");
  const std::string data_path = cfg.get_str("dataset");
  std::optional<double> eta;
  if (cfg.has("eta")) eta = cfg.get_real("eta");
  const double sharp_tol = cfg.get_real("sharp_tol", 1e-8);
  const int sharp_max_iter = static_cast<int>(cfg.get_int("sharp_max_iter", 1000));
  cfg.finish();

  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const Dataset data = load_dataset(data_path);
  const Certificate cert =
      certificate(ckpt.params, ckpt.fields, data, eta, sharp_tol, sharp_max_iter);

  ordered_json report;
  report["schema_version"] = 1;
  report["holds"] = cert.holds;
  report["lhs"] = json_num(cert.lhs);
  report["rhs"] = json_num(cert.rhs);
  report["slack"] = json_num(cert.slack);
  report["sharpness"] = json_num(cert.sharpness);
  report["sharp_converged"] = cert.sharp_converged;
  report["loss"] = json_num(cert.loss);
  report["margin"] = json_num(cert.margin);
  report["R"] = json_num(data.R);
  if (cert.rhs_beos) report["rhs_beos"] = json_num(*cert.rhs_beos);

  ArtifactSink sink(out_dir);
  sink.write("certify.json", dump(report));
  sink.finish(cfg.resolved_text());

  if (!cert.holds) {
    std::fprintf(stderr, "certify: certificate does not hold (lhs %.6g > rhs %.6g)\n",
                 cert.lhs, cert.rhs);
    return 2;
  }
  return 0;
}

int run_datagen(Config& cfg, const std::string& out_dir) {
  const std::string kind = cfg.get_str("kind");
  const std::uint64_t seed = cfg.get_u64("seed", 0);
  const int n = static_cast<int>(cfg.get_int("n"));

  ArtifactSink sink(out_dir);
  ordered_json report;
  report["schema_version"] = 1;
  report["kind"] = kind;

  if (kind == "regression") {
    const std::string arch = cfg.get_str("arch", "lcn-ws");
    const int d = static_cast<int>(cfg.get_int("d"));
    const int m = static_cast<int>(arch == "fcn" ? cfg.get_int("m", d) : cfg.get_int("m"));
    const ReceptiveFields fields = fields_for(arch, d, m);
    const int K_true = static_cast<int>(cfg.get_int("K_true", 20));
    const double sigma = cfg.get_real("sigma", 1.0);
    const int n_test = static_cast<int>(cfg.get_int("n_test", 16L * n));
    cfg.finish();
    RngStream teacher_rng(seed, stream_id("datagen/teacher"));
    const ModelParams teacher = sample_teacher(fields, K_true, teacher_rng);
    const RegressionSplits splits =
        make_regression_dataset(teacher, fields, n, n_test, sigma, seed, "datagen/data");
    sink.write("train.txt", dataset_text(splits.train));
    sink.write("test.txt", dataset_text(splits.test));
    report["d"] = d;
    report["n"] = n;
    report["n_test"] = n_test;
  } else if (kind == "clustered") {
    const int J = static_cast<int>(cfg.get_int("J"));
    const int m = static_cast<int>(cfg.get_int("m"));
    const double E_total = cfg.get_real("E_total", 1.0);
    const int n_test = static_cast<int>(cfg.get_int("n_test", 0));
    cfg.finish();
    const ClusteredPatchSpec spec = ClusteredPatchSpec::standard(J, m, E_total);
    RngStream train_rng(seed, stream_id("datagen/clustered/train"));
    sink.write("train.txt", dataset_text(clustered_patch_sample(spec, n, train_rng)));
    if (n_test > 0) {
      RngStream test_rng(seed, stream_id("datagen/clustered/test"));
      sink.write("test.txt", dataset_text(clustered_patch_sample(spec, n_test, test_rng)));
    }
    report["d"] = J * m;
    report["n"] = n;
    report["n_test"] = n_test;
  } else if (kind == "unit-anchor") {
    const int d = static_cast<int>(cfg.get_int("d"));
    const int m = static_cast<int>(cfg.get_int("m"));
    cfg.finish();
    const ReceptiveFields fields =
        m == d ? ReceptiveFields::fcn(d) : ReceptiveFields::disjoint(d, m);
    sink.write("train.txt", dataset_text(unit_anchor_dataset(fields, n, seed)));
    report["d"] = d;
    report["n"] = n;
  } else {
    throw std::invalid_argument("datagen: unknown kind '" + kind +
                                "' (expected regression, clustered or unit-anchor)");
  }

  sink.write("datagen.json", dump(report));
  sink.finish(cfg.resolved_text());
  return 0;
}

}  // namespace eoslab
