#include <cstdio>
#include <cstdlib>
#include <string>
#include <thread>

#include "CLI11.hpp"

#include "eoslab/config.hpp"
#include "eoslab/experiments.hpp"

namespace {

int resolve_threads(long flag_value) {
  if (flag_value > 0) return static_cast<int>(flag_value);
  if (const char* env = std::getenv("EOSLAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
    std::fprintf(stderr, "eoslab: ignoring invalid EOSLAB_THREADS '%s'\n", env);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "eoslab: training, certification and geometry experiments for two-layer\n"
      "locally connected ReLU networks with weight sharing"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  long threads_flag = 0;
  app.add_option("--config", config_path, "Key-value configuration file");
  app.add_option("--out", out_dir, "Output directory (default out/<subcommand>)");
  auto* seed_opt = app.add_option("--seed", seed, "Override the config seed");
  app.add_option("--threads", threads_flag,
                 "Worker threads for sweeps (default: EOSLAB_THREADS, then hardware)");

  app.add_subcommand("train", "One full-batch GD run with sharpness telemetry");
  app.add_subcommand("scaling",
                     "Teacher-student sweep over (d, n, seed); fits gap-vs-n slopes");
  app.add_subcommand("interpolate",
                     "Build and verify a width-<=n exact interpolant on unit-anchor data");
  app.add_subcommand("geometry",
                     "Patch-cloud spectra and half-space depth concentration curves");
  app.add_subcommand(
      "cluster-ablation",
      "Clustered-patch comparison of fcn / lcn / lcn-ws. The unshared lcn keeps the\n"
      "patch structure but gives every location its own filter bank, with responses\n"
      "still averaged over locations.");
  app.add_subcommand("bound", "Rate-exponent calculator for the generalization bound");
  app.add_subcommand("certify",
                     "Path-norm certificate for a saved checkpoint on a saved dataset");
  app.add_subcommand("datagen", "Write synthetic datasets to disk");

  CLI11_PARSE(app, argc, argv);

  const std::string sub = app.get_subcommands().front()->get_name();
  if (out_dir.empty()) out_dir = "out/" + sub;

  try {
    eoslab::Config cfg =
        config_path.empty() ? eoslab::Config() : eoslab::Config::parse_file(config_path);
    if (seed_opt->count() > 0) cfg.set("seed", std::to_string(seed));
    const int threads = resolve_threads(threads_flag);

    if (sub == "train") return eoslab::run_train(cfg, out_dir);
    if (sub == "scaling") return eoslab::run_scaling(cfg, out_dir, threads);
    if (sub == "interpolate") return eoslab::run_interpolate(cfg, out_dir);
    if (sub == "geometry") return eoslab::run_geometry(cfg, out_dir);
    if (sub == "cluster-ablation") return eoslab::run_cluster_ablation(cfg, out_dir, threads);
    if (sub == "bound") return eoslab::run_bound(cfg, out_dir);
    if (sub == "certify") return eoslab::run_certify(cfg, out_dir);
    if (sub == "datagen") return eoslab::run_datagen(cfg, out_dir);
    std::fprintf(stderr, "eoslab: unhandled subcommand '%s'\n", sub.c_str());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "eoslab %s: %s\n", sub.c_str(), e.what());
    return 1;
  }
}
