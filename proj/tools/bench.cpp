// bench: experiment runner for the sample-sharing library.
//
//   bench run --config <file> [--out <dir>] [--seed <u64>] [--repeats <k>] [--threads <k>]
//   bench datasets verify --path <dir>
//
// Exit codes: 0 success, 1 runtime failure, 2 configuration error, 3 I/O error.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sampleshare/bench/config.hpp"
#include "sampleshare/bench/datasets.hpp"
#include "sampleshare/bench/experiment.hpp"
#include "sampleshare/bench/output.hpp"

namespace sb = sampleshare::bench;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

int run_command(const std::string& config_path, const std::string& out_dir, const std::uint64_t* seed,
                const long* repeats, unsigned threads) {
  sb::ExperimentConfig cfg = sb::load_config(config_path);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (seed) cfg.seed = *seed;
  if (repeats) {
    if (*repeats < 1) throw sampleshare::ConfigError({"--repeats must be >= 1"});
    cfg.repeats = *repeats;
  }
  std::cerr << "running " << sb::to_string(cfg.experiment) << ": " << cfg.repeats << " repeats, seed " << cfg.seed
            << ", " << threads << " thread(s)\n";
  const sb::ExperimentResult res = sb::run_experiment(cfg, {threads});
  sb::emit_results(res, cfg);
  for (const auto& a : sb::aggregate(res.rows)) {
    std::printf("%-10.4g %-18s err %.5g +- %.3g", a.sweep_value, a.method.c_str(), a.err_mean, a.err_std);
    if (a.n_star_mean >= 0) std::printf("  n_star %.1f", a.n_star_mean);
    std::printf("\n");
  }
  std::cerr << "wrote " << cfg.output_dir << "\n";
  return 0;
}

int verify_command(const std::string& dir) {
  bool all_ok = true;
  bool missing = false;
  for (const auto& c : sb::verify_datasets(dir)) {
    std::printf("%-7s %-4s %s (%s)\n", sb::to_string(c.name), c.ok ? "ok" : "FAIL", c.message.c_str(),
                c.path.c_str());
    all_ok = all_ok && c.ok;
    missing = missing || c.message.rfind("cannot open", 0) == 0;
  }
  if (all_ok) return 0;
  return missing ? kExitIo : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sample-sharing transfer experiments"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run one experiment configuration");
  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  long repeats = 0;
  unsigned threads = 1;
  run->add_option("--config", config_path, "key = value configuration file")->required();
  run->add_option("--out", out_dir, "output directory (overrides output_dir)");
  auto* seed_opt = run->add_option("--seed", seed, "master seed (overrides seed)");
  auto* rep_opt = run->add_option("--repeats", repeats, "repeat count (overrides repeats)");
  run->add_option("--threads", threads, "worker threads")->check(CLI::Range(1u, 256u));

  auto* datasets = app.add_subcommand("datasets", "dataset utilities");
  datasets->require_subcommand(1);
  auto* verify = datasets->add_subcommand("verify", "check the real-data fixtures");
  std::string data_dir;
  verify->add_option("--path", data_dir, "directory holding spambase.data and boston.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run)
      return run_command(config_path, out_dir, *seed_opt ? &seed : nullptr, *rep_opt ? &repeats : nullptr, threads);
    if (*verify) return verify_command(data_dir);
  } catch (const sampleshare::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const sampleshare::IoError& e) {
    std::cerr << e.what() << "\n";
    return kExitIo;
  } catch (const sampleshare::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
