// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance            all criteria
//   acceptance 3 4 9      a subset

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "gain_fixture.hpp"
#include "oracles.hpp"
#include "sampleshare/baselines.hpp"
#include "sampleshare/bench/config.hpp"
#include "sampleshare/bench/datasets.hpp"
#include "sampleshare/bench/experiment.hpp"
#include "sampleshare/bench/output.hpp"
#include "sampleshare/selector.hpp"
#include "sampleshare/theory.hpp"

using namespace sampleshare;
namespace sb = sampleshare::bench;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

template <class... Args>
std::string fmt(const char* f, Args... args) {
  char buf[320];
  std::snprintf(buf, sizeof buf, f, static_cast<double>(args)...);
  return buf;
}

const std::string kSource = SAMPLESHARE_SOURCE_DIR;

// Shipped configuration with the data path resolved against the source tree.
sb::ExperimentConfig shipped_config(const std::string& name) {
  sb::ExperimentConfig cfg = sb::load_config(kSource + "/configs/" + name + ".cfg");
  if (!cfg.data_path.empty() && fs::path(cfg.data_path).is_relative()) cfg.data_path = kSource + "/" + cfg.data_path;
  return cfg;
}

std::map<std::string, sb::ExperimentResult>& sweep_cache() {
  static std::map<std::string, sb::ExperimentResult> cache;
  return cache;
}

const sb::ExperimentResult& sweep(const std::string& name) {
  auto& cache = sweep_cache();
  if (auto it = cache.find(name); it != cache.end()) return it->second;
  const auto t0 = std::chrono::steady_clock::now();
  sb::ExperimentResult r = sb::run_experiment(shipped_config(name));
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::fprintf(stderr, "  [%s: %zu rows in %.1f s]\n", name.c_str(), r.rows.size(), s);
  return cache.emplace(name, std::move(r)).first->second;
}

// Per (sweep value): paired statistics of triple_s against target_only.
struct PairStats {
  double mean_target = 0, mean_triple = 0, se_diff = 0, se_target = 0, n_star_mean = 0;
  long count = 0;
};

std::map<double, PairStats> paired(const sb::ExperimentResult& r) {
  std::map<std::pair<double, long>, std::pair<double, double>> by_unit;
  std::map<std::pair<double, long>, long> n_star;
  for (const auto& row : r.rows) {
    auto& e = by_unit[{row.sweep_value, row.repeat_id}];
    if (row.method == "target_only") e.first = row.err;
    if (row.method == "triple_s") {
      e.second = row.err;
      n_star[{row.sweep_value, row.repeat_id}] = row.n_star;
    }
  }
  std::map<double, std::vector<std::array<double, 3>>> groups;
  for (const auto& [key, e] : by_unit)
    groups[key.first].push_back({e.first, e.second, static_cast<double>(n_star[key])});
  std::map<double, PairStats> out;
  for (const auto& [v, items] : groups) {
    oracle::RunningStats t, s, diff, ns;
    for (const auto& it : items) {
      t.add(it[0]);
      s.add(it[1]);
      diff.add(it[1] - it[0]);
      ns.add(it[2]);
    }
    out[v] = {t.mean, s.mean, diff.std_error(), t.std_error(), ns.mean, static_cast<long>(t.n)};
  }
  return out;
}

// ---------------------------------------------------------------------------

Outcome c1_sherman_morrison() {
  const Index d = 20;
  RandomStream rng(101, Substream::user);
  Matrix inv = identity(d);
  Matrix A = identity(d);
  for (int i = 0; i < 1000; ++i) {
    const Vector x = rng.gaussian(d);
    sherman_morrison_inplace(inv, x);
    A.noalias() += x * x.transpose();
  }
  const double err = max_abs_diff(inv, oracle::lu_inverse(A));

  // Trials are interleaved across dimensions and the fastest kept, so a burst of
  // machine load cannot skew one dimension only.
  const std::vector<Index> dims{10, 20, 40, 80};
  std::vector<std::vector<Vector>> xs(dims.size());
  std::vector<double> best(dims.size(), 1e300);
  RandomStream r2(102, Substream::user);
  for (std::size_t j = 0; j < dims.size(); ++j)
    for (int i = 0; i < 256; ++i) xs[j].push_back(r2.gaussian(dims[j]) / std::sqrt(static_cast<double>(dims[j])));
  const int updates = 4000;
  for (int trial = 0; trial < 25; ++trial) {
    for (std::size_t j = 0; j < dims.size(); ++j) {
      Matrix m = identity(dims[j]);
      const auto t0 = std::chrono::steady_clock::now();
      for (int i = 0; i < updates; ++i) sherman_morrison_inplace(m, xs[j][static_cast<std::size_t>(i % 256)]);
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (m(0, 0) == 42.0) std::puts("");  // keep the loop observable
      best[j] = std::min(best[j], s / updates);
    }
  }
  std::vector<double> ld, lt;
  for (std::size_t j = 0; j < dims.size(); ++j) {
    ld.push_back(std::log(static_cast<double>(dims[j])));
    lt.push_back(std::log(best[j]));
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < ld.size(); ++i) mx += ld[i] / 4, my += lt[i] / 4;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < ld.size(); ++i) sxy += (ld[i] - mx) * (lt[i] - my), sxx += (ld[i] - mx) * (ld[i] - mx);
  const double slope = sxy / sxx;
  return {err <= 1e-8 && slope >= 1.6 && slope <= 2.4,
          fmt("max|incremental - direct| = %.2e after 1000 updates (d=20); time exponent %.2f over d=10..80 (%.0f/%.0f/%.0f/%.0f ns)",
              err, slope, best[0] * 1e9, best[1] * 1e9, best[2] * 1e9, best[3] * 1e9)};
}

Outcome c2_unbiased() {
  const oracle::GainFixture f(SynthConfig{}, 300, 0.0, 0.0, 0.0);
  RandomStream rng(201, Substream::user);
  oracle::RunningStats mc;
  for (int r = 0; r < 100000; ++r) {
    const auto dr = f.draw(rng);
    mc.add(estimate_gain(f.inputs(dr), f.truth.sigma_T, f.truth.sigma_S));
  }
  const double z = (mc.mean - f.delta_star) / mc.std_error();
  return {std::abs(z) <= 3.0, fmt("MC mean %.6g vs exact gain %.6g, z = %.2f (1e5 redraws, n=300, all lambda=0)",
                                  mc.mean, f.delta_star, z)};
}

// Grid-searched target ridge on the fixed design (oracle validation risk).
double searched_lambda_T() {
  const SynthDraw s = generate(SynthConfig{});
  return select_ridge_lambda(s.target, default_lambda_grid(), [&](const Vector& th) {
           return oracle_validation_risk(th, s.val.X, s.truth.theta_T);
         }).lambda;
}

struct MomentRun {
  Index n;
  double delta_star, bias[2], variance[2];
  oracle::RunningStats mc[2];
};

std::vector<MomentRun>& moment_runs() {
  static std::vector<MomentRun> runs;
  if (!runs.empty()) return runs;
  const double lT = searched_lambda_T();
  std::fprintf(stderr, "  [grid-searched lambda_T = %.4g]\n", lT);
  const CorrectionForm forms[2] = {CorrectionForm::pooled_shift, CorrectionForm::source_ridge};
  for (Index n : {50, 300, 1000}) {
    const oracle::GainFixture f(SynthConfig{}, n, lT, 1.0, lT + 1.0);
    MomentRun m{};
    m.n = n;
    m.delta_star = f.delta_star;
    for (int k = 0; k < 2; ++k) {
      m.bias[k] = oracle_bias(f.inputs0(), f.truth, forms[k]);
      m.variance[k] = oracle_variance(f.inputs0(), f.truth, forms[k]).variance;
    }
    RandomStream rng(300 + static_cast<std::uint64_t>(n), Substream::user);
    for (int r = 0; r < 100000; ++r) {
      const auto dr = f.draw(rng);
      for (int k = 0; k < 2; ++k)
        m.mc[k].add(estimate_gain(f.inputs(dr), f.truth.sigma_T, f.truth.sigma_S, forms[k]) - f.delta_star);
    }
    runs.push_back(m);
  }
  return runs;
}

Outcome c3_bias() {
  bool ok = true;
  std::string detail;
  std::string adjudication = "form check:";
  for (const MomentRun& m : moment_runs()) {
    const double z = (m.mc[0].mean - m.bias[0]) / m.mc[0].std_error();
    const double z_alt = (m.mc[1].mean - m.bias[1]) / m.mc[1].std_error();
    ok = ok && std::abs(z) <= 3.0;
    detail += fmt(" n=%.0f: MC %.4g vs formula %.4g", static_cast<double>(m.n), m.mc[0].mean, m.bias[0]) +
              fmt(" (z=%.2f);", z);
    adjudication += fmt(" n=%.0f pooled_shift z=%.2f source_ridge z=%.2f;", static_cast<double>(m.n), z, z_alt);
  }
  std::printf("  %s\n", adjudication.c_str());
  return {ok, "default form:" + detail};
}

Outcome c4_variance() {
  bool ok = true;
  std::string detail;
  for (const MomentRun& m : moment_runs()) {
    const double rel = m.mc[0].variance() / m.variance[0] - 1.0;
    ok = ok && std::abs(rel) <= 0.05;
    detail += fmt(" n=%.0f: MC %.4g vs formula %.4g", static_cast<double>(m.n), m.mc[0].variance(), m.variance[0]) +
              fmt(" (%+.2f%%);", 100 * rel);
  }
  return {ok, detail};
}

Outcome c5_cantelli() {
  const double lT = searched_lambda_T();
  const oracle::GainFixture f(SynthConfig{}, 300, lT, 1.0, lT + 1.0);
  const double b = oracle_bias(f.inputs0(), f.truth);
  const double v = oracle_variance(f.inputs0(), f.truth).variance;
  RandomStream rng(501, Substream::user);
  const double deltas[3] = {0.05, 0.1, 0.25};
  int covered[3] = {0, 0, 0};
  const int N = 10000;
  for (int r = 0; r < N; ++r) {
    const auto dr = f.draw(rng);
    const double g = estimate_gain(f.inputs(dr), f.truth.sigma_T, f.truth.sigma_S);
    for (int k = 0; k < 3; ++k) covered[k] += lower_bound(g, v, b, deltas[k]) <= f.delta_star;
  }
  bool ok = true;
  std::string detail;
  for (int k = 0; k < 3; ++k) {
    const double rate = covered[k] / static_cast<double>(N);
    ok = ok && rate >= 1.0 - deltas[k];
    detail += fmt(" delta=%.2f coverage %.4f;", deltas[k], rate);
  }
  return {ok, detail};
}

Outcome c6_asymptotic() {
  SynthConfig cfg;
  cfg.n_src = 10000;
  cfg.n_test = 1;
  const double lT = 1.0, lS = 1.0, lc = lT + lS, h_lc = 0.5, h_s2 = 0.1, h_eps = 0.01;
  oracle::RunningStats gain;
  double fd_lc = 0, fd_sT = 0, fd_sS = 0, fd_eps = 0;
  const int designs = 200;
  for (int k = 0; k < designs; ++k) {
    cfg.seed = derive_seed(601, static_cast<std::uint64_t>(k));
    const SynthDraw s = generate(cfg);
    const TaskState t = fit_ridge(s.target, lT);
    const Matrix G_S = gram(s.source.X);
    const auto gain_at = [&](double lambda_c, const GroundTruth& truth) {
      CollabState c;
      c.A_c_inv = spd_inverse(regularized(t.G + G_S, lambda_c));
      c.lambda_c = lambda_c;
      c.n = s.source.rows();
      return oracle_gain(c, t, G_S, s.val.X, truth);
    };
    const GroundTruth& tr = s.truth;
    gain.add(gain_at(lc, tr));
    fd_lc += (gain_at(lc + h_lc, tr) - gain_at(lc - h_lc, tr)) / (2 * h_lc) / designs;
    GroundTruth a = tr, b = tr;
    a.sigma_T = std::sqrt(tr.sigma_T * tr.sigma_T + h_s2);
    b.sigma_T = std::sqrt(tr.sigma_T * tr.sigma_T - h_s2);
    fd_sT += (gain_at(lc, a) - gain_at(lc, b)) / (2 * h_s2) / designs;
    a = tr, b = tr;
    a.sigma_S = std::sqrt(tr.sigma_S * tr.sigma_S + h_s2);
    b.sigma_S = std::sqrt(tr.sigma_S * tr.sigma_S - h_s2);
    fd_sS += (gain_at(lc, a) - gain_at(lc, b)) / (2 * h_s2) / designs;
    // along the task difference direction
    a = tr, b = tr;
    const Vector dir = (tr.theta_S - tr.theta_T).normalized();
    a.theta_S += h_eps * dir;
    b.theta_S -= h_eps * dir;
    fd_eps += (gain_at(lc, a) - gain_at(lc, b)) / (2 * h_eps) / designs;
  }
  AsymptoticInputs in;
  in.d = static_cast<double>(cfg.d);
  in.n_T = static_cast<double>(cfg.n_T);
  in.n = static_cast<double>(cfg.n_src);
  in.n_val = static_cast<double>(cfg.n_val);
  in.lambda_T = lT;
  in.lambda_c = lc;
  const GroundTruth truth = synthetic_truth(cfg);
  in.theta_T = truth.theta_T;
  in.delta_theta = truth.theta_S - truth.theta_T;
  in.sigma_T = truth.sigma_T;
  in.sigma_S = truth.sigma_S;
  const double asym = asymptotic_gain(in);
  const double rel = std::abs(asym - gain.mean) / std::abs(gain.mean);
  const double s_lc = std::get<double>(sensitivity(in, Sensitivity::lambda_c));
  const double s_sT = std::get<double>(sensitivity(in, Sensitivity::sigma_T_sq));
  const double s_sS = std::get<double>(sensitivity(in, Sensitivity::sigma_S_sq));
  const double s_eps = std::get<Vector>(sensitivity(in, Sensitivity::delta_theta)).dot(in.delta_theta.normalized());
  const auto same = [](double a, double b) { return (a > 0) == (b > 0) && a != 0 && b != 0; };
  const bool signs = same(s_lc, fd_lc) && same(s_sT, fd_sT) && same(s_sS, fd_sS) && same(s_eps, fd_eps);
  std::printf("  derivative (formula / design-averaged): lambda_c %.3g / %.3g, sigma_T^2 %.3g / %.3g, "
              "sigma_S^2 %.3g / %.3g, along dtheta %.3g / %.3g\n",
              s_lc, fd_lc, s_sT, fd_sT, s_sS, fd_sS, s_eps, fd_eps);
  return {rel <= 0.10 && signs,
          fmt("asymptotic %.5g vs MC over 200 designs %.5g (rel %.2f%%)", asym, gain.mean, 100 * rel) +
              (signs ? "; all four derivative signs agree" : "; derivative sign mismatch")};
}

Outcome c7_curve_shape() {
  const sb::ExperimentResult& r = sweep("delta_curve");
  struct Means {
    oracle::RunningStats hat, emp, test;
  };
  std::map<long, Means> by_n;
  for (const auto& c : r.curve) {
    by_n[c.n].hat.add(c.delta_hat);
    by_n[c.n].emp.add(c.delta_emp);
    by_n[c.n].test.add(c.delta_test);
  }
  long agree = 0, agree_test = 0;
  for (const auto& [n, s] : by_n) {
    agree += (s.hat.mean > 0) == (s.emp.mean > 0);
    agree_test += (s.hat.mean > 0) == (s.test.mean > 0);
  }
  const double total = static_cast<double>(by_n.size());
  const double frac = static_cast<double>(agree) / total;
  std::printf("  test-split gain agrees in sign on %.1f%% of prefixes\n", 100 * agree_test / total);
  return {frac >= 0.90, fmt("sign agreement of averaged estimate and realized validation gain on %.1f%% of %.0f prefixes",
                            100 * frac, total)};
}

Outcome c8_selection_behavior() {
  const auto sig = paired(sweep("sigmaS_sweep"));
  std::vector<std::pair<double, double>> s;  // (sigma_S, mean n*)
  for (const auto& [v, p] : sig) s.emplace_back(v, p.n_star_mean);
  const std::size_t third = s.size() / 3;
  const double n_max = static_cast<double>(shipped_config("sigmaS_sweep").selector.n_max);
  bool low_ok = true, high_ok = true;
  double low_min = 1e300, high_max = 0;
  for (std::size_t i = 0; i < third; ++i) {
    low_ok = low_ok && s[i].second > n_max / 2;
    low_min = std::min(low_min, s[i].second);
    high_ok = high_ok && s[s.size() - 1 - i].second == 0.0;
    high_max = std::max(high_max, s[s.size() - 1 - i].second);
  }
  const auto eps = paired(sweep("epsilon_sweep"));
  bool big_ok = true, small_ok = true;
  double big_max = 0, small_min = 1e300;
  for (const auto& [v, p] : eps) {
    if (v >= 1.0) big_ok = big_ok && p.n_star_mean == 0.0, big_max = std::max(big_max, p.n_star_mean);
    if (v <= 0.1) small_ok = small_ok && p.n_star_mean > 0.0, small_min = std::min(small_min, p.n_star_mean);
  }
  std::string detail =
      fmt("sigma_S: min mean n* over smallest third %.1f (need > %.0f), max over largest third %.1f (need 0); ",
          low_min, n_max / 2, high_max) +
      fmt("epsilon: max mean n* for eps >= 1 is %.2f (need 0), min for eps <= 0.1 is %.1f (need > 0)", big_max,
          small_min);
  return {low_ok && high_ok && big_ok && small_ok, detail};
}

Outcome c9_no_negative_transfer() {
  bool ok = true;
  std::string detail;
  for (const char* name : {"nT_sweep_eps03", "nT_sweep_eps05", "sigmaS_sweep", "epsilon_sweep", "lambdaS_sweep",
                           "real_boston", "real_email"}) {
    try {
      const auto stats = paired(sweep(name));
      int bad = 0;
      double worst = -1e300;
      for (const auto& [v, p] : stats) {
        const double excess = (p.mean_triple - p.mean_target) / p.se_diff;
        worst = std::max(worst, excess);
        bad += p.mean_triple > p.mean_target + p.se_diff;
      }
      if (std::string(name) == "nT_sweep_eps03")
        for (const auto& [v, p] : stats)
          if (v <= 100 && !(p.mean_triple < p.mean_target)) {
            ++bad;
            detail += fmt(" [n_T=%.0f not strictly better]", v);
          }
      ok = ok && bad == 0;
      detail += std::string(" ") + name + fmt(": %.0f bad points, worst excess %.2f SE;", bad, worst);
    } catch (const Error& e) {
      ok = false;
      detail += std::string(" ") + name + ": cannot run (" + e.what() + ");";
    }
  }
  return {ok, detail};
}

Outcome c10_baselines() {
  bool exact = true;
  double gd_err = 0.0;
  bool revert_ok = true;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.epsilon = 0.3 * static_cast<double>(seed % 5);
    cfg.n_T = 40 + static_cast<Index>(seed) * 9;
    const SynthDraw s = generate(cfg);
    const TaskState t = fit_ridge(s.target, 0.5 + static_cast<double>(seed % 3));
    const TaskState src = baseline_source_fit(s.source, 1.0);
    EnrichedParams ep = default_enriched_params(s.val.X);
    ep.lambda_grid = {0.0};
    exact = exact && data_enriched(t, src, ep, s.val).theta == src.theta_hat;

    const SpectralParams sp = default_spectral_params(t);
    const Matrix A = oracle::loop_gram(s.target.X) + t.lambda * Matrix::Identity(cfg.d, cfg.d);
    const Vector b = s.target.X.transpose() * s.target.y;
    Vector theta = src.theta_hat;
    long k = 0;
    for (long target_k : sp.k_grid) {
      for (; k < target_k; ++k) theta -= sp.alpha_step * (A * theta - b);
      const Vector w = blend(spectral_weight(sp, target_k), src.theta_hat, t.theta_hat);
      gd_err = std::max(gd_err, (theta - w).cwiseAbs().maxCoeff());
    }
    const BlendResult r = spectral_finetune(t, src, sp, s.val);
    revert_ok = revert_ok && r.val_mse <= validation_mse(t.theta_hat, s.val);
  }
  return {exact && gd_err <= 1e-8 && revert_ok,
          std::string("lambda=0 returns source fit bitwise: ") + (exact ? "yes" : "no") +
              fmt("; max |GD - spectral weight| = %.2e", gd_err) +
              "; validation error never above target-only: " + (revert_ok ? "yes" : "no") + " (50 draws)"};
}

int run_bench(const std::string& args) {
  const std::string cmd = std::string(SAMPLESHARE_BENCH_EXE) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome c11_determinism() {
  const fs::path dir = fs::temp_directory_path() / ("sampleshare_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string cfg = kSource + "/configs/nT_sweep_eps03.cfg";
  const int a = run_bench("run --config " + cfg + " --repeats 3 --threads 1 --out " + (dir / "a").string());
  const int b = run_bench("run --config " + cfg + " --repeats 3 --threads 2 --out " + (dir / "b").string());
  bool same = a == 0 && b == 0;
  if (same) same = sb::read_text_file((dir / "a" / "raw.csv").string()) == sb::read_text_file((dir / "b" / "raw.csv").string());
  fs::remove_all(dir);
  bool fixtures = true;
  std::string detail = std::string("raw CSV bit-identical: ") + (same ? "yes" : "no") + "; fixtures:";
  for (const auto& c : sb::verify_datasets(kSource + "/data")) {
    fixtures = fixtures && c.ok;
    detail += std::string(" ") + sb::to_string(c.name) + " " + (c.ok ? c.message : "missing/invalid (" + c.message + ")");
  }
  return {same && fixtures, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 sherman-morrison fidelity and cost", c1_sherman_morrison},
      {"2 unbiased gain estimate without regularization", c2_unbiased},
      {"3 closed-form bias matches Monte Carlo", c3_bias},
      {"4 closed-form variance matches Monte Carlo", c4_variance},
      {"5 lower-bound coverage", c5_cantelli},
      {"6 large-source asymptotic gain and derivative signs", c6_asymptotic},
      {"7 estimated vs empirical gain curve sign agreement", c7_curve_shape},
      {"8 selected prefix length across source noise and task distance", c8_selection_behavior},
      {"9 no negative transfer on every sweep point", c9_no_negative_transfer},
      {"10 baseline identities", c10_baselines},
      {"11 harness determinism and dataset fixtures", c11_determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.count(static_cast<int>(i + 1))) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                o.detail.c_str(), s);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
