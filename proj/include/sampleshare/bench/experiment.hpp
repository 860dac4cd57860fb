#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <thread>
#include <vector>

#include "sampleshare/baselines.hpp"
#include "sampleshare/bench/config.hpp"
#include "sampleshare/bench/datasets.hpp"
#include "sampleshare/estimators.hpp"
#include "sampleshare/selector.hpp"

namespace sampleshare::bench {

struct ResultRow {
  std::string experiment;
  long repeat_id = 0;
  double sweep_value = 0.0;
  std::string method;
  double err = 0.0;
  long n_star = -1;
  double elapsed_ms = 0.0;
};

// Per-n record of the delta_curve experiment.
struct CurveRow {
  long repeat_id = 0;
  long n = 0;
  double delta_hat = 0.0;
  double var_hat = 0.0;
  double kappa = 0.0;
  double delta_star = 0.0;
  double delta_emp = 0.0;   // realized validation-set gain of the pooled fit at n
  double delta_test = 0.0;  // err(target only) - err(pooled fit at n) on the test split
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<CurveRow> curve;
  std::vector<double> sweep_values;  // effective grid (real data builds its own)
};

struct RunOptions {
  unsigned threads = 1;
};

namespace detail {

class Stopwatch {
 public:
  explicit Stopwatch(bool on) : on_(on), start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    if (!on_) return 0.0;
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  bool on_;
  std::chrono::steady_clock::time_point start_;
};

struct UnitOutput {
  std::vector<ResultRow> rows;
  std::vector<CurveRow> curve;
};

// Everything one repeat needs, whatever the data source.
struct Problem {
  Dataset target;
  Dataset source;  // the stream, already truncated to the budget
  Dataset val;
  Matrix test_X;
  Vector theta_ref;
  TaskState target_fit;
  double sigma_T = 1.0;
  double sigma_S = 1.0;
  double lambda_S = 1.0;
  std::optional<GroundTruth> truth;  // synthetic runs only
};

inline void run_methods(const ExperimentConfig& cfg, const Problem& p, long repeat, double sweep_value,
                        bool want_curve, UnitOutput& out) {
  const Dataset test{p.test_X, Vector::Zero(p.test_X.rows())};
  const auto err = [&](const Vector& theta) { return empirical_test_error(theta, test, p.theta_ref); };
  const double err_target = err(p.target_fit.theta_hat);
  const auto val_risk = [&](const Vector& theta) { return (p.val.X * (theta - p.theta_ref)).squaredNorm(); };
  const std::string exp_name = to_string(cfg.experiment);

  for (Method m : cfg.methods) {
    Stopwatch clock(cfg.record_timing);
    ResultRow row{exp_name, repeat, sweep_value, to_string(m)};
    switch (m) {
      case Method::target_only:
        row.err = err_target;
        break;
      case Method::triple_s: {
        SelectorParams sp = cfg.selector;
        sp.lambda_S = p.lambda_S;
        sp.lambda_c = p.target_fit.lambda + p.lambda_S;
        sp.sigma_T = p.sigma_T;
        sp.sigma_S = p.sigma_S;
        sp.n_max = p.source.rows();
        sp.record_path = want_curve;
        const SelectorTrace tr = run_triple_s(p.target_fit, p.source, p.val.X, sp);
        row.err = err(tr.theta_selected);
        row.n_star = static_cast<long>(tr.n_star);
        if (want_curve) {
          Matrix G_S = Matrix::Zero(p.target.dim(), p.target.dim());
          Index added = 0;
          for (std::size_t i = 0; i < tr.reports.size(); ++i) {
            const GainReport& r = tr.reports[i];
            for (; added < r.n; ++added) G_S.noalias() += p.source.X.row(added).transpose() * p.source.X.row(added);
            CurveRow c{repeat, static_cast<long>(r.n), r.delta_hat, r.var_hat, r.kappa};
            c.delta_emp = val_risk(p.target_fit.theta_hat) - val_risk(tr.collab_path[i]);
            c.delta_test = err_target - err(tr.collab_path[i]);
            if (p.truth) {
              CollabState collab;
              collab.A_c_inv = spd_inverse(regularized(p.target_fit.G + G_S, sp.lambda_c), "collaborative Gram");
              collab.lambda_c = sp.lambda_c;
              c.delta_star = oracle_gain(collab, p.target_fit, G_S, p.val.X, *p.truth);
            }
            out.curve.push_back(c);
          }
        }
        break;
      }
      case Method::data_enriched: {
        const TaskState src = baseline_source_fit(p.source, p.lambda_S);
        row.err = err(data_enriched(p.target_fit, src, default_enriched_params(p.val.X), p.val).theta);
        break;
      }
      case Method::spectral_finetune: {
        const TaskState src = baseline_source_fit(p.source, p.lambda_S);
        row.err = err(spectral_finetune(p.target_fit, src, default_spectral_params(p.target_fit), p.val).theta);
        break;
      }
    }
    row.elapsed_ms = clock.ms();
    out.rows.push_back(std::move(row));
  }
}


inline SynthConfig swept_synth(const ExperimentConfig& cfg, double v, double& lambda_S) {
  SynthConfig s = cfg.synth;
  lambda_S = cfg.selector.lambda_S;
  switch (cfg.experiment) {
    case Experiment::nT_sweep: s.n_T = static_cast<Index>(std::llround(v)); break;
    case Experiment::sigmaS_sweep: s.sigma_S = v; break;
    case Experiment::epsilon_sweep: s.epsilon = v; break;
    case Experiment::lambdaS_sweep: lambda_S = v; break;
    default: break;
  }
  return s;
}

// Designs are fixed per sweep point; the observation noise is redrawn every repeat.
inline UnitOutput synthetic_unit(const ExperimentConfig& cfg, std::size_t sweep_index, long repeat) {
  const double v = cfg.sweep_values[sweep_index];
  double lambda_S = 0.0;
  SynthConfig s = swept_synth(cfg, v, lambda_S);
  s.seed = derive_seed(cfg.seed, 0x5eed0000ULL + sweep_index);
  const std::uint64_t noise_seed = derive_seed(s.seed, 1 + static_cast<std::uint64_t>(repeat));
  SynthDraw draw = generate(s, noise_seed);

  Problem p;
  const Vector theta_T = draw.truth.theta_T;
  const LambdaChoice lt = select_ridge_lambda(draw.target, cfg.lambda_grid, [&](const Vector& th) {
    return oracle_validation_risk(th, draw.val.X, theta_T);
  });
  p.target_fit = fit_ridge(draw.target, lt.lambda);
  const Index budget = std::min(cfg.selector.n_max, draw.source.rows());
  p.source = head_rows(draw.source, budget);
  p.target = std::move(draw.target);
  p.val = std::move(draw.val);
  p.test_X = std::move(draw.test.X);
  p.theta_ref = theta_T;
  p.sigma_T = s.sigma_T;
  p.sigma_S = s.sigma_S;
  p.lambda_S = lambda_S;
  p.truth = draw.truth;

  UnitOutput out;
  run_methods(cfg, p, repeat, v, cfg.experiment == Experiment::delta_curve, out);
  return out;
}

struct RealContext {
  RealSplit split;
  std::vector<Index> test_rows;  // indices into split.target
  std::vector<Index> pool_rows;  // remaining target rows for training and validation
  Index n_val = 0;
};

inline RealContext prepare_real(const ExperimentConfig& cfg) {
  const Dataset data = load_real_dataset(cfg.dataset, cfg.data_path);
  RealContext ctx;
  ctx.split = cluster_split(data, cfg.seed, cfg.dataset);
  const Index n_target = ctx.split.target.rows();
  std::vector<Index> perm(static_cast<std::size_t>(n_target));
  std::iota(perm.begin(), perm.end(), Index{0});
  RandomStream rng(cfg.seed, Substream::shuffle);
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  const auto n_test = static_cast<std::size_t>(std::ceil(cfg.test_fraction * static_cast<double>(n_target)));
  ctx.test_rows.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  ctx.pool_rows.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
  const Index pool = static_cast<Index>(ctx.pool_rows.size());
  ctx.n_val = std::max<Index>(1, std::min(cfg.synth.n_val, pool / 4));
  return ctx;
}

inline std::vector<double> real_sweep(const ExperimentConfig& cfg, const RealContext& ctx) {
  const Index d = ctx.split.target.dim();
  const Index max_nT = static_cast<Index>(ctx.pool_rows.size()) - ctx.n_val;
  if (max_nT <= d)
    throw SplitError("target cluster too small: " + std::to_string(max_nT) + " training rows for d = " +
                     std::to_string(d));
  if (!cfg.sweep_values.empty()) {
    for (double v : cfg.sweep_values)
      if (v <= static_cast<double>(d) || v > static_cast<double>(max_nT) || v != std::floor(v))
        throw ConfigError({"sweep_values: n_T must be an integer in (" + std::to_string(d) + ", " +
                           std::to_string(max_nT) + "] for this split"});
    return cfg.sweep_values;
  }
  const double lo = static_cast<double>(2 * d);
  const double hi = static_cast<double>(std::min<Index>(500, max_nT));
  std::vector<double> g;
  for (int i = 0; i < 12; ++i) {
    const double v = std::round(lo + (hi - lo) * i / 11.0);
    if (g.empty() || v > g.back()) g.push_back(v);
  }
  return g;
}

// Rows are reshuffled every repeat; the test holdout is fixed for the whole run.
inline UnitOutput real_unit(const ExperimentConfig& cfg, const RealContext& ctx, const std::vector<double>& grid,
                            std::size_t sweep_index, long repeat) {
  const double v = grid[sweep_index];
  const Index n_T = static_cast<Index>(std::llround(v));
  const RealSplit& sp = ctx.split;
  RandomStream rng(derive_seed(cfg.seed, 0xda7a0000ULL + static_cast<std::uint64_t>(repeat)), Substream::shuffle);
  std::vector<Index> pool = ctx.pool_rows;
  std::shuffle(pool.begin(), pool.end(), rng.engine());
  std::vector<Index> src(static_cast<std::size_t>(sp.source.rows()));
  std::iota(src.begin(), src.end(), Index{0});
  std::shuffle(src.begin(), src.end(), rng.engine());

  const auto nv = static_cast<std::ptrdiff_t>(ctx.n_val);
  const std::vector<Index> val_rows(pool.begin(), pool.begin() + nv);
  const std::vector<Index> train_rows(pool.begin() + nv, pool.begin() + nv + static_cast<std::ptrdiff_t>(n_T));
  const Index budget = std::min(cfg.selector.n_max, sp.source.rows());
  src.resize(static_cast<std::size_t>(budget));

  Problem p;
  p.target = select_rows(sp.target, train_rows);
  p.val = select_rows(sp.target, val_rows);
  p.source = select_rows(sp.source, src);
  p.test_X = select_rows(sp.target, ctx.test_rows).X;
  p.theta_ref = sp.theta_T_proxy;
  const LambdaChoice lt = select_ridge_lambda(p.target, cfg.lambda_grid,
                                              [&](const Vector& th) { return validation_mse(th, p.val); });
  p.target_fit = fit_ridge(p.target, lt.lambda);
  p.sigma_T = std::sqrt(residual_noise_variance(p.target));
  p.sigma_S = std::sqrt(residual_noise_variance(p.source));
  p.lambda_S = cfg.selector.lambda_S;

  UnitOutput out;
  run_methods(cfg, p, repeat, v, false, out);
  return out;
}

// Runs work units on up to `threads` workers and returns outputs in unit order.
template <typename Fn>
std::vector<UnitOutput> run_units(std::size_t count, unsigned threads, Fn&& fn) {
  std::vector<UnitOutput> outputs(count);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        outputs[i] = fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return outputs;
}

}  // namespace detail

// Every (repeat, sweep value) pair is an independent unit; rows come back ordered
// by repeat, then sweep value, then method, regardless of the thread count.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  ExperimentResult res;
  std::optional<detail::RealContext> ctx;
  if (cfg.is_synthetic()) {
    res.sweep_values = cfg.sweep_values;
  } else {
    ctx = detail::prepare_real(cfg);
    res.sweep_values = detail::real_sweep(cfg, *ctx);
  }
  const std::size_t n_sweep = res.sweep_values.size();
  if (n_sweep == 0) throw ConfigError({"sweep_values must be nonempty"});
  const std::size_t units = n_sweep * static_cast<std::size_t>(cfg.repeats);
  auto outputs = detail::run_units(units, opt.threads, [&](std::size_t u) {
    const long repeat = static_cast<long>(u / n_sweep);
    const std::size_t k = u % n_sweep;
    return ctx ? detail::real_unit(cfg, *ctx, res.sweep_values, k, repeat) : detail::synthetic_unit(cfg, k, repeat);
  });
  for (auto& o : outputs) {
    res.rows.insert(res.rows.end(), std::make_move_iterator(o.rows.begin()), std::make_move_iterator(o.rows.end()));
    res.curve.insert(res.curve.end(), o.curve.begin(), o.curve.end());
  }
  return res;
}

}  // namespace sampleshare::bench
