#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sampleshare/linalg.hpp"

namespace sampleshare {

// Feature rows and responses of one split.
struct Dataset {
  Matrix X;
  Vector y;

  Index rows() const noexcept { return X.rows(); }
  Index dim() const noexcept { return X.cols(); }

  void validate(std::string_view what = "dataset") const {
    if (X.rows() != y.size())
      throw InvalidInputError(std::string(what) + ": " + std::to_string(X.rows()) + " rows but " +
                              std::to_string(y.size()) + " responses");
    require_finite(X, std::string(what) + " features");
    require_finite(y, std::string(what) + " responses");
  }
};

inline Dataset head_rows(const Dataset& data, Index n) {
  if (n > data.rows()) throw InvalidInputError("head_rows: not enough rows");
  return {data.X.topRows(n), data.y.head(n)};
}

inline Dataset select_rows(const Dataset& data, std::span<const Index> rows) {
  Dataset out{Matrix(static_cast<Index>(rows.size()), data.dim()),
              Vector(static_cast<Index>(rows.size()))};
  for (Index i = 0; i < static_cast<Index>(rows.size()); ++i) {
    out.X.row(i) = data.X.row(rows[static_cast<std::size_t>(i)]);
    out.y(i) = data.y(rows[static_cast<std::size_t>(i)]);
  }
  return out;
}

// Ground-truth parameters; only the generator and the oracles see these.
struct GroundTruth {
  Vector theta_T;
  Vector theta_S;
  double sigma_T = 1.0;
  double sigma_S = 0.5;

  double epsilon() const { return (theta_S - theta_T).norm(); }
};

struct SynthConfig {
  Index d = 20;
  Index n_T = 500;
  Index n_src = 1000;
  Index n_val = 50;
  Index n_test = 1000;
  double epsilon = 0.3;
  double sigma_T = 1.0;
  double sigma_S = 0.5;
  std::uint64_t seed = 0;

  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    if (d < 2) out.emplace_back("d must be >= 2 (theta_S perturbs the second coordinate)");
    if (n_T < 1) out.emplace_back("n_T must be >= 1");
    if (n_src < 1) out.emplace_back("n_src must be >= 1");
    if (n_val < 1) out.emplace_back("n_val must be >= 1");
    if (n_test < 1) out.emplace_back("n_test must be >= 1");
    if (!(epsilon >= 0.0)) out.emplace_back("epsilon must be >= 0");
    if (!(sigma_T >= 0.0)) out.emplace_back("sigma_T must be >= 0");
    if (!(sigma_S >= 0.0)) out.emplace_back("sigma_S must be >= 0");
    return out;
  }

  void validate() const {
    if (auto p = problems(); !p.empty()) throw ConfigError(std::move(p));
  }
};

// Independent random substreams, one per (seed, purpose) key.
enum class Substream : std::uint64_t {
  target_design = 1,
  source_design,
  val_design,
  test_design,
  target_noise,
  source_noise,
  val_noise,
  test_noise,
  shuffle,
  clustering,
  user = 1000,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key) {
  return splitmix64(splitmix64(seed) ^ splitmix64(key + 0x632be59bd9b4e019ULL));
}

class RandomStream {
 public:
  RandomStream(std::uint64_t seed, Substream tag)
      : engine_(derive_seed(seed, static_cast<std::uint64_t>(tag))) {}
  RandomStream(std::uint64_t seed, std::uint64_t key) : engine_(derive_seed(seed, key)) {}

  double normal() { return normal_(engine_); }

  // rows x cols standard Gaussian matrix, drawn row by row so prefixes are nested.
  Matrix gaussian_rows(Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = normal();
    return m;
  }

  Vector gaussian(Index n, double scale = 1.0) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = scale * normal();
    return v;
  }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

struct SynthDraw {
  Dataset target;
  Dataset source;
  Dataset val;
  Dataset test;
  GroundTruth truth;
};

inline GroundTruth synthetic_truth(const SynthConfig& cfg) {
  GroundTruth truth;
  truth.theta_T = Vector::Zero(cfg.d);
  truth.theta_T(0) = 1.0;
  truth.theta_S = truth.theta_T;
  truth.theta_S(1) = cfg.epsilon;
  truth.sigma_T = cfg.sigma_T;
  truth.sigma_S = cfg.sigma_S;
  return truth;
}

// Designs come from substreams keyed by cfg.seed, noise from substreams keyed by
// noise_seed, so redrawing only the noise keeps every design matrix fixed.
inline SynthDraw generate(const SynthConfig& cfg, std::uint64_t noise_seed) {
  cfg.validate();
  SynthDraw draw;
  draw.truth = synthetic_truth(cfg);
  const auto split = [&](Index n, Substream design, Substream noise, const Vector& theta,
                         double sigma) {
    Dataset ds;
    ds.X = RandomStream(cfg.seed, design).gaussian_rows(n, cfg.d);
    ds.y = ds.X * theta + RandomStream(noise_seed, noise).gaussian(n, sigma);
    return ds;
  };
  const auto& t = draw.truth;
  draw.target = split(cfg.n_T, Substream::target_design, Substream::target_noise, t.theta_T, t.sigma_T);
  draw.source = split(cfg.n_src, Substream::source_design, Substream::source_noise, t.theta_S, t.sigma_S);
  draw.val = split(cfg.n_val, Substream::val_design, Substream::val_noise, t.theta_T, t.sigma_T);
  draw.test = split(cfg.n_test, Substream::test_design, Substream::test_noise, t.theta_T, t.sigma_T);
  return draw;
}

inline SynthDraw generate(const SynthConfig& cfg) { return generate(cfg, cfg.seed); }

// ||X_test (theta - theta_T*)||^2 / n_test.
inline double empirical_test_error(const Vector& theta, const Dataset& test, const Vector& theta_ref) {
  if (theta.size() != test.dim() || theta_ref.size() != test.dim())
    throw InvalidInputError("empirical_test_error: dimension mismatch");
  if (test.rows() == 0) throw InvalidInputError("empirical_test_error: empty test split");
  return (test.X * (theta - theta_ref)).squaredNorm() / static_cast<double>(test.rows());
}

inline double empirical_test_error(const Vector& theta, const Dataset& test, const GroundTruth& truth) {
  return empirical_test_error(theta, test, truth.theta_T);
}

}  // namespace sampleshare
