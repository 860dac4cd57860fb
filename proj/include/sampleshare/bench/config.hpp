#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "sampleshare/estimators.hpp"
#include "sampleshare/gain.hpp"
#include "sampleshare/model.hpp"
#include "sampleshare/selector.hpp"

namespace sampleshare::bench {

enum class Experiment { delta_curve, nT_sweep, sigmaS_sweep, epsilon_sweep, lambdaS_sweep, real_data };
enum class Method { target_only, triple_s, data_enriched, spectral_finetune };
enum class RealName { email, boston };

inline constexpr const char* kVersion = "0.1.0";

inline const char* to_string(Experiment e) {
  switch (e) {
    case Experiment::delta_curve: return "delta_curve";
    case Experiment::nT_sweep: return "nT_sweep";
    case Experiment::sigmaS_sweep: return "sigmaS_sweep";
    case Experiment::epsilon_sweep: return "epsilon_sweep";
    case Experiment::lambdaS_sweep: return "lambdaS_sweep";
    case Experiment::real_data: return "real_data";
  }
  return "?";
}

inline const char* to_string(Method m) {
  switch (m) {
    case Method::target_only: return "target_only";
    case Method::triple_s: return "triple_s";
    case Method::data_enriched: return "data_enriched";
    case Method::spectral_finetune: return "spectral_finetune";
  }
  return "?";
}

inline const char* to_string(RealName r) { return r == RealName::email ? "email" : "boston"; }

inline std::optional<Experiment> parse_experiment(const std::string& s) {
  for (auto e : {Experiment::delta_curve, Experiment::nT_sweep, Experiment::sigmaS_sweep, Experiment::epsilon_sweep,
                 Experiment::lambdaS_sweep, Experiment::real_data})
    if (s == to_string(e)) return e;
  return std::nullopt;
}

inline std::optional<Method> parse_method(const std::string& s) {
  for (auto m : {Method::target_only, Method::triple_s, Method::data_enriched, Method::spectral_finetune})
    if (s == to_string(m)) return m;
  return std::nullopt;
}

struct ExperimentConfig {
  Experiment experiment = Experiment::delta_curve;
  SynthConfig synth;
  // lambda_c is recomputed per run as lambda_T + lambda_S.
  SelectorParams selector;
  std::vector<double> sweep_values;
  Index repeats = 250;
  std::uint64_t seed = 0;
  std::vector<Method> methods{Method::target_only, Method::triple_s, Method::data_enriched,
                              Method::spectral_finetune};
  std::string output_dir = "out";
  RealName dataset = RealName::boston;
  std::string data_path;
  double test_fraction = 0.2;
  bool record_timing = false;  // elapsed_ms is written as 0 unless enabled, keeping raw output reproducible
  std::vector<double> lambda_grid = default_lambda_grid();

  bool is_synthetic() const { return experiment != Experiment::real_data; }
  bool has(Method m) const { return std::find(methods.begin(), methods.end(), m) != methods.end(); }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

inline std::optional<double> to_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

template <typename Int>
std::optional<Int> to_int(const std::string& s) {
  Int v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace detail

// `log:lo:hi:count`, `lin:lo:hi:count`, or a comma-separated list.
inline std::vector<double> parse_grid(const std::string& text) {
  const auto parts = detail::split(text, ':');
  if (parts.size() == 4 && (parts[0] == "log" || parts[0] == "lin")) {
    const auto lo = detail::to_double(parts[1]);
    const auto hi = detail::to_double(parts[2]);
    const auto count = detail::to_int<int>(parts[3]);
    if (!lo || !hi || !count || *count < 1 || *hi < *lo) throw InvalidInputError("bad grid '" + text + "'");
    if (parts[0] == "log") return log_grid(*lo, *hi, *count);
    std::vector<double> g(static_cast<std::size_t>(*count));
    for (int i = 0; i < *count; ++i)
      g[static_cast<std::size_t>(i)] = *count == 1 ? *lo : *lo + (*hi - *lo) * i / (*count - 1);
    return g;
  }
  std::vector<double> out;
  for (const auto& item : detail::split(text, ',')) {
    const auto v = detail::to_double(item);
    if (!v) throw InvalidInputError("bad grid value '" + item + "'");
    out.push_back(*v);
  }
  if (out.empty()) throw InvalidInputError("empty grid");
  return out;
}

// Default sweep grids; real-data n_T grids depend on the split and are built later.
inline std::vector<double> default_sweep(Experiment e, Index d) {
  switch (e) {
    case Experiment::nT_sweep: {
      std::vector<double> g = parse_grid("lin:40:500:12");
      for (double& v : g) v = std::round(v);
      return g;
    }
    case Experiment::sigmaS_sweep:
    case Experiment::epsilon_sweep:
    case Experiment::lambdaS_sweep: return log_grid(0.01, 100.0, 20);
    case Experiment::delta_curve: return {0.0};
    case Experiment::real_data: return parse_grid("lin:" + std::to_string(2 * d) + ":500:12");
  }
  return {};
}

using KeyValues = std::map<std::string, std::string>;

// One `key = value` per line; `#` starts a comment. Later keys override earlier ones.
inline KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::vector<std::string> problems;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      problems.push_back("line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    const std::string key = detail::trim(line.substr(0, eq));
    if (key.empty()) {
      problems.push_back("line " + std::to_string(lineno) + ": empty key");
      continue;
    }
    kv[key] = detail::trim(line.substr(eq + 1));
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return kv;
}

inline ExperimentConfig config_from_key_values(const KeyValues& kv) {
  ExperimentConfig cfg;
  std::vector<std::string> problems;
  bool sweep_given = false;

  const auto number = [&](const std::string& key, const std::string& v, auto& target) {
    using T = std::decay_t<decltype(target)>;
    if constexpr (std::is_floating_point_v<T>) {
      if (auto x = detail::to_double(v)) target = *x;
      else problems.push_back(key + ": not a number '" + v + "'");
    } else {
      if (auto x = detail::to_int<T>(v)) target = *x;
      else problems.push_back(key + ": not an integer '" + v + "'");
    }
  };
  const auto boolean = [&](const std::string& key, const std::string& v, bool& target) {
    if (v == "true" || v == "1") target = true;
    else if (v == "false" || v == "0") target = false;
    else problems.push_back(key + ": expected true or false");
  };

  for (const auto& [key, v] : kv) {
    if (key == "experiment") {
      if (auto e = parse_experiment(v)) cfg.experiment = *e;
      else problems.push_back("experiment: unknown value '" + v + "'");
    } else if (key == "seed") {
      number(key, v, cfg.seed);
    } else if (key == "repeats") {
      number(key, v, cfg.repeats);
    } else if (key == "output_dir") {
      cfg.output_dir = v;
    } else if (key == "methods") {
      cfg.methods.clear();
      for (const auto& name : detail::split(v, ',')) {
        if (auto m = parse_method(name)) cfg.methods.push_back(*m);
        else problems.push_back("methods: unknown method '" + name + "'");
      }
    } else if (key == "sweep_values") {
      try {
        cfg.sweep_values = parse_grid(v);
        sweep_given = true;
      } catch (const InvalidInputError& e) {
        problems.push_back(std::string("sweep_values: ") + e.what());
      }
    } else if (key == "lambda_grid") {
      try {
        cfg.lambda_grid = parse_grid(v);
      } catch (const InvalidInputError& e) {
        problems.push_back(std::string("lambda_grid: ") + e.what());
      }
    } else if (key == "d") {
      number(key, v, cfg.synth.d);
    } else if (key == "n_T") {
      number(key, v, cfg.synth.n_T);
    } else if (key == "n_src") {
      number(key, v, cfg.synth.n_src);
    } else if (key == "n_val") {
      number(key, v, cfg.synth.n_val);
    } else if (key == "n_test") {
      number(key, v, cfg.synth.n_test);
    } else if (key == "epsilon") {
      number(key, v, cfg.synth.epsilon);
    } else if (key == "sigma_T") {
      number(key, v, cfg.synth.sigma_T);
    } else if (key == "sigma_S") {
      number(key, v, cfg.synth.sigma_S);
    } else if (key == "alpha") {
      number(key, v, cfg.selector.alpha);
    } else if (key == "n_max") {
      number(key, v, cfg.selector.n_max);
    } else if (key == "lambda_S") {
      number(key, v, cfg.selector.lambda_S);
    } else if (key == "stride") {
      number(key, v, cfg.selector.stride);
    } else if (key == "form") {
      if (v == "pooled_shift") cfg.selector.form = CorrectionForm::pooled_shift;
      else if (v == "source_ridge") cfg.selector.form = CorrectionForm::source_ridge;
      else problems.push_back("form: expected pooled_shift or source_ridge");
    } else if (key == "dataset") {
      if (v == "email") cfg.dataset = RealName::email;
      else if (v == "boston") cfg.dataset = RealName::boston;
      else problems.push_back("dataset: expected email or boston");
    } else if (key == "data_path") {
      cfg.data_path = v;
    } else if (key == "test_fraction") {
      number(key, v, cfg.test_fraction);
    } else if (key == "record_timing") {
      boolean(key, v, cfg.record_timing);
    } else {
      problems.push_back("unknown key '" + key + "'");
    }
  }

  if (cfg.repeats < 1) problems.emplace_back("repeats must be >= 1");
  if (cfg.methods.empty()) problems.emplace_back("methods must name at least one method");
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0)) problems.emplace_back("test_fraction must lie in (0, 1)");
  if (cfg.experiment == Experiment::real_data && cfg.data_path.empty())
    problems.emplace_back("data_path is required for real_data");
  for (auto& p : cfg.synth.problems()) problems.push_back(p);
  for (auto& p : cfg.selector.problems()) problems.push_back(p);
  if (!sweep_given && cfg.experiment != Experiment::real_data)
    cfg.sweep_values = default_sweep(cfg.experiment, cfg.synth.d);
  if (sweep_given && cfg.sweep_values.empty()) problems.emplace_back("sweep_values must be nonempty");
  if (cfg.experiment == Experiment::nT_sweep)
    if (std::any_of(cfg.sweep_values.begin(), cfg.sweep_values.end(),
                    [](double v) { return v < 1.0 || v != std::floor(v); }))
      problems.emplace_back("nT_sweep values must be positive integers");
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return cfg;
}

inline ExperimentConfig parse_config(const std::string& text) { return config_from_key_values(parse_key_values(text)); }

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ExperimentConfig load_config(const std::string& path) { return parse_config(read_text_file(path)); }

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Canonical text of every effective setting, used for hashing and the manifest.
inline std::string canonical_config(const ExperimentConfig& c) {
  std::ostringstream o;
  const auto list = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
    return s;
  };
  o << "experiment = " << to_string(c.experiment) << "\n";
  o << "seed = " << c.seed << "\nrepeats = " << c.repeats << "\n";
  o << "methods = ";
  for (std::size_t i = 0; i < c.methods.size(); ++i) o << (i ? "," : "") << to_string(c.methods[i]);
  o << "\nsweep_values = " << list(c.sweep_values) << "\n";
  o << "lambda_grid = " << list(c.lambda_grid) << "\n";
  o << "d = " << c.synth.d << "\nn_T = " << c.synth.n_T << "\nn_src = " << c.synth.n_src << "\nn_val = " << c.synth.n_val
    << "\nn_test = " << c.synth.n_test << "\nepsilon = " << format_double(c.synth.epsilon)
    << "\nsigma_T = " << format_double(c.synth.sigma_T) << "\nsigma_S = " << format_double(c.synth.sigma_S) << "\n";
  o << "alpha = " << format_double(c.selector.alpha) << "\nn_max = " << c.selector.n_max
    << "\nlambda_S = " << format_double(c.selector.lambda_S) << "\nstride = " << c.selector.stride << "\nform = "
    << (c.selector.form == CorrectionForm::pooled_shift ? "pooled_shift" : "source_ridge") << "\n";
  if (c.experiment == Experiment::real_data)
    o << "dataset = " << to_string(c.dataset) << "\ndata_path = " << c.data_path
      << "\ntest_fraction = " << format_double(c.test_fraction) << "\n";
  o << "record_timing = " << (c.record_timing ? "true" : "false") << "\n";
  return o.str();
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace sampleshare::bench
