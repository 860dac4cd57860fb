#pragma once

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sampleshare/bench/config.hpp"
#include "sampleshare/bench/experiment.hpp"

namespace sampleshare::bench {

inline constexpr const char* kRawHeader = "experiment,repeat_id,sweep_value,method,err,n_star,elapsed_ms";

struct AggregateRow {
  double sweep_value = 0.0;
  std::string method;
  long count = 0;
  double err_mean = 0.0;
  double err_std = 0.0;  // sample standard deviation, 0 for a single row
  double n_star_mean = -1.0;
  double n_star_std = 0.0;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd m;
  if (v.empty()) return m;
  double sum = 0.0;
  for (double x : v) sum += x;
  m.mean = sum / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return m;
}

// Groups by (sweep_value, method), keeping first-appearance order of both keys.
inline std::vector<AggregateRow> aggregate(const std::vector<ResultRow>& rows) {
  std::vector<double> sweeps;
  std::vector<std::string> methods;
  std::map<std::pair<double, std::string>, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& r : rows) {
    if (std::find(sweeps.begin(), sweeps.end(), r.sweep_value) == sweeps.end()) sweeps.push_back(r.sweep_value);
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    auto& g = groups[{r.sweep_value, r.method}];
    g.first.push_back(r.err);
    g.second.push_back(static_cast<double>(r.n_star));
  }
  std::vector<AggregateRow> out;
  for (double s : sweeps)
    for (const auto& m : methods) {
      const auto it = groups.find({s, m});
      if (it == groups.end()) continue;
      AggregateRow a;
      a.sweep_value = s;
      a.method = m;
      a.count = static_cast<long>(it->second.first.size());
      const MeanStd e = mean_std(it->second.first);
      const MeanStd n = mean_std(it->second.second);
      a.err_mean = e.mean;
      a.err_std = e.std;
      a.n_star_mean = n.mean;
      a.n_star_std = n.std;
      out.push_back(std::move(a));
    }
  return out;
}

inline std::string raw_csv(const std::vector<ResultRow>& rows) {
  std::ostringstream o;
  o << kRawHeader << "\n";
  for (const auto& r : rows)
    o << r.experiment << "," << r.repeat_id << "," << format_double(r.sweep_value) << "," << r.method << ","
      << format_double(r.err) << "," << r.n_star << "," << format_double(r.elapsed_ms) << "\n";
  return o.str();
}

inline std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
  std::ostringstream o;
  o << "sweep_value,method,count,err_mean,err_std,n_star_mean,n_star_std\n";
  for (const auto& a : rows)
    o << format_double(a.sweep_value) << "," << a.method << "," << a.count << "," << format_double(a.err_mean) << ","
      << format_double(a.err_std) << "," << format_double(a.n_star_mean) << "," << format_double(a.n_star_std)
      << "\n";
  return o.str();
}

// Per-n averages of the delta_curve records.
inline std::string curve_csv(const std::vector<CurveRow>& curve) {
  std::map<long, std::vector<const CurveRow*>> by_n;
  for (const auto& c : curve) by_n[c.n].push_back(&c);
  std::ostringstream o;
  o << "n,count,delta_hat_mean,var_hat_mean,kappa_mean,delta_star_mean,delta_emp_mean,delta_emp_std,delta_test_mean\n";
  for (const auto& [n, items] : by_n) {
    std::vector<double> dh, vh, k, ds, de, dt;
    for (const CurveRow* c : items) {
      dh.push_back(c->delta_hat);
      vh.push_back(c->var_hat);
      k.push_back(c->kappa);
      ds.push_back(c->delta_star);
      de.push_back(c->delta_emp);
      dt.push_back(c->delta_test);
    }
    const MeanStd emp = mean_std(de);
    o << n << "," << items.size() << "," << format_double(mean_std(dh).mean) << "," << format_double(mean_std(vh).mean)
      << "," << format_double(mean_std(k).mean) << "," << format_double(mean_std(ds).mean) << ","
      << format_double(emp.mean) << "," << format_double(emp.std) << "," << format_double(mean_std(dt).mean) << "\n";
  }
  return o.str();
}

namespace detail {

struct Series {
  Series(std::string n, std::string c) : name(std::move(n)), color(std::move(c)) {}
  std::string name;
  std::string color;
  std::vector<double> x, y, lo, hi;
  bool dashed = false;
  bool right_axis = false;
};

inline std::string format_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline std::string svg_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

inline std::string render_svg(const std::string& title, const std::string& xlabel, bool log_x,
                              const std::vector<Series>& series, const std::string& ylabel,
                              const std::string& ylabel_right) {
  const double W = 720, H = 440, L = 70, R = 70, T = 40, B = 60;
  const auto fx = [&](double x) { return log_x ? std::log10(std::max(x, 1e-300)) : x; };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0;
  double y0[2] = {x0, x0}, y1[2] = {-x0, -x0};
  for (const auto& s : series) {
    const int a = s.right_axis ? 1 : 0;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x0 = std::min(x0, fx(s.x[i]));
      x1 = std::max(x1, fx(s.x[i]));
      y0[a] = std::min(y0[a], s.lo.empty() ? s.y[i] : s.lo[i]);
      y1[a] = std::max(y1[a], s.hi.empty() ? s.y[i] : s.hi[i]);
    }
  }
  if (!(x1 > x0)) x1 = x0 + 1;
  for (int a = 0; a < 2; ++a) {
    if (!std::isfinite(y0[a])) y0[a] = 0, y1[a] = 1;
    if (!(y1[a] > y0[a])) y1[a] = y0[a] + 1;
  }
  const auto px = [&](double x) { return L + (fx(x) - x0) / (x1 - x0) * (W - L - R); };
  const auto py = [&](double y, int a) { return H - B - (y - y0[a]) / (y1[a] - y0[a]) * (H - T - B); };

  std::ostringstream o;
  o.precision(6);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << svg_escape(title) << "</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  bool any_right = false;
  for (const auto& s : series) any_right = any_right || s.right_axis;
  if (any_right)
    o << "<line x1=\"" << W - R << "\" y1=\"" << T << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fxv = x0 + (x1 - x0) * i / 4.0;
    const double xv = log_x ? std::pow(10.0, fxv) : fxv;
    o << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << format_tick(xv) << "</text>\n";
    for (int a = 0; a < (any_right ? 2 : 1); ++a) {
      const double yv = y0[a] + (y1[a] - y0[a]) * i / 4.0;
      o << "<text x=\"" << (a == 0 ? L - 6 : W - R + 6) << "\" y=\"" << py(yv, a) + 4 << "\" text-anchor=\""
        << (a == 0 ? "end" : "start") << "\">" << format_tick(yv) << "</text>\n";
    }
  }
  o << "<text x=\"" << W / 2 << "\" y=\"" << H - 18 << "\" text-anchor=\"middle\">" << svg_escape(xlabel) << "</text>\n";
  o << "<text transform=\"translate(16," << H / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << svg_escape(ylabel) << "</text>\n";
  if (any_right)
    o << "<text transform=\"translate(" << W - 14 << "," << H / 2 << ") rotate(90)\" text-anchor=\"middle\">"
      << svg_escape(ylabel_right) << "</text>\n";
  int legend = 0;
  for (const auto& s : series) {
    const int a = s.right_axis ? 1 : 0;
    if (!s.lo.empty()) {
      o << "<polygon fill=\"" << s.color << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) o << px(s.x[i]) << "," << py(s.hi[i], a) << " ";
      for (std::size_t i = s.x.size(); i-- > 0;) o << px(s.x[i]) << "," << py(s.lo[i], a) << " ";
      o << "\"/>\n";
    }
    o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\""
      << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << " points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) o << px(s.x[i]) << "," << py(s.y[i], a) << " ";
    o << "\"/>\n";
    o << "<line x1=\"" << L + 10 << "\" y1=\"" << T + 10 + 16 * legend << "\" x2=\"" << L + 30 << "\" y2=\""
      << T + 10 + 16 * legend << "\" stroke=\"" << s.color << "\" stroke-width=\"2\""
      << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n";
    o << "<text x=\"" << L + 36 << "\" y=\"" << T + 14 + 16 * legend << "\">" << svg_escape(s.name) << "</text>\n";
    ++legend;
  }
  o << "</svg>\n";
  return o.str();
}

inline const char* method_color(const std::string& m) {
  if (m == "target_only") return "#1f77b4";
  if (m == "triple_s") return "#ff7f0e";
  if (m == "data_enriched") return "#7f7f7f";
  if (m == "spectral_finetune") return "#2ca02c";
  return "#000000";
}

}  // namespace detail

inline const char* sweep_label(Experiment e) {
  switch (e) {
    case Experiment::nT_sweep: return "n_T";
    case Experiment::sigmaS_sweep: return "sigma_S";
    case Experiment::epsilon_sweep: return "epsilon";
    case Experiment::lambdaS_sweep: return "lambda_S";
    case Experiment::real_data: return "n_T";
    case Experiment::delta_curve: return "n";
  }
  return "";
}

inline std::string results_svg(const ExperimentConfig& cfg, const ExperimentResult& res) {
  using detail::Series;
  std::vector<Series> series;
  if (cfg.experiment == Experiment::delta_curve) {
    std::map<long, std::vector<double>> emp, hat;
    for (const auto& c : res.curve) {
      emp[c.n].push_back(c.delta_emp);
      hat[c.n].push_back(c.delta_hat);
    }
    Series e{"empirical gain", "#1f77b4"}, h{"estimated gain", "#ff7f0e"};
    for (const auto& [n, v] : emp) {
      const MeanStd m = mean_std(v);
      e.x.push_back(static_cast<double>(n));
      e.y.push_back(m.mean);
      e.lo.push_back(m.mean - m.std);
      e.hi.push_back(m.mean + m.std);
      h.x.push_back(static_cast<double>(n));
      h.y.push_back(mean_std(hat[n]).mean);
    }
    series = {e, h};
    return detail::render_svg("transfer gain vs borrowed samples", "n", false, series, "gain", "");
  }
  const auto agg = aggregate(res.rows);
  std::vector<std::string> methods;
  for (const auto& a : agg)
    if (std::find(methods.begin(), methods.end(), a.method) == methods.end()) methods.push_back(a.method);
  for (const auto& m : methods) {
    Series s{m, detail::method_color(m)};
    s.dashed = m == "target_only";
    Series ns{"n_star (" + m + ")", detail::method_color(m)};
    ns.dashed = true;
    ns.right_axis = true;
    for (const auto& a : agg)
      if (a.method == m) {
        s.x.push_back(a.sweep_value);
        s.y.push_back(a.err_mean);
        s.lo.push_back(std::max(0.0, a.err_mean - a.err_std));
        s.hi.push_back(a.err_mean + a.err_std);
        ns.x.push_back(a.sweep_value);
        ns.y.push_back(a.n_star_mean);
      }
    series.push_back(s);
    if (m == "triple_s" && cfg.experiment != Experiment::nT_sweep && cfg.experiment != Experiment::real_data)
      series.push_back(ns);
  }
  const bool log_x = cfg.experiment == Experiment::sigmaS_sweep || cfg.experiment == Experiment::epsilon_sweep ||
                     cfg.experiment == Experiment::lambdaS_sweep;
  return detail::render_svg(to_string(cfg.experiment), sweep_label(cfg.experiment), log_x, series, "test error",
                            "n_star");
}

inline std::string manifest_text(const ExperimentConfig& cfg) {
  const std::string canon = canonical_config(cfg);
  char hash[20];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(canon)));
  std::ostringstream o;
  o << "version = " << kVersion << "\n";
  o << "config_hash = fnv1a64:" << hash << "\n";
  o << "seed = " << cfg.seed << "\n";
  o << "eigen = " << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "." << EIGEN_MINOR_VERSION << "\n";
  o << "# effective configuration\n" << canon;
  return o.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError(path.string(), "cannot write");
  f << text;
  if (!f) throw IoError(path.string(), "write failed");
}

// raw.csv, aggregate.csv, plot.svg, manifest.txt (+ curve.csv for delta_curve).
inline void emit_results(const ExperimentResult& res, const ExperimentConfig& cfg) {
  if (res.rows.empty()) throw InvalidInputError("emit_results: no rows");
  const std::filesystem::path dir(cfg.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError(dir.string(), "cannot create output directory");
  write_file(dir / "raw.csv", raw_csv(res.rows));
  write_file(dir / "aggregate.csv", aggregate_csv(aggregate(res.rows)));
  if (!res.curve.empty()) write_file(dir / "curve.csv", curve_csv(res.curve));
  write_file(dir / "plot.svg", results_svg(cfg, res));
  write_file(dir / "manifest.txt", manifest_text(cfg));
}

}  // namespace sampleshare::bench
