#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "sampleshare/bench/config.hpp"
#include "sampleshare/estimators.hpp"
#include "sampleshare/model.hpp"

namespace sampleshare::bench {

struct ExpectedShape {
  Index rows;
  Index features;
};

inline ExpectedShape expected_shape(RealName name) {
  return name == RealName::email ? ExpectedShape{4601, 57} : ExpectedShape{506, 13};
}

inline const char* default_file_name(RealName name) {
  return name == RealName::email ? "spambase.data" : "boston.csv";
}

struct RawTable {
  std::vector<std::vector<double>> rows;
  bool had_header = false;
};

// Comma, semicolon, tab or space separated numeric table. A first line containing
// any non-numeric cell is treated as a header.
inline RawTable read_numeric_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path);
  RawTable t;
  std::string line;
  std::size_t lineno = 0;
  std::size_t data_row = 0;
  while (std::getline(in, line)) {
    ++lineno;
    for (char& c : line)
      if (c == ';' || c == '\t' || c == ',') c = ' ';
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; ss >> cell;) cells.push_back(cell);
    if (cells.empty()) continue;
    std::vector<double> row;
    row.reserve(cells.size());
    std::size_t bad = cells.size();
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const auto v = detail::to_double(cells[j]);
      if (!v || !std::isfinite(*v)) {
        bad = j;
        break;
      }
      row.push_back(*v);
    }
    if (bad != cells.size()) {
      if (lineno == 1) {
        t.had_header = true;
        continue;
      }
      throw ParseError(data_row + 1, bad + 1, cells[bad]);
    }
    ++data_row;
    if (!t.rows.empty() && row.size() != t.rows.front().size())
      throw IntegrityError(data_row, row.size(), "ragged row " + std::to_string(data_row) + " in " + path);
    t.rows.push_back(std::move(row));
  }
  return t;
}

struct Standardization {
  Vector mean;
  Vector scale;  // population standard deviation, 1 for constant columns
  double response_mean = 0.0;
};

// Per-column zero mean and unit population variance; the response is centered.
inline Standardization standardize(Dataset& data) {
  Standardization s;
  const double n = static_cast<double>(data.rows());
  s.mean = data.X.colwise().mean().transpose();
  data.X.rowwise() -= s.mean.transpose();
  s.scale = (data.X.array().square().colwise().sum() / n).sqrt().matrix().transpose();
  for (Index j = 0; j < s.scale.size(); ++j)
    if (!(s.scale(j) > 0.0)) s.scale(j) = 1.0;
  data.X = data.X.array().rowwise() / s.scale.transpose().array();
  s.response_mean = data.y.mean();
  data.y.array() -= s.response_mean;
  return s;
}

inline Dataset load_real_dataset(RealName name, const std::string& path) {
  const RawTable t = read_numeric_table(path);
  const ExpectedShape want = expected_shape(name);
  const std::size_t cols = t.rows.empty() ? 0 : t.rows.front().size();
  if (static_cast<Index>(t.rows.size()) != want.rows || static_cast<Index>(cols) != want.features + 1)
    throw IntegrityError(t.rows.size(), cols == 0 ? 0 : cols - 1,
                         std::string(to_string(name)) + " expects " + std::to_string(want.rows) + " rows x " +
                             std::to_string(want.features) + " features");
  Dataset data{Matrix(want.rows, want.features), Vector(want.rows)};
  for (Index i = 0; i < want.rows; ++i) {
    const auto& r = t.rows[static_cast<std::size_t>(i)];
    for (Index j = 0; j < want.features; ++j) data.X(i, j) = r[static_cast<std::size_t>(j)];
    data.y(i) = r.back();
  }
  standardize(data);
  return data;
}

struct RealSplit {
  RealName name = RealName::boston;
  Dataset target;
  Dataset source;
  Vector theta_T_proxy;
  Vector theta_S_proxy;
  std::vector<Index> target_rows;
  std::vector<Index> source_rows;
};

inline constexpr int kClusterIterations = 100;
inline constexpr double kProxyRidge = 1.0;

// Two-means labels (0/1) with seeded initialization from two distinct rows.
inline std::vector<int> two_means(const Matrix& X, std::uint64_t seed, int max_iter = kClusterIterations) {
  const Index n = X.rows();
  if (n < 2) throw SplitError("two_means: need at least two rows");
  RandomStream rng(seed, Substream::clustering);
  std::uniform_int_distribution<Index> pick(0, n - 1);
  const Index a = pick(rng.engine());
  Index b = a;
  for (int tries = 0; b == a || (X.row(b) - X.row(a)).squaredNorm() == 0.0; ++tries) {
    if (tries > 10 * n) throw SplitError("two_means: all rows identical");
    b = pick(rng.engine());
  }
  Matrix centers(2, X.cols());
  centers.row(0) = X.row(a);
  centers.row(1) = X.row(b);
  std::vector<int> label(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (Index i = 0; i < n; ++i) {
      const double d0 = (X.row(i) - centers.row(0)).squaredNorm();
      const double d1 = (X.row(i) - centers.row(1)).squaredNorm();
      const int l = d1 < d0 ? 1 : 0;
      if (label[static_cast<std::size_t>(i)] != l) {
        label[static_cast<std::size_t>(i)] = l;
        changed = true;
      }
    }
    if (!changed) break;
    for (int c = 0; c < 2; ++c) {
      Vector sum = Vector::Zero(X.cols());
      Index count = 0;
      for (Index i = 0; i < n; ++i)
        if (label[static_cast<std::size_t>(i)] == c) {
          sum += X.row(i).transpose();
          ++count;
        }
      if (count > 0) centers.row(c) = (sum / static_cast<double>(count)).transpose();
    }
  }
  return label;
}

inline RealSplit cluster_split(const Dataset& data, std::uint64_t seed, RealName name = RealName::boston) {
  data.validate("clustering input");
  const Index d = data.dim();
  if (data.rows() < 2 * d) throw SplitError("cluster_split: need at least 2d rows");
  const std::vector<int> label = two_means(data.X, seed);
  std::vector<Index> rows[2];
  for (Index i = 0; i < data.rows(); ++i) rows[label[static_cast<std::size_t>(i)]].push_back(i);
  const int source_label = rows[1].size() > rows[0].size() ? 1 : 0;
  RealSplit s;
  s.name = name;
  s.source_rows = rows[source_label];
  s.target_rows = rows[1 - source_label];
  if (static_cast<Index>(s.target_rows.size()) < d)
    throw SplitError("cluster_split: smaller cluster has " + std::to_string(s.target_rows.size()) +
                     " rows (< d); try a different seed");
  s.target = select_rows(data, s.target_rows);
  s.source = select_rows(data, s.source_rows);
  s.theta_T_proxy = fit_ridge(s.target, kProxyRidge).theta_hat;
  s.theta_S_proxy = fit_ridge(s.source, kProxyRidge).theta_hat;
  return s;
}

struct DatasetCheck {
  RealName name;
  std::string path;
  bool ok = false;
  std::string message;
};

inline std::vector<DatasetCheck> verify_datasets(const std::string& dir) {
  std::vector<DatasetCheck> out;
  for (RealName name : {RealName::email, RealName::boston}) {
    DatasetCheck c{name, (std::filesystem::path(dir) / default_file_name(name)).string(), false, {}};
    try {
      const Dataset ds = load_real_dataset(name, c.path);
      c.ok = true;
      c.message = std::to_string(ds.rows()) + "x" + std::to_string(ds.dim());
    } catch (const Error& e) {
      c.message = e.what();
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace sampleshare::bench
