#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sampleshare {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInputError : public Error {
 public:
  using Error::Error;
};

// Raised by the Cholesky factorization when a pivot is not strictly positive.
class SingularMatrixError : public Error {
 public:
  SingularMatrixError(std::size_t pivot, const std::string& context = {})
      : Error("non-positive pivot at index " + std::to_string(pivot) +
              (context.empty() ? std::string{} : " (" + context + ")")),
        pivot_(pivot) {}

  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

// A state that can only arise from corrupted inputs, e.g. a non-SPD inverse.
class InternalStateError : public Error {
 public:
  using Error::Error;
};

class TruncatedStreamError : public Error {
 public:
  TruncatedStreamError(std::size_t consumed, std::size_t requested)
      : Error("source stream exhausted after " + std::to_string(consumed) +
              " samples, " + std::to_string(requested) + " requested"),
        consumed_(consumed) {}

  std::size_t consumed() const noexcept { return consumed_; }

 private:
  std::size_t consumed_;
};

class IoError : public Error {
 public:
  explicit IoError(std::string path, const std::string& what = "cannot open")
      : Error(what + ": " + path), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::size_t column, const std::string& cell)
      : Error("non-numeric cell '" + cell + "' at row " + std::to_string(row) +
              ", column " + std::to_string(column)),
        row_(row),
        column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

class IntegrityError : public Error {
 public:
  IntegrityError(std::size_t rows, std::size_t cols, const std::string& what)
      : Error(what + " (observed " + std::to_string(rows) + " x " + std::to_string(cols) + ")"),
        rows_(rows),
        cols_(cols) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

 private:
  std::size_t rows_;
  std::size_t cols_;
};

class SplitError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out = "invalid configuration:";
    for (const auto& item : items) out += "\n  - " + item;
    return out;
  }

  std::vector<std::string> problems_;
};

}  // namespace sampleshare
