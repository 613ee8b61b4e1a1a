#pragma once

#include <stdexcept>
#include <string>

namespace ipbo {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeMismatch : Error {
  ShapeMismatch(long a, long b)
      : Error("row counts differ: " + std::to_string(a) + " vs " + std::to_string(b)) {}
  explicit ShapeMismatch(const std::string& msg) : Error(msg) {}
};

struct ZeroVarianceColumn : Error {
  long column;
  explicit ZeroVarianceColumn(long j)
      : Error("predictor column " + std::to_string(j) + " has zero sample variance"), column(j) {}
};

struct DimensionMismatch : Error {
  DimensionMismatch(long expected, long got)
      : Error("dimension mismatch: expected " + std::to_string(expected) + ", got " +
              std::to_string(got)) {}
};

struct NonPsdInput : Error {
  double min_eigenvalue;
  explicit NonPsdInput(double eig)
      : Error("input matrix not positive semidefinite (min eigenvalue " + std::to_string(eig) + ")"),
        min_eigenvalue(eig) {}
};

struct NonPositiveDiagonal : Error {
  long index;
  explicit NonPositiveDiagonal(long k)
      : Error("precision diagonal entry " + std::to_string(k) + " is not strictly positive"),
        index(k) {}
};

struct DimensionTooSmall : Error {
  int example_id;
  DimensionTooSmall(int id, const std::string& requirement)
      : Error("example " + std::to_string(id) + " requires " + requirement), example_id(id) {}
};

struct DimensionGuard : Error {
  explicit DimensionGuard(const std::string& msg) : Error(msg) {}
};

struct TargetUnreachable : Error {
  int target;
  int max_count;
  TargetUnreachable(int tgt, int got)
      : Error("sparsity target " + std::to_string(tgt) + " unreachable; densest fit selects " +
              std::to_string(got)),
        target(tgt), max_count(got) {}
};

struct DegenerateRss : Error {
  explicit DegenerateRss(long k)
      : Error("response " + std::to_string(k) + " has near-zero residual sum of squares") {}
};

struct ParseError : Error {
  long line;
  ParseError(long ln, const std::string& detail)
      : Error("parse error at line " + std::to_string(ln) + ": " + detail), line(ln) {}
};

struct EmptyPanel : Error {
  EmptyPanel() : Error("price panel has no usable rows") {}
};

struct InsufficientData : Error {
  explicit InsufficientData(const std::string& msg) : Error(msg) {}
};

struct ConstantSeries : Error {
  long column;
  explicit ConstantSeries(long j)
      : Error("series " + std::to_string(j) + " is constant; correlation undefined"), column(j) {}
};

struct MissingLabels : Error {
  explicit MissingLabels(const std::string& msg) : Error(msg) {}
};

struct WindowMisalignment : Error {
  explicit WindowMisalignment(const std::string& msg) : Error(msg) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

}  // namespace ipbo
