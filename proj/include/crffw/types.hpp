#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace crffw {

/// Row-major n x d storage: row i holds the label distribution of node i.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kFeasibilityTol = 1e-9;

/// Discrete assignment s in S^n.
struct Labeling {
  std::vector<std::size_t> labels;

  Labeling() = default;
  explicit Labeling(std::vector<std::size_t> l) : labels(std::move(l)) {}

  std::size_t size() const { return labels.size(); }
  std::size_t operator[](std::size_t i) const { return labels[i]; }
  std::size_t& operator[](std::size_t i) { return labels[i]; }
  bool operator==(const Labeling&) const = default;
};

inline bool is_row_stochastic(const Matrix& x, double tol = kFeasibilityTol) {
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double sum = 0.0;
    for (Eigen::Index s = 0; s < x.cols(); ++s) {
      const double v = x(i, s);
      if (!std::isfinite(v) || v < -1e-12) return false;
      sum += v;
    }
    if (std::abs(sum - 1.0) > tol) return false;
  }
  return true;
}

/// A point of the product of simplices X. Converts implicitly to the
/// underlying matrix so that energy/gradient routines accept either.
class RelaxedPoint {
 public:
  RelaxedPoint() = default;

  explicit RelaxedPoint(Matrix values, double tol = kFeasibilityTol) : values_(std::move(values)) {
    if (!is_row_stochastic(values_, tol)) {
      throw InvalidArgument("RelaxedPoint: rows must be nonnegative and sum to 1");
    }
  }

  static RelaxedPoint unchecked(Matrix values) {
    RelaxedPoint p;
    p.values_ = std::move(values);
    return p;
  }

  const Matrix& values() const { return values_; }
  operator const Matrix&() const { return values_; }  // NOLINT(google-explicit-constructor)

  Eigen::Index n() const { return values_.rows(); }
  Eigen::Index d() const { return values_.cols(); }

 private:
  Matrix values_;
};

inline Matrix one_hot(const Labeling& s, std::size_t d) {
  Matrix x = Matrix::Zero(static_cast<Eigen::Index>(s.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] >= d) throw InvalidArgument("one_hot: label index out of range");
    x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s[i])) = 1.0;
  }
  return x;
}

/// Index of the smallest entry; ties go to the lowest index.
template <class Row>
std::size_t argmin_lowest(const Row& row) {
  std::size_t best = 0;
  for (Eigen::Index s = 1; s < row.size(); ++s) {
    if (row(s) < row(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(s);
  }
  return best;
}

template <class Row>
std::size_t argmax_lowest(const Row& row) {
  std::size_t best = 0;
  for (Eigen::Index s = 1; s < row.size(); ++s) {
    if (row(s) > row(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(s);
  }
  return best;
}

}  // namespace crffw
