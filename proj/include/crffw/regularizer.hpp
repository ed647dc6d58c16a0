#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "crffw/types.hpp"

namespace crffw {

/// r(x) added to the energy: none, (lambda/2)||x||^2, or lambda * sum x log x
/// (negative entropy). Both nontrivial variants are lambda-strongly convex on X.
struct Regularizer {
  enum class Kind { None, L2, Entropy };

  Kind kind = Kind::None;
  double lambda = 0.0;

  static Regularizer none() { return {}; }
  static Regularizer l2(double lambda) { return make(Kind::L2, lambda); }
  static Regularizer entropy(double lambda) { return make(Kind::Entropy, lambda); }

  bool is_none() const { return kind == Kind::None; }
  double strong_convexity() const { return is_none() ? 0.0 : lambda; }

  std::string name() const {
    switch (kind) {
      case Kind::L2: return "l2";
      case Kind::Entropy: return "entropy";
      default: return "none";
    }
  }

  bool operator==(const Regularizer&) const = default;

 private:
  static Regularizer make(Kind k, double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidArgument("Regularizer: lambda must be positive");
    return {k, lambda};
  }
};

/// Entries are clamped to >= 1e-300 before the log, so 0 log 0 evaluates to 0.
inline double xlogx(double v) { return v * std::log(std::max(v, 1e-300)); }

inline double regularizer_value(const Regularizer& reg, const Matrix& x) {
  switch (reg.kind) {
    case Regularizer::Kind::L2: return 0.5 * reg.lambda * x.squaredNorm();
    case Regularizer::Kind::Entropy: {
      double s = 0.0;
      for (Eigen::Index k = 0; k < x.size(); ++k) s += xlogx(x.data()[k]);
      return reg.lambda * s;
    }
    default: return 0.0;
  }
}

}  // namespace crffw
