#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "crffw/model.hpp"
#include "crffw/regularizer.hpp"
#include "crffw/types.hpp"

namespace crffw {

/// Euclidean projection of v onto the probability simplex, written into z.
/// Sort-based: with a = sort(v, descending) and gamma_k = (a_1 + ... + a_k - 1) / k,
/// the answer is max(v - gamma_{k*}, 0) for the largest k* with a_{k*} > gamma_{k*}.
template <class In, class Out>
void project_simplex_into(const In& v, Out& z, std::vector<double>& scratch) {
  const auto d = static_cast<std::size_t>(v.size());
  scratch.resize(d);
  for (std::size_t k = 0; k < d; ++k) scratch[k] = v[static_cast<Eigen::Index>(k)];
  std::sort(scratch.begin(), scratch.end(), std::greater<>());
  double cumsum = 0.0;
  double gamma = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    cumsum += scratch[k];
    const double g = (cumsum - 1.0) / static_cast<double>(k + 1);
    if (scratch[k] > g) gamma = g;
  }
  for (std::size_t k = 0; k < d; ++k) {
    const auto idx = static_cast<Eigen::Index>(k);
    z[idx] = std::max(v[idx] - gamma, 0.0);
  }
}

inline std::vector<double> project_simplex(std::span<const double> v) {
  if (v.empty()) throw InvalidArgument("project_simplex: empty vector");
  for (double c : v) {
    if (!std::isfinite(c)) throw InvalidArgument("project_simplex: non-finite input");
  }
  const Eigen::Map<const Vector> in(v.data(), static_cast<Eigen::Index>(v.size()));
  std::vector<double> out(v.size());
  Eigen::Map<Vector> z(out.data(), static_cast<Eigen::Index>(out.size()));
  std::vector<double> scratch;
  project_simplex_into(in, z, scratch);
  return out;
}

/// Row-wise projection onto X.
inline RelaxedPoint project_feasible(const Matrix& v) {
  if (!v.allFinite()) throw InvalidArgument("project_feasible: non-finite input");
  Matrix out(v.rows(), v.cols());
  std::vector<double> scratch;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    auto row = out.row(i);
    project_simplex_into(v.row(i), row, scratch);
  }
  return RelaxedPoint::unchecked(std::move(out));
}

/// Row-wise softmax with max-shift.
inline RelaxedPoint softmax_rows(const Matrix& v) {
  Matrix out(v.rows(), v.cols());
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double shift = v.row(i).maxCoeff();
    double z = 0.0;
    for (Eigen::Index s = 0; s < v.cols(); ++s) {
      const double e = std::exp(v(i, s) - shift);
      out(i, s) = e;
      z += e;
    }
    out.row(i) /= z;
  }
  return RelaxedPoint::unchecked(std::move(out));
}

inline Labeling round_nearest(const Matrix& x) {
  Labeling s(std::vector<std::size_t>(static_cast<std::size_t>(x.rows())));
  for (Eigen::Index i = 0; i < x.rows(); ++i) s[static_cast<std::size_t>(i)] = argmax_lowest(x.row(i));
  return s;
}

namespace detail {

/// target += P[:, block i] * delta, touching only rows coupled to node i.
inline void add_pairwise_column(const PairwiseBackend& backend, std::size_t i, const Eigen::RowVectorXd& delta,
                                Matrix& target) {
  const auto d = static_cast<Eigen::Index>(delta.size());
  const auto ii = static_cast<Eigen::Index>(i);
  if (const auto* dense = std::get_if<DenseMatrix>(&backend)) {
    const Vector col = dense->matrix().middleCols(ii * d, d) * delta.transpose();
    target += Eigen::Map<const Matrix>(col.data(), target.rows(), target.cols());
    return;
  }
  if (const auto* list = std::get_if<EdgeList>(&backend)) {
    for (std::size_t idx : list->incident(i)) {
      const auto& e = list->edges()[idx];
      if (e.j == i) {
        target.row(static_cast<Eigen::Index>(e.i)) += delta * e.theta.transpose();
      } else {
        target.row(static_cast<Eigen::Index>(e.j)) += delta * e.theta;
      }
    }
    return;
  }
  const auto& gk = std::get<GaussianKernel>(backend);
  const Eigen::RowVectorXd mixed = delta * gk.compat().transpose();
  for (std::size_t j = 0; j < gk.n(); ++j) {
    if (j != i) target.row(static_cast<Eigen::Index>(j)) += gk.offdiag(j, i) * mixed;
  }
}

}  // namespace detail

inline constexpr int kDefaultBcdSweeps = 100;

/// Block-coordinate rounding. Nodes are visited in ascending order; each is
/// replaced by the one-hot minimizer of its conditional energy given the
/// current mixed point (visited nodes discrete, the rest fractional). A node
/// already one-hot at a minimizing label keeps it. Stops after a sweep with
/// no change or after max_sweeps. For q = 0 the energy never increases.
inline Labeling round_bcd(const CrfInstance& inst, const Matrix& x, int max_sweeps = kDefaultBcdSweeps) {
  check_point_dims(inst, x, "round_bcd");
  if (max_sweeps < 1) throw InvalidArgument("round_bcd: max_sweeps must be >= 1");
  const std::size_t n = inst.n();
  const auto d = static_cast<Eigen::Index>(inst.d());
  Matrix y = x;
  Matrix field = pairwise_matvec(inst.pairwise(), y);
  Matrix base = inst.unary();
  if (inst.has_diagonal()) base += 0.5 * inst.diagonal();

  Labeling s(std::vector<std::size_t>(n, 0));
  std::vector<bool> discrete(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = y.row(static_cast<Eigen::Index>(i));
    const std::size_t top = argmax_lowest(row);
    if (row(static_cast<Eigen::Index>(top)) == 1.0 && row.cwiseAbs().sum() == 1.0) {
      s[i] = top;
      discrete[i] = true;
    }
  }
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const Eigen::RowVectorXd cost = base.row(ii) + field.row(ii);
      std::size_t best = argmin_lowest(cost);
      if (discrete[i] && cost(static_cast<Eigen::Index>(s[i])) <= cost(static_cast<Eigen::Index>(best))) {
        best = s[i];
      }
      if (discrete[i] && best == s[i]) continue;
      Eigen::RowVectorXd target = Eigen::RowVectorXd::Zero(d);
      target(static_cast<Eigen::Index>(best)) = 1.0;
      const Eigen::RowVectorXd delta = target - y.row(ii);
      if (delta.cwiseAbs().maxCoeff() > 0.0) {
        detail::add_pairwise_column(inst.pairwise(), i, delta, field);
        y.row(ii) = target;
        changed = true;
      }
      s[i] = best;
      discrete[i] = true;
    }
    if (!changed) break;
  }
  return s;
}

struct RoundingScheme {
  enum class Kind { Nearest, Bcd };
  Kind kind = Kind::Nearest;
  int max_sweeps = kDefaultBcdSweeps;

  static RoundingScheme nearest() { return {}; }
  static RoundingScheme bcd(int max_sweeps = kDefaultBcdSweeps) {
    if (max_sweeps < 1) throw InvalidArgument("RoundingScheme: max_sweeps must be >= 1");
    return {Kind::Bcd, max_sweeps};
  }
};

inline Labeling round(const CrfInstance& inst, const Matrix& x, const RoundingScheme& scheme) {
  return scheme.kind == RoundingScheme::Kind::Bcd ? round_bcd(inst, x, scheme.max_sweeps) : round_nearest(x);
}

/// C = sqrt(n (1 - 1/d)) (||u||_2 + sqrt(n) ||P||_2): the largest change in E
/// that nearest rounding can cause. Uses the spectral-norm upper bound.
inline double rounding_constant(const CrfInstance& inst) {
  const auto n = static_cast<double>(inst.n());
  const auto d = static_cast<double>(inst.d());
  return std::sqrt(n * (1.0 - 1.0 / d)) * (inst.unary().norm() + std::sqrt(n) * lipschitz_upper_bound(inst));
}

struct RegularizerBounds {
  double m;  ///< min of r over X
  double M;  ///< max of r over X
};

inline RegularizerBounds regularizer_bounds(const Regularizer& reg, std::size_t n, std::size_t d) {
  if (!reg.is_none() && !(reg.lambda > 0.0)) throw InvalidArgument("regularizer_bounds: lambda must be positive");
  if (n == 0 || d == 0) throw InvalidArgument("regularizer_bounds: n and d must be positive");
  const auto nn = static_cast<double>(n);
  const auto dd = static_cast<double>(d);
  switch (reg.kind) {
    case Regularizer::Kind::L2: return {reg.lambda * nn / (2.0 * dd), reg.lambda * nn / 2.0};
    case Regularizer::Kind::Entropy: return {-reg.lambda * nn * std::log(dd), 0.0};
    default: return {0.0, 0.0};
  }
}

}  // namespace crffw
