#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <set>
#include <utility>
#include <variant>
#include <vector>

#include "crffw/random.hpp"
#include "crffw/types.hpp"

namespace crffw {

// ---------------------------------------------------------------------------
// Pairwise backends
// ---------------------------------------------------------------------------

/// Explicit nd x nd symmetric matrix with zero d x d diagonal blocks.
/// Index (i, s) maps to i * d + s.
class DenseMatrix {
 public:
  DenseMatrix(Matrix p, std::size_t n, std::size_t d) : p_(std::move(p)), n_(n), d_(d) {
    const auto nd = static_cast<Eigen::Index>(n * d);
    if (p_.rows() != nd || p_.cols() != nd) throw InvalidArgument("DenseMatrix: expected nd x nd matrix");
    if (!p_.allFinite()) throw InvalidArgument("DenseMatrix: entries must be finite");
    const double scale = std::max(1.0, p_.cwiseAbs().maxCoeff());
    if ((p_ - p_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw InvalidArgument("DenseMatrix: matrix must be symmetric");
    }
    const auto dd = static_cast<Eigen::Index>(d);
    for (std::size_t i = 0; i < n; ++i) {
      const auto o = static_cast<Eigen::Index>(i * d);
      if (p_.block(o, o, dd, dd).cwiseAbs().maxCoeff() != 0.0) {
        throw InvalidArgument("DenseMatrix: diagonal blocks must be zero");
      }
    }
  }

  const Matrix& matrix() const { return p_; }
  std::size_t n() const { return n_; }
  std::size_t d() const { return d_; }

 private:
  Matrix p_;
  std::size_t n_;
  std::size_t d_;
};

/// One pairwise term x_i^T theta x_j with i < j; rows of theta index the
/// label of i, columns the label of j.
struct Edge {
  std::size_t i;
  std::size_t j;
  Matrix theta;
};

class EdgeList {
 public:
  /// Edges given as (j, i) with j > i are reoriented and their matrix
  /// transposed, so every stored edge has i < j.
  EdgeList(std::vector<Edge> edges, std::size_t n, std::size_t d) : n_(n), d_(d), incident_(n) {
    std::set<std::pair<std::size_t, std::size_t>> seen;
    edges_.reserve(edges.size());
    for (auto& e : edges) {
      if (e.i >= n || e.j >= n) throw InvalidArgument("EdgeList: node index out of range");
      if (e.i == e.j) throw InvalidArgument("EdgeList: self edge");
      if (e.theta.rows() != static_cast<Eigen::Index>(d) || e.theta.cols() != static_cast<Eigen::Index>(d)) {
        throw InvalidArgument("EdgeList: edge matrix must be d x d");
      }
      if (!e.theta.allFinite()) throw InvalidArgument("EdgeList: edge matrix must be finite");
      if (e.i > e.j) {
        std::swap(e.i, e.j);
        e.theta.transposeInPlace();
      }
      if (!seen.emplace(e.i, e.j).second) throw InvalidArgument("EdgeList: duplicate edge");
      incident_[e.i].push_back(edges_.size());
      incident_[e.j].push_back(edges_.size());
      edges_.push_back(std::move(e));
    }
  }

  const std::vector<Edge>& edges() const { return edges_; }
  /// Indices into edges() touching node i.
  const std::vector<std::size_t>& incident(std::size_t i) const { return incident_[i]; }
  std::size_t n() const { return n_; }
  std::size_t d() const { return d_; }

 private:
  std::vector<Edge> edges_;
  std::size_t n_;
  std::size_t d_;
  std::vector<std::vector<std::size_t>> incident_;
};

struct KernelParams {
  double w1 = 1.0;     ///< bilateral (appearance) weight
  double w2 = 1.0;     ///< spatial (smoothness) weight
  double alpha = 80.0; ///< bilateral position bandwidth, pixels
  double beta = 13.0;  ///< bilateral color bandwidth
  double gamma = 3.0;  ///< spatial bandwidth, pixels
};

inline Matrix potts_compatibility(std::size_t d, double w = 1.0) {
  const auto dd = static_cast<Eigen::Index>(d);
  Matrix mu = Matrix::Constant(dd, dd, w);
  mu.diagonal().setZero();
  return mu;
}

/// Fully connected pairwise term theta_ij(s, t) = mu(s, t) k(f_i, f_j) over
/// all i != j, where k is a bilateral plus spatial Gaussian kernel.
class GaussianKernel {
 public:
  static constexpr std::size_t kCacheLimit = 4096;

  GaussianKernel(Matrix positions, Matrix colors, KernelParams params, Matrix compat)
      : positions_(std::move(positions)), colors_(std::move(colors)), params_(params), compat_(std::move(compat)) {
    if (positions_.cols() != 2) throw InvalidArgument("GaussianKernel: positions must be n x 2");
    if (colors_.cols() != 3 || colors_.rows() != positions_.rows()) {
      throw InvalidArgument("GaussianKernel: colors must be n x 3");
    }
    if (!(params_.alpha > 0.0) || !(params_.beta > 0.0) || !(params_.gamma > 0.0)) {
      throw InvalidArgument("GaussianKernel: bandwidths must be strictly positive");
    }
    if (!std::isfinite(params_.w1) || !std::isfinite(params_.w2)) {
      throw InvalidArgument("GaussianKernel: kernel weights must be finite");
    }
    if (compat_.rows() != compat_.cols() || compat_.rows() == 0) {
      throw InvalidArgument("GaussianKernel: compatibility must be d x d");
    }
    if (!compat_.allFinite()) throw InvalidArgument("GaussianKernel: compatibility must be finite");
    if (compat_ != compat_.transpose()) throw InvalidArgument("GaussianKernel: compatibility must be symmetric");
    if (!positions_.allFinite() || !colors_.allFinite()) throw InvalidArgument("GaussianKernel: features must be finite");
    if (n() <= kCacheLimit) {
      auto k = std::make_shared<Matrix>(Matrix::Zero(positions_.rows(), positions_.rows()));
      for (Eigen::Index i = 0; i < k->rows(); ++i) {
        for (Eigen::Index j = i + 1; j < k->cols(); ++j) {
          const double v = kernel(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
          (*k)(i, j) = v;
          (*k)(j, i) = v;
        }
      }
      cache_ = std::move(k);
    }
  }

  /// k(f_i, f_j); the self term is excluded by callers, not here.
  double kernel(std::size_t i, std::size_t j) const {
    const auto a = static_cast<Eigen::Index>(i);
    const auto b = static_cast<Eigen::Index>(j);
    const double dp = (positions_.row(a) - positions_.row(b)).squaredNorm();
    const double dc = (colors_.row(a) - colors_.row(b)).squaredNorm();
    const auto& p = params_;
    return p.w1 * std::exp(-dp / (2.0 * p.alpha * p.alpha) - dc / (2.0 * p.beta * p.beta)) +
           p.w2 * std::exp(-dp / (2.0 * p.gamma * p.gamma));
  }

  /// Kernel value for i != j, read from the cache when present.
  double offdiag(std::size_t i, std::size_t j) const {
    if (cache_) return (*cache_)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return kernel(i, j);
  }

  /// n x n kernel matrix with zero diagonal, when cached.
  const Matrix* cached() const { return cache_.get(); }

  const Matrix& positions() const { return positions_; }
  const Matrix& colors() const { return colors_; }
  const KernelParams& params() const { return params_; }
  const Matrix& compat() const { return compat_; }
  std::size_t n() const { return static_cast<std::size_t>(positions_.rows()); }
  std::size_t d() const { return static_cast<std::size_t>(compat_.rows()); }

 private:
  Matrix positions_;
  Matrix colors_;
  KernelParams params_;
  Matrix compat_;
  std::shared_ptr<const Matrix> cache_;
};

using PairwiseBackend = std::variant<DenseMatrix, EdgeList, GaussianKernel>;

inline std::size_t backend_n(const PairwiseBackend& b) {
  return std::visit([](const auto& v) { return v.n(); }, b);
}
inline std::size_t backend_d(const PairwiseBackend& b) {
  return std::visit([](const auto& v) { return v.d(); }, b);
}

/// Px for an n x d point x (off-simplex arguments allowed).
inline Matrix pairwise_matvec(const PairwiseBackend& backend, const Matrix& x) {
  const auto n = static_cast<Eigen::Index>(backend_n(backend));
  const auto d = static_cast<Eigen::Index>(backend_d(backend));
  if (x.rows() != n || x.cols() != d) throw InvalidArgument("pairwise_matvec: dimension mismatch");

  if (const auto* dense = std::get_if<DenseMatrix>(&backend)) {
    const Eigen::Map<const Vector> flat(x.data(), n * d);
    Matrix out(n, d);
    Eigen::Map<Vector>(out.data(), n * d).noalias() = dense->matrix() * flat;
    return out;
  }
  if (const auto* list = std::get_if<EdgeList>(&backend)) {
    Matrix out = Matrix::Zero(n, d);
    for (const auto& e : list->edges()) {
      const auto i = static_cast<Eigen::Index>(e.i);
      const auto j = static_cast<Eigen::Index>(e.j);
      out.row(i).noalias() += x.row(j) * e.theta.transpose();
      out.row(j).noalias() += x.row(i) * e.theta;
    }
    return out;
  }
  const auto& gk = std::get<GaussianKernel>(backend);
  const Matrix mixed = x * gk.compat().transpose();
  if (const Matrix* k = gk.cached()) {
    Matrix out(n, d);
    out.noalias() = (*k) * mixed;
    return out;
  }
  Matrix out = Matrix::Zero(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      out.row(i) += gk.offdiag(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) * mixed.row(j);
    }
  }
  return out;
}

/// Explicit nd x nd matrix of any backend (desk-scale only).
inline Matrix to_dense_matrix(const PairwiseBackend& backend) {
  const std::size_t n = backend_n(backend);
  const std::size_t d = backend_d(backend);
  const auto nd = static_cast<Eigen::Index>(n * d);
  const auto dd = static_cast<Eigen::Index>(d);
  if (const auto* dense = std::get_if<DenseMatrix>(&backend)) return dense->matrix();
  Matrix p = Matrix::Zero(nd, nd);
  if (const auto* list = std::get_if<EdgeList>(&backend)) {
    for (const auto& e : list->edges()) {
      const auto bi = static_cast<Eigen::Index>(e.i * d);
      const auto bj = static_cast<Eigen::Index>(e.j * d);
      p.block(bi, bj, dd, dd) = e.theta;
      p.block(bj, bi, dd, dd) = e.theta.transpose();
    }
    return p;
  }
  const auto& gk = std::get<GaussianKernel>(backend);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      p.block(static_cast<Eigen::Index>(i * d), static_cast<Eigen::Index>(j * d), dd, dd) =
          gk.offdiag(i, j) * gk.compat();
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// CRF instance
// ---------------------------------------------------------------------------

/// Energy E(x) = 1/2 x^T (P + diag(q)) x + u^T x over the product of
/// simplices. The diagonal q is zero for ordinary CRFs and is only set by
/// convexify().
class CrfInstance {
 public:
  CrfInstance(Matrix unary, PairwiseBackend pairwise) : unary_(std::move(unary)), pairwise_(std::move(pairwise)) {
    validate();
  }

  CrfInstance(Matrix unary, PairwiseBackend pairwise, Matrix diagonal)
      : unary_(std::move(unary)), pairwise_(std::move(pairwise)), diagonal_(std::move(diagonal)) {
    validate();
  }

  std::size_t n() const { return static_cast<std::size_t>(unary_.rows()); }
  std::size_t d() const { return static_cast<std::size_t>(unary_.cols()); }
  const Matrix& unary() const { return unary_; }
  const PairwiseBackend& pairwise() const { return pairwise_; }
  bool has_diagonal() const { return diagonal_.size() != 0; }
  /// n x d diagonal quadratic coefficients; empty when absent.
  const Matrix& diagonal() const { return diagonal_; }

  /// (P + diag(q)) x.
  Matrix quadratic_matvec(const Matrix& x) const {
    Matrix out = pairwise_matvec(pairwise_, x);
    if (has_diagonal()) out += diagonal_.cwiseProduct(x);
    return out;
  }

 private:
  void validate() const {
    if (unary_.rows() == 0 || unary_.cols() == 0) throw InvalidArgument("CrfInstance: n and d must be positive");
    if (!unary_.allFinite()) throw InvalidArgument("CrfInstance: unary entries must be finite");
    if (backend_n(pairwise_) != n() || backend_d(pairwise_) != d()) {
      throw InvalidArgument("CrfInstance: pairwise backend dimensions do not match unary");
    }
    if (has_diagonal() && (diagonal_.rows() != unary_.rows() || diagonal_.cols() != unary_.cols() ||
                           !diagonal_.allFinite())) {
      throw InvalidArgument("CrfInstance: diagonal must be a finite n x d matrix");
    }
  }

  Matrix unary_;
  PairwiseBackend pairwise_;
  Matrix diagonal_;
};

inline void check_point_dims(const CrfInstance& inst, const Matrix& x, const char* what) {
  if (static_cast<std::size_t>(x.rows()) != inst.n() || static_cast<std::size_t>(x.cols()) != inst.d()) {
    throw InvalidArgument(std::string(what) + ": dimension mismatch");
  }
}

/// Sum of unary and pairwise potentials of a labeling, evaluated term by
/// term without forming Px.
inline double energy_discrete(const CrfInstance& inst, const Labeling& s) {
  if (s.size() != inst.n()) throw InvalidArgument("energy_discrete: dimension mismatch");
  const std::size_t n = inst.n();
  const std::size_t d = inst.d();
  for (std::size_t i = 0; i < n; ++i) {
    if (s[i] >= d) throw InvalidArgument("energy_discrete: label index out of range");
  }
  auto at = [](const Matrix& m, std::size_t r, std::size_t c) {
    return m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  };
  double e = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    e += at(inst.unary(), i, s[i]);
    if (inst.has_diagonal()) e += 0.5 * at(inst.diagonal(), i, s[i]);
  }
  const auto& backend = inst.pairwise();
  if (const auto* dense = std::get_if<DenseMatrix>(&backend)) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) e += at(dense->matrix(), i * d + s[i], j * d + s[j]);
    }
  } else if (const auto* list = std::get_if<EdgeList>(&backend)) {
    for (const auto& edge : list->edges()) e += at(edge.theta, s[edge.i], s[edge.j]);
  } else {
    const auto& gk = std::get<GaussianKernel>(backend);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) e += gk.offdiag(i, j) * at(gk.compat(), s[i], s[j]);
    }
  }
  return e;
}

inline double energy_relaxed(const CrfInstance& inst, const Matrix& x) {
  check_point_dims(inst, x, "energy_relaxed");
  return 0.5 * x.cwiseProduct(inst.quadratic_matvec(x)).sum() + x.cwiseProduct(inst.unary()).sum();
}

/// grad E(x) = (P + diag(q)) x + u.
inline Matrix gradient(const CrfInstance& inst, const Matrix& x) {
  check_point_dims(inst, x, "gradient");
  Matrix g = inst.quadratic_matvec(x);
  g += inst.unary();
  return g;
}

/// Energy and gradient from a single matvec.
struct EnergyGrad {
  double energy;
  Matrix grad;
};

inline EnergyGrad energy_and_gradient(const CrfInstance& inst, const Matrix& x) {
  check_point_dims(inst, x, "energy_and_gradient");
  Matrix px = inst.quadratic_matvec(x);
  const double e = 0.5 * x.cwiseProduct(px).sum() + x.cwiseProduct(inst.unary()).sum();
  px += inst.unary();
  return {e, std::move(px)};
}

/// Max absolute row sum of P + diag(q); an upper bound on its spectral norm.
inline double infinity_norm_bound(const CrfInstance& inst) {
  const std::size_t n = inst.n();
  const std::size_t d = inst.d();
  Matrix rows = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  const auto& backend = inst.pairwise();
  if (const auto* dense = std::get_if<DenseMatrix>(&backend)) {
    const Vector sums = dense->matrix().cwiseAbs().rowwise().sum();
    rows = Eigen::Map<const Matrix>(sums.data(), rows.rows(), rows.cols());
  } else if (const auto* list = std::get_if<EdgeList>(&backend)) {
    for (const auto& e : list->edges()) {
      rows.row(static_cast<Eigen::Index>(e.i)) += e.theta.cwiseAbs().rowwise().sum().transpose();
      rows.row(static_cast<Eigen::Index>(e.j)) += e.theta.cwiseAbs().colwise().sum();
    }
  } else {
    const auto& gk = std::get<GaussianKernel>(backend);
    const Vector mu_rows = gk.compat().cwiseAbs().rowwise().sum();
    for (std::size_t i = 0; i < n; ++i) {
      double ksum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) ksum += std::abs(gk.offdiag(i, j));
      }
      rows.row(static_cast<Eigen::Index>(i)) = ksum * mu_rows.transpose();
    }
  }
  if (inst.has_diagonal()) rows += inst.diagonal().cwiseAbs();
  return rows.maxCoeff();
}

/// Power-iteration estimate of ||P + diag(q)||_2 (converges from below).
inline double spectral_norm_estimate(const CrfInstance& inst, int max_iters = 300, double rel_tol = 1e-10) {
  Rng rng(0x5eed'cafe);
  Matrix v(static_cast<Eigen::Index>(inst.n()), static_cast<Eigen::Index>(inst.d()));
  for (Eigen::Index k = 0; k < v.size(); ++k) v.data()[k] = rng.uniform(0.5, 1.5);
  double norm = v.norm();
  if (norm == 0.0) return 0.0;
  v /= norm;
  double estimate = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    Matrix w = inst.quadratic_matvec(v);
    const double next = w.norm();
    if (next == 0.0) return 0.0;
    v = w / next;
    if (std::abs(next - estimate) <= rel_tol * next) {
      estimate = next;
      break;
    }
    estimate = next;
  }
  return estimate;
}

/// Upper bound on ||P||_2, i.e. on the smoothness constant of E.
inline double lipschitz_upper_bound(const CrfInstance& inst) {
  const double inf_bound = infinity_norm_bound(inst);
  if (inf_bound == 0.0) return 0.0;
  return std::min(1.05 * spectral_norm_estimate(inst), inf_bound);
}

}  // namespace crffw
