#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "crffw/bounds.hpp"
#include "crffw/model.hpp"
#include "crffw/random.hpp"
#include "crffw/regularizer.hpp"
#include "crffw/simplex.hpp"
#include "crffw/solvers.hpp"
#include "crffw/types.hpp"

namespace crffw {

inline constexpr double kBruteForceLimit = 1e7;

struct OracleReport {
  Labeling optimal_labeling;
  double optimal_energy = 0.0;
  std::uint64_t enumerated_count = 0;
};

/// Number of labelings d^n as a double (no integer overflow).
inline double labeling_count(std::size_t n, std::size_t d) {
  return std::pow(static_cast<double>(d), static_cast<double>(n));
}

/// Calls visit(s) for every labeling in lexicographic order (node 0 most
/// significant).
template <class Visit>
void for_each_labeling(std::size_t n, std::size_t d, Visit&& visit) {
  std::vector<std::size_t> s(n, 0);
  Labeling lab(s);
  while (true) {
    visit(static_cast<const Labeling&>(lab));
    std::size_t pos = n;
    while (pos > 0) {
      --pos;
      if (++lab.labels[pos] < d) break;
      lab.labels[pos] = 0;
      if (pos == 0) return;
    }
    if (n == 0) return;
  }
}

/// Exhaustive MAP. The first labeling in lexicographic order wins ties.
inline OracleReport brute_force_map(const CrfInstance& inst) {
  const std::size_t n = inst.n();
  const std::size_t d = inst.d();
  if (labeling_count(n, d) > kBruteForceLimit) {
    throw CapacityError("brute_force_map: d^n = " + std::to_string(d) + "^" + std::to_string(n) +
                        " exceeds the enumeration limit");
  }
  OracleReport rep;
  rep.optimal_energy = std::numeric_limits<double>::infinity();
  for_each_labeling(n, d, [&](const Labeling& s) {
    const double e = energy_discrete(inst, s);
    ++rep.enumerated_count;
    if (e < rep.optimal_energy) {
      rep.optimal_energy = e;
      rep.optimal_labeling = s;
    }
  });
  return rep;
}

/// Central differences of energy_relaxed, one coordinate at a time. Points
/// off X are allowed since E is a polynomial.
inline Matrix finite_diff_gradient(const CrfInstance& inst, const Matrix& x, double h = 1e-5) {
  if (!(h > 0.0)) throw InvalidArgument("finite_diff_gradient: h must be positive");
  check_point_dims(inst, x, "finite_diff_gradient");
  Matrix g(x.rows(), x.cols());
  Matrix probe = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double orig = probe.data()[k];
    probe.data()[k] = orig + h;
    const double up = energy_relaxed(inst, probe);
    probe.data()[k] = orig - h;
    const double down = energy_relaxed(inst, probe);
    probe.data()[k] = orig;
    g.data()[k] = (up - down) / (2.0 * h);
  }
  return g;
}

/// Rounding guarantees for x against the exhaustive optimum:
/// E* <= E(round(x)) always, and when x globally minimizes E + r over X,
/// E(round_bcd(x)) <= E* + M - m and E(round_nearest(x)) <= E* + M - m + C.
struct TightnessReport {
  double e_star = 0.0;
  double e_relaxed = 0.0;
  double e_rounded_nearest = 0.0;
  double e_rounded_bcd = 0.0;
  double bound_nearest = 0.0;
  double bound_bcd = 0.0;
  bool lower_holds = false;
  bool certified = false;
  /// Only meaningful when certified.
  bool upper_holds = false;
};

inline TightnessReport tightness_report(const CrfInstance& inst, const Matrix& x, const Regularizer& reg,
                                        bool certified_global_min = false, double tol = 1e-9) {
  check_point_dims(inst, x, "tightness_report");
  const OracleReport oracle = brute_force_map(inst);
  const RegularizerBounds rb = regularizer_bounds(reg, inst.n(), inst.d());
  TightnessReport t;
  t.e_star = oracle.optimal_energy;
  t.e_relaxed = energy_relaxed(inst, x);
  t.e_rounded_nearest = energy_discrete(inst, round_nearest(x));
  t.e_rounded_bcd = energy_discrete(inst, round_bcd(inst, x));
  t.bound_bcd = t.e_star + rb.M - rb.m;
  t.bound_nearest = t.bound_bcd + rounding_constant(inst);
  t.lower_holds = t.e_rounded_nearest >= t.e_star - tol && t.e_rounded_bcd >= t.e_star - tol;
  t.certified = certified_global_min;
  if (certified_global_min) {
    t.upper_holds = t.e_rounded_bcd <= t.bound_bcd + tol && t.e_rounded_nearest <= t.bound_nearest + tol;
  }
  return t;
}

inline constexpr std::size_t kVertexSamples = 1000;

/// True iff r takes a single value (spread <= tol) on the vertices of X:
/// all of them when n * d <= 16, otherwise kVertexSamples random ones.
template <class RegFn>
  requires std::invocable<RegFn&, const Matrix&>
bool vertex_regularizer_constancy(RegFn&& r, std::size_t n, std::size_t d, std::uint64_t seed = 1,
                                  double tol = 1e-12) {
  if (n == 0 || d == 0) throw InvalidArgument("vertex_regularizer_constancy: n and d must be positive");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  auto visit = [&](const Labeling& s) {
    const double v = r(one_hot(s, d));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  };
  if (n * d <= 16) {
    for_each_labeling(n, d, visit);
  } else {
    Rng rng(seed);
    Labeling s{std::vector<std::size_t>(n)};
    for (std::size_t t = 0; t < kVertexSamples; ++t) {
      for (std::size_t i = 0; i < n; ++i) s[i] = static_cast<std::size_t>(rng.below(d));
      visit(s);
    }
  }
  return std::isfinite(lo) && std::isfinite(hi) && hi - lo <= tol;
}

inline bool vertex_regularizer_constancy(const Regularizer& reg, std::size_t n, std::size_t d) {
  return vertex_regularizer_constancy([&reg](const Matrix& x) { return regularizer_value(reg, x); }, n, d);
}

/// Aggregate form of the per-step bound F_k - F_{k+1} >= omega S_k:
/// min_{i<=k} S_i <= delta0_hat / (omega (k + 1)) for every k, with
/// delta0_hat = F_0 - min_i F_i. Each step may miss its bound by `slack`.
struct TrendReport {
  bool holds = true;
  int first_failure = -1;
  double delta0_hat = 0.0;
};

inline TrendReport sublinear_trend(const IterationTrace& trace, double omega, double slack = kDecreaseBoundSlack) {
  if (!(omega > 0.0)) throw InvalidArgument("sublinear_trend: omega must be positive");
  TrendReport rep;
  double lowest = trace.initial_e_reg;
  for (const auto& r : trace.records) lowest = std::min(lowest, r.e_reg);
  rep.delta0_hat = trace.initial_e_reg - lowest;
  double min_s = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < trace.records.size(); ++k) {
    const auto& r = trace.records[k];
    if (!r.s_k) throw InvalidArgument("sublinear_trend: trace has no S_k column");
    min_s = std::min(min_s, *r.s_k);
    const auto kk = static_cast<double>(k + 1);
    if (min_s > (rep.delta0_hat + kk * slack) / (omega * kk)) {
      rep.holds = false;
      rep.first_failure = static_cast<int>(k);
      break;
    }
  }
  return rep;
}

}  // namespace crffw
