#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "crffw/schedule.hpp"
#include "crffw/types.hpp"

namespace crffw {

/// Constants of the generalized Frank-Wolfe convergence analysis.
/// Omega is the diameter of the product of n simplices, sqrt(2n): each
/// node contributes at most sqrt(2) (distance between two vertices).
struct ConvergenceParams {
  double lipschitz = 0.0;   ///< L_f, semi-concavity (smoothness) constant of f
  double sigma = 0.0;       ///< sigma_g, strong-convexity constant of g
  double omega = 0.0;       ///< sigma_g / (L_f + sigma_g)
  double diameter = 0.0;    ///< Omega
  double delta0_hat = 0.0;  ///< F_0 - min observed F, stand-in for F_0 - F*
};

inline ConvergenceParams make_convergence_params(double lipschitz, double sigma, std::size_t n,
                                                 double delta0_hat = 0.0) {
  if (!(lipschitz >= 0.0) || !(sigma >= 0.0)) throw InvalidArgument("ConvergenceParams: constants must be >= 0");
  if (n == 0) throw InvalidArgument("ConvergenceParams: n must be positive");
  ConvergenceParams p;
  p.lipschitz = lipschitz;
  p.sigma = sigma;
  p.omega = (lipschitz + sigma > 0.0) ? sigma / (lipschitz + sigma) : 0.0;
  p.diameter = std::sqrt(2.0 * static_cast<double>(n));
  p.delta0_hat = delta0_hat;
  return p;
}

enum class BoundRow { ConvexG, StronglyConvexG, ConcaveF };

inline BoundRow bound_row(const ConvergenceParams& p) {
  if (p.sigma > 0.0) return BoundRow::StronglyConvexG;
  if (p.lipschitz == 0.0) return BoundRow::ConcaveF;
  return BoundRow::ConvexG;
}

/// K(alpha) = ((L_f + sigma_g) alpha^2 - sigma_g alpha) / 2.
inline double quadratic_slack(const ConvergenceParams& p, double alpha) {
  return 0.5 * ((p.lipschitz + p.sigma) * alpha * alpha - p.sigma * alpha);
}

/// Lower bound delta_k on F_k - F_{k+1} for one step of generalized
/// Frank-Wolfe, by (g convexity class) x (stepsize rule). Rows whose bound
/// can go negative keep their slack term.
inline double decrease_bound(const ConvergenceParams& p, const StepsizeSchedule& schedule, int k, double cond_grad_norm,
                             double step_sq) {
  if (!(p.lipschitz >= 0.0) || !(p.sigma >= 0.0) || !std::isfinite(cond_grad_norm)) {
    throw InvalidArgument("decrease_bound: invalid parameters");
  }
  using K = StepsizeSchedule::Kind;
  const double S = cond_grad_norm;
  const double L = p.lipschitz;
  const double sigma = p.sigma;
  const double omega_sq = p.diameter * p.diameter;
  const BoundRow row = bound_row(p);

  if (schedule.kind == K::Adaptive || schedule.kind == K::LineSearch) {
    switch (row) {
      case BoundRow::StronglyConvexG: return p.omega * S;
      case BoundRow::ConcaveF: return S;
      case BoundRow::ConvexG: return 0.5 * std::min(S, S * S / (L * omega_sq));
    }
  }

  if (schedule.kind == K::ConstantLength) {
    if (!(p.diameter > 0.0)) throw InvalidArgument("decrease_bound: constant step length needs a positive diameter");
    const double a = schedule.alpha;
    switch (row) {
      case BoundRow::StronglyConvexG: return a * std::sqrt(2.0 * sigma * std::max(S, 0.0)) - 0.5 * (L + sigma) * a * a;
      case BoundRow::ConcaveF: return a / p.diameter * S;
      case BoundRow::ConvexG: return a / p.diameter * S - 0.5 * L * a * a;
    }
  }

  const double a = stepsize(schedule, k, StepState{S, step_sq, nullptr});
  switch (row) {
    case BoundRow::StronglyConvexG:
      if (schedule.kind == K::Constant && a >= 2.0 * p.omega) return a * S - quadratic_slack(p, a) * omega_sq;
      return a * std::min(1.0, 2.0 - a / p.omega) * S;
    case BoundRow::ConcaveF: return a * S;
    case BoundRow::ConvexG: return a * S - 0.5 * L * omega_sq * a * a;
  }
  throw InvalidArgument("decrease_bound: unsupported combination");
}

}  // namespace crffw
