#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>

#include "crffw/types.hpp"

namespace crffw {

/// Rule producing alpha_k in [0, 1].
struct StepsizeSchedule {
  enum class Kind {
    Constant,          ///< alpha
    ConstantLength,    ///< alpha / ||p - x||
    Harmonic,          ///< 2 / (k + 2)
    PaperDiminishing,  ///< k / (k + 2)
    InvSqrt,           ///< min(1, 1 / sqrt(k + 1))
    Adaptive,          ///< minimizer of the quadratic upper model
    LineSearch,        ///< argmin of F on the segment
  };

  Kind kind = Kind::Constant;
  double alpha = 1.0;
  /// Adaptive only. Unset values are filled in by the solver from the
  /// instance (L_f = spectral-norm bound, sigma_g = lambda).
  std::optional<double> lipschitz;
  std::optional<double> sigma;

  static StepsizeSchedule constant(double a) {
    if (!(a > 0.0 && a <= 1.0)) throw InvalidArgument("Constant stepsize must lie in (0, 1]");
    return {Kind::Constant, a, {}, {}};
  }
  static StepsizeSchedule constant_length(double a) {
    if (!(a > 0.0) || !std::isfinite(a)) throw InvalidArgument("ConstantLength stepsize must be positive");
    return {Kind::ConstantLength, a, {}, {}};
  }
  static StepsizeSchedule harmonic() { return {Kind::Harmonic, 0.0, {}, {}}; }
  static StepsizeSchedule paper_diminishing() { return {Kind::PaperDiminishing, 0.0, {}, {}}; }
  static StepsizeSchedule inv_sqrt() { return {Kind::InvSqrt, 0.0, {}, {}}; }
  static StepsizeSchedule adaptive(std::optional<double> lipschitz = {}, std::optional<double> sigma = {}) {
    if (lipschitz && !(*lipschitz >= 0.0)) throw InvalidArgument("Adaptive: L_f must be nonnegative");
    if (sigma && !(*sigma >= 0.0)) throw InvalidArgument("Adaptive: sigma_g must be nonnegative");
    return {Kind::Adaptive, 0.0, lipschitz, sigma};
  }
  static StepsizeSchedule line_search() { return {Kind::LineSearch, 0.0, {}, {}}; }

  /// Schedules that do not need S(x) or the objective along the segment.
  bool is_open_loop() const {
    return kind == Kind::Constant || kind == Kind::Harmonic || kind == Kind::PaperDiminishing ||
           kind == Kind::InvSqrt;
  }
  bool is_diminishing() const {
    return kind == Kind::Harmonic || kind == Kind::PaperDiminishing || kind == Kind::InvSqrt;
  }

  std::string name() const {
    switch (kind) {
      case Kind::Constant: return "constant:" + format_number(alpha);
      case Kind::ConstantLength: return "length:" + format_number(alpha);
      case Kind::Harmonic: return "harmonic";
      case Kind::PaperDiminishing: return "diminishing";
      case Kind::InvSqrt: return "invsqrt";
      case Kind::Adaptive: return "adaptive";
      case Kind::LineSearch: return "linesearch";
    }
    return "?";
  }

 private:
  static std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
  }
};

/// F(x + a D) - F(x) = slope * a + curvature * a^2 / 2 + extra(a) - extra(0).
/// Without `extra` the segment objective is quadratic and minimized in
/// closed form.
struct SegmentModel {
  double slope = 0.0;
  double curvature = 0.0;
  std::function<double(double)> extra;

  double operator()(double a) const {
    double v = slope * a + 0.5 * curvature * a * a;
    if (extra) v += extra(a);
    return v;
  }
};

struct StepState {
  double cond_grad_norm = 0.0;  ///< S(x^k)
  double step_sq = 0.0;         ///< ||p^k - x^k||^2
  const SegmentModel* segment = nullptr;
};

inline constexpr int kLineSearchGrid = 129;

/// argmin over [0, 1] of the segment objective. Quadratic case: closed form.
/// Otherwise a 129-point grid followed by golden-section refinement (to an
/// interval width of 1e-10) around the best grid point.
inline double line_search(const SegmentModel& seg) {
  if (!seg.extra) {
    const double a = seg.curvature;
    const double b = seg.slope;
    if (a > 0.0) return std::clamp(-b / a, 0.0, 1.0);
    return (b + 0.5 * a < 0.0) ? 1.0 : 0.0;
  }
  const int last = kLineSearchGrid - 1;
  int best = 0;
  double best_val = seg(0.0);
  for (int i = 1; i <= last; ++i) {
    const double v = seg(static_cast<double>(i) / last);
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }
  double lo = static_cast<double>(std::max(best - 1, 0)) / last;
  double hi = static_cast<double>(std::min(best + 1, last)) / last;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - inv_phi * (hi - lo);
  double d = lo + inv_phi * (hi - lo);
  double fc = seg(c);
  double fd = seg(d);
  while (hi - lo > 1e-10) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - inv_phi * (hi - lo);
      fc = seg(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + inv_phi * (hi - lo);
      fd = seg(d);
    }
  }
  const double mid = 0.5 * (lo + hi);
  const double best_alpha = static_cast<double>(best) / last;
  return seg(mid) < best_val ? mid : best_alpha;
}

/// alpha_k for the given schedule, clamped to [0, 1].
inline double stepsize(const StepsizeSchedule& schedule, int k, const StepState& state) {
  const auto kk = static_cast<double>(k);
  double a = 1.0;
  switch (schedule.kind) {
    case StepsizeSchedule::Kind::Constant: a = schedule.alpha; break;
    case StepsizeSchedule::Kind::ConstantLength:
      a = state.step_sq > 0.0 ? schedule.alpha / std::sqrt(state.step_sq) : 1.0;
      break;
    case StepsizeSchedule::Kind::Harmonic: a = 2.0 / (kk + 2.0); break;
    case StepsizeSchedule::Kind::PaperDiminishing: a = kk / (kk + 2.0); break;
    case StepsizeSchedule::Kind::InvSqrt: a = 1.0 / std::sqrt(kk + 1.0); break;
    case StepsizeSchedule::Kind::Adaptive: {
      if (!schedule.lipschitz || !schedule.sigma) {
        throw InvalidArgument("stepsize: adaptive schedule needs L_f and sigma_g");
      }
      const double denom = *schedule.lipschitz + *schedule.sigma;
      if (state.step_sq <= 0.0 || denom <= 0.0) {
        a = 1.0;
      } else {
        a = (state.cond_grad_norm / state.step_sq + 0.5 * *schedule.sigma) / denom;
      }
      break;
    }
    case StepsizeSchedule::Kind::LineSearch:
      if (state.segment == nullptr) throw InvalidArgument("stepsize: line search needs a segment model");
      a = line_search(*state.segment);
      break;
  }
  if (std::isnan(a)) a = 0.0;
  return std::clamp(a, 0.0, 1.0);
}

}  // namespace crffw
