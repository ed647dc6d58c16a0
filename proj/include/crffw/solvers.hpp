#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "crffw/bounds.hpp"
#include "crffw/model.hpp"
#include "crffw/regularizer.hpp"
#include "crffw/schedule.hpp"
#include "crffw/simplex.hpp"
#include "crffw/types.hpp"

namespace crffw {

struct SolverMethod {
  enum class Kind { VanillaFW, ConvexFW, L2FW, EntropicFW, MeanField, DampedMeanField, PGD, FastPGM, EMD, ADMM };

  Kind kind = Kind::VanillaFW;
  /// Damping alpha for DampedMeanField, penalty rho for ADMM.
  double param = 0.0;

  static SolverMethod vanilla_fw() { return {Kind::VanillaFW, 0.0}; }
  static SolverMethod convex_fw() { return {Kind::ConvexFW, 0.0}; }
  static SolverMethod l2_fw() { return {Kind::L2FW, 0.0}; }
  static SolverMethod entropic_fw() { return {Kind::EntropicFW, 0.0}; }
  static SolverMethod mean_field() { return {Kind::MeanField, 0.0}; }
  static SolverMethod damped_mean_field(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("DampedMeanField: alpha must lie in (0, 1]");
    return {Kind::DampedMeanField, alpha};
  }
  static SolverMethod pgd() { return {Kind::PGD, 0.0}; }
  static SolverMethod fast_pgm() { return {Kind::FastPGM, 0.0}; }
  static SolverMethod emd() { return {Kind::EMD, 0.0}; }
  static SolverMethod admm(double rho = 1.0) {
    if (!(rho > 0.0) || !std::isfinite(rho)) throw InvalidArgument("ADMM: rho must be positive");
    return {Kind::ADMM, rho};
  }

  /// Methods run by the generalized Frank-Wolfe loop.
  bool is_frank_wolfe() const {
    return kind == Kind::VanillaFW || kind == Kind::ConvexFW || kind == Kind::L2FW || kind == Kind::EntropicFW ||
           kind == Kind::MeanField || kind == Kind::DampedMeanField;
  }

  /// Short name used on the command line and in reports.
  std::string name() const {
    switch (kind) {
      case Kind::VanillaFW: return "fw";
      case Kind::ConvexFW: return "cfw";
      case Kind::L2FW: return "l2fw";
      case Kind::EntropicFW: return "efw";
      case Kind::MeanField: return "mf";
      case Kind::DampedMeanField: return "dmf";
      case Kind::PGD: return "pgd";
      case Kind::FastPGM: return "pgm";
      case Kind::EMD: return "emd";
      case Kind::ADMM: return "admm";
    }
    return "?";
  }

  bool operator==(const SolverMethod&) const = default;
};

struct SolverConfig {
  SolverMethod method;
  Regularizer regularizer;
  StepsizeSchedule schedule = StepsizeSchedule::constant(1.0);
  int max_iters = 20;
  bool record_discrete_energy = true;
  bool decrease_bound_check = false;
  /// Keep a copy of every iterate in the trace (tests and diagnostics).
  bool record_iterates = false;
};

struct IterationRecord {
  int k = 0;
  double alpha = std::numeric_limits<double>::quiet_NaN();  ///< NaN for ADMM half-steps
  double e_cont = 0.0;                  ///< E(x^{k+1})
  double e_reg = 0.0;                   ///< F(x^{k+1}), the objective the solver minimizes
  std::optional<double> e_disc;         ///< E(round_nearest(x^{k+1}))
  std::optional<double> s_k;            ///< S(x^k), Frank-Wolfe family only
  double step_norm = 0.0;               ///< ||x^{k+1} - x^k||
  std::optional<double> bound_delta;    ///< delta_k
  std::optional<bool> bound_held;       ///< F_k - F_{k+1} >= delta_k - 1e-7
  double time_ms = 0.0;                 ///< wall time since the start of the run
};

/// Per-iteration history. Record k describes the step from x^k to x^{k+1}.
struct IterationTrace {
  std::string method;
  double initial_e_cont = 0.0;
  double initial_e_reg = 0.0;
  std::optional<double> initial_e_disc;
  std::optional<ConvergenceParams> params;
  std::vector<IterationRecord> records;
  /// x^0, x^1, ... when SolverConfig::record_iterates is set.
  std::vector<Matrix> iterates;

  std::size_t size() const { return records.size(); }

  std::size_t bound_violations() const {
    std::size_t v = 0;
    for (const auto& r : records) {
      if (r.bound_held && !*r.bound_held) ++v;
    }
    return v;
  }
};

inline constexpr double kDecreaseBoundSlack = 1e-7;

class DivergedError : public std::runtime_error {
 public:
  DivergedError(const std::string& what, IterationTrace trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const IterationTrace& trace() const { return trace_; }

 private:
  IterationTrace trace_;
};

struct SolveResult {
  RelaxedPoint x;
  IterationTrace trace;
};

// ---------------------------------------------------------------------------
// Direction oracles
// ---------------------------------------------------------------------------

/// x^0 = softmax(-u).
inline RelaxedPoint initial_point(const CrfInstance& inst) { return softmax_rows(-inst.unary()); }

/// argmin over X of <grad, p>: per-node one-hot at the smallest gradient
/// entry (lowest index on ties).
inline RelaxedPoint lmo_vanilla(const Matrix& grad) {
  if (!grad.allFinite()) throw InvalidArgument("lmo_vanilla: non-finite gradient");
  Matrix p = Matrix::Zero(grad.rows(), grad.cols());
  for (Eigen::Index i = 0; i < grad.rows(); ++i) p(i, static_cast<Eigen::Index>(argmin_lowest(grad.row(i)))) = 1.0;
  return RelaxedPoint::unchecked(std::move(p));
}

/// argmin over p of <grad, p> + r(p) with p in X.
inline RelaxedPoint regularized_direction(const Matrix& grad, const Regularizer& reg) {
  switch (reg.kind) {
    case Regularizer::Kind::L2: return project_feasible((-1.0 / reg.lambda) * grad);
    case Regularizer::Kind::Entropy: return softmax_rows((-1.0 / reg.lambda) * grad);
    default: return lmo_vanilla(grad);
  }
}

inline RelaxedPoint direction_l2fw(const CrfInstance& inst, const Matrix& x, double lambda) {
  return regularized_direction(gradient(inst, x), Regularizer::l2(lambda));
}

inline RelaxedPoint direction_efw(const CrfInstance& inst, const Matrix& x, double lambda) {
  return regularized_direction(gradient(inst, x), Regularizer::entropy(lambda));
}

/// S(x) = <grad f(x), x - p> + r(x) - r(p) for the direction p given.
inline double conditional_gradient_norm(const Matrix& grad, const Matrix& x, const Matrix& p, const Regularizer& reg) {
  return grad.cwiseProduct(x - p).sum() + regularizer_value(reg, x) - regularizer_value(reg, p);
}

/// S(x) with f = E and g = r + indicator of X; p_x from the matching oracle.
inline double conditional_gradient_norm(const CrfInstance& inst, const Matrix& x, const Regularizer& reg) {
  const Matrix g = gradient(inst, x);
  const RelaxedPoint p = regularized_direction(g, reg);
  return conditional_gradient_norm(g, x, p, reg);
}

/// Convex QP reformulation: with c = P 1 / 2, E'(x) = 1/2 x^T (2 diag(c) + P) x
/// + (u - c)^T x agrees with E on every vertex of X and is convex when the
/// pairwise potentials are nonnegative.
inline CrfInstance convexify(const CrfInstance& inst) {
  const Matrix ones = Matrix::Ones(static_cast<Eigen::Index>(inst.n()), static_cast<Eigen::Index>(inst.d()));
  const Matrix c = 0.5 * pairwise_matvec(inst.pairwise(), ones);
  Matrix diag = 2.0 * c;
  if (inst.has_diagonal()) diag += inst.diagonal();
  return CrfInstance(inst.unary() - c, inst.pairwise(), std::move(diag));
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

namespace detail {

inline SolverConfig resolve(const SolverConfig& in) {
  using K = SolverMethod::Kind;
  SolverConfig c = in;
  if (c.max_iters < 1) throw InvalidArgument("SolverConfig: max_iters must be positive");
  switch (c.method.kind) {
    case K::VanillaFW:
    case K::ConvexFW:
    case K::PGD:
    case K::FastPGM:
    case K::EMD:
    case K::ADMM: c.regularizer = Regularizer::none(); break;
    case K::L2FW:
      if (c.regularizer.kind != Regularizer::Kind::L2) throw InvalidArgument("L2FW requires an L2 regularizer");
      break;
    case K::EntropicFW:
      if (c.regularizer.kind != Regularizer::Kind::Entropy) {
        throw InvalidArgument("EntropicFW requires an entropy regularizer");
      }
      break;
    case K::MeanField:
      c.regularizer = Regularizer::entropy(1.0);
      c.schedule = StepsizeSchedule::constant(1.0);
      break;
    case K::DampedMeanField:
      c.regularizer = Regularizer::entropy(1.0);
      c.schedule = StepsizeSchedule::constant(c.method.param);
      break;
  }
  if (!c.regularizer.is_none() && !(c.regularizer.lambda > 0.0)) {
    throw InvalidArgument("SolverConfig: regularizer weight must be positive");
  }
  const auto sk = c.schedule.kind;
  switch (c.method.kind) {
    case K::PGD:
      if (!c.schedule.is_open_loop() && sk != StepsizeSchedule::Kind::LineSearch) {
        throw InvalidArgument("PGD supports constant, diminishing or line-search stepsizes");
      }
      break;
    case K::FastPGM:
    case K::EMD:
      if (!c.schedule.is_open_loop()) {
        throw InvalidArgument(c.method.name() + " supports constant or diminishing stepsizes only");
      }
      break;
    case K::ADMM:
      if (!(c.method.param > 0.0)) throw InvalidArgument("ADMM: rho must be positive");
      break;
    default: break;
  }
  return c;
}

/// Shared bookkeeping for all solvers.
class TraceBuilder {
 public:
  TraceBuilder(const CrfInstance& inst, const SolverConfig& cfg) : inst_(inst), cfg_(cfg) {
    trace_.method = cfg.method.name();
  }

  void start(const Matrix& x0, double e_cont, double f0) {
    trace_.initial_e_cont = e_cont;
    trace_.initial_e_reg = f0;
    if (cfg_.record_discrete_energy) trace_.initial_e_disc = energy_discrete(inst_, round_nearest(x0));
    if (cfg_.record_iterates) trace_.iterates.push_back(x0);
    started_ = std::chrono::steady_clock::now();
  }

  IterationRecord& add(int k, double alpha, const Matrix& x_old, const Matrix& x_new, double e_cont, double f_new) {
    IterationRecord r;
    r.k = k;
    r.alpha = alpha;
    r.e_cont = e_cont;
    r.e_reg = f_new;
    r.step_norm = (x_new - x_old).norm();
    if (cfg_.record_discrete_energy) r.e_disc = energy_discrete(inst_, round_nearest(x_new));
    r.time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started_).count();
    trace_.records.push_back(r);
    if (cfg_.record_iterates) trace_.iterates.push_back(x_new);
    if (!std::isfinite(e_cont) || !std::isfinite(f_new) || !x_new.allFinite()) {
      throw DivergedError(cfg_.method.name() + ": non-finite iterate at k = " + std::to_string(k), trace_);
    }
    return trace_.records.back();
  }

  void set_params(const ConvergenceParams& p) { trace_.params = p; }

  /// Sets delta0_hat = F_0 - min_k F_k once the run is complete.
  void finish() {
    if (!trace_.params) return;
    double lowest = trace_.initial_e_reg;
    for (const auto& r : trace_.records) lowest = std::min(lowest, r.e_reg);
    trace_.params->delta0_hat = trace_.initial_e_reg - lowest;
  }
  IterationTrace& trace() { return trace_; }

 private:
  const CrfInstance& inst_;
  const SolverConfig& cfg_;
  IterationTrace trace_;
  std::chrono::steady_clock::time_point started_ = std::chrono::steady_clock::now();
};

inline void check_initial(const std::string& name, double e, const Matrix& x) {
  if (!std::isfinite(e) || !x.allFinite()) {
    throw DivergedError(name + ": non-finite initial point", IterationTrace{});
  }
}

/// One update step x + alpha (p - x); alpha = 1 returns p exactly.
inline Matrix convex_step(const Matrix& x, const Matrix& p, double alpha) {
  if (alpha == 1.0) return p;
  return x + alpha * (p - x);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Generalized (regularized) Frank-Wolfe
// ---------------------------------------------------------------------------

/// Minimizes F = E + r over X by x^{k+1} = x^k + alpha_k (p^k - x^k), with p^k
/// minimizing <grad E(x^k), p> + r(p) over X. Covers vanilla, convex,
/// Euclidean and entropic Frank-Wolfe and (damped) mean field.
inline SolveResult run_generalized_fw(const CrfInstance& inst, const SolverConfig& config) {
  SolverConfig cfg = detail::resolve(config);
  if (!cfg.method.is_frank_wolfe()) throw InvalidArgument("run_generalized_fw: not a Frank-Wolfe method");
  const bool convex = cfg.method.kind == SolverMethod::Kind::ConvexFW;
  const CrfInstance objective = convex ? convexify(inst) : inst;
  const Regularizer reg = cfg.regularizer;

  const double lipschitz = lipschitz_upper_bound(objective);
  if (cfg.schedule.kind == StepsizeSchedule::Kind::Adaptive) {
    if (!cfg.schedule.lipschitz) cfg.schedule.lipschitz = lipschitz;
    if (!cfg.schedule.sigma) cfg.schedule.sigma = reg.strong_convexity();
  }
  const ConvergenceParams params = make_convergence_params(lipschitz, reg.strong_convexity(), inst.n());

  detail::TraceBuilder tb(inst, cfg);
  tb.set_params(params);
  Matrix x = initial_point(inst).values();
  EnergyGrad eg = energy_and_gradient(objective, x);
  double f = eg.energy + regularizer_value(reg, x);
  detail::check_initial(cfg.method.name(), f, x);
  tb.start(x, convex ? energy_relaxed(inst, x) : eg.energy, f);

  for (int k = 0; k < cfg.max_iters; ++k) {
    const RelaxedPoint p = regularized_direction(eg.grad, reg);
    const Matrix dir = p.values() - x;
    const double step_sq = dir.squaredNorm();
    const double s = conditional_gradient_norm(eg.grad, x, p, reg);

    SegmentModel seg;
    StepState state{s, step_sq, nullptr};
    if (cfg.schedule.kind == StepsizeSchedule::Kind::LineSearch) {
      seg.slope = eg.grad.cwiseProduct(dir).sum();
      seg.curvature = dir.cwiseProduct(objective.quadratic_matvec(dir)).sum();
      if (!reg.is_none()) {
        seg.extra = [&x, &dir, &reg](double a) { return regularizer_value(reg, x + a * dir); };
      }
      state.segment = &seg;
    }
    const double alpha = stepsize(cfg.schedule, k, state);

    Matrix x_new = detail::convex_step(x, p.values(), alpha);
    EnergyGrad eg_new = energy_and_gradient(objective, x_new);
    const double f_new = eg_new.energy + regularizer_value(reg, x_new);
    const double e_cont = convex ? energy_relaxed(inst, x_new) : eg_new.energy;

    IterationRecord& rec = tb.add(k, alpha, x, x_new, e_cont, f_new);
    rec.s_k = s;
    if (cfg.decrease_bound_check) {
      const double delta = decrease_bound(params, cfg.schedule, k, s, step_sq);
      rec.bound_delta = delta;
      rec.bound_held = (f - f_new) >= delta - kDecreaseBoundSlack;
    }
    x = std::move(x_new);
    eg = std::move(eg_new);
    f = f_new;
  }
  tb.finish();
  return {RelaxedPoint::unchecked(std::move(x)), std::move(tb.trace())};
}

/// Parallel mean field x <- softmax(-Px - u), optionally damped:
/// x <- x + damping (softmax(-Px - u) - x). Written directly rather than
/// through run_generalized_fw; the trace carries the same columns as
/// entropic Frank-Wolfe with lambda = 1.
inline SolveResult mean_field_run(const CrfInstance& inst, int iters, double damping = 1.0,
                                  bool decrease_bound_check = false, bool record_iterates = false) {
  if (iters < 0) throw InvalidArgument("mean_field_run: iters must be >= 0");
  if (!(damping > 0.0 && damping <= 1.0)) throw InvalidArgument("mean_field_run: damping must lie in (0, 1]");
  SolverConfig cfg;
  cfg.method = damping == 1.0 ? SolverMethod::mean_field() : SolverMethod::damped_mean_field(damping);
  cfg.regularizer = Regularizer::entropy(1.0);
  cfg.schedule = StepsizeSchedule::constant(damping);
  cfg.decrease_bound_check = decrease_bound_check;
  cfg.record_iterates = record_iterates;
  const Regularizer& reg = cfg.regularizer;

  const ConvergenceParams params = make_convergence_params(lipschitz_upper_bound(inst), 1.0, inst.n());
  detail::TraceBuilder tb(inst, cfg);
  tb.set_params(params);
  Matrix x = softmax_rows(-inst.unary()).values();
  Matrix field = inst.quadratic_matvec(x);
  double e = 0.5 * x.cwiseProduct(field).sum() + x.cwiseProduct(inst.unary()).sum();
  double f = e + regularizer_value(reg, x);
  detail::check_initial(cfg.method.name(), f, x);
  tb.start(x, e, f);

  for (int k = 0; k < iters; ++k) {
    const Matrix grad = field + inst.unary();
    const Matrix q = softmax_rows(-grad).values();
    const double s = conditional_gradient_norm(grad, x, q, reg);
    const double step_sq = (q - x).squaredNorm();
    Matrix x_new = damping == 1.0 ? q : Matrix(x + damping * (q - x));
    Matrix field_new = inst.quadratic_matvec(x_new);
    const double e_new = 0.5 * x_new.cwiseProduct(field_new).sum() + x_new.cwiseProduct(inst.unary()).sum();
    const double f_new = e_new + regularizer_value(reg, x_new);
    IterationRecord& rec = tb.add(k, damping, x, x_new, e_new, f_new);
    rec.s_k = s;
    if (decrease_bound_check) {
      const double delta = decrease_bound(params, cfg.schedule, k, s, step_sq);
      rec.bound_delta = delta;
      rec.bound_held = (f - f_new) >= delta - kDecreaseBoundSlack;
    }
    x = std::move(x_new);
    field = std::move(field_new);
    f = f_new;
  }
  tb.finish();
  return {RelaxedPoint::unchecked(std::move(x)), std::move(tb.trace())};
}

// ---------------------------------------------------------------------------
// Comparison solvers
// ---------------------------------------------------------------------------

/// Projected gradient: p = Proj_X(x - grad E(x)), x <- x + alpha (p - x).
inline SolveResult pgd_run(const CrfInstance& inst, const SolverConfig& config) {
  const SolverConfig cfg = detail::resolve(config);
  if (cfg.method.kind != SolverMethod::Kind::PGD) throw InvalidArgument("pgd_run: method must be PGD");
  detail::TraceBuilder tb(inst, cfg);
  Matrix x = initial_point(inst).values();
  EnergyGrad eg = energy_and_gradient(inst, x);
  detail::check_initial("pgd", eg.energy, x);
  tb.start(x, eg.energy, eg.energy);

  for (int k = 0; k < cfg.max_iters; ++k) {
    const RelaxedPoint p = project_feasible(x - eg.grad);
    const Matrix dir = p.values() - x;
    SegmentModel seg;
    StepState state{0.0, dir.squaredNorm(), nullptr};
    if (cfg.schedule.kind == StepsizeSchedule::Kind::LineSearch) {
      seg.slope = eg.grad.cwiseProduct(dir).sum();
      seg.curvature = dir.cwiseProduct(inst.quadratic_matvec(dir)).sum();
      state.segment = &seg;
    }
    const double alpha = stepsize(cfg.schedule, k, state);
    Matrix x_new = detail::convex_step(x, p.values(), alpha);
    EnergyGrad eg_new = energy_and_gradient(inst, x_new);
    tb.add(k, alpha, x, x_new, eg_new.energy, eg_new.energy);
    x = std::move(x_new);
    eg = std::move(eg_new);
  }
  return {RelaxedPoint::unchecked(std::move(x)), std::move(tb.trace())};
}

/// Fast proximal gradient (FISTA) with y^0 = x^0 and t_0 = 1.
inline SolveResult fpgm_run(const CrfInstance& inst, const SolverConfig& config) {
  const SolverConfig cfg = detail::resolve(config);
  if (cfg.method.kind != SolverMethod::Kind::FastPGM) throw InvalidArgument("fpgm_run: method must be FastPGM");
  detail::TraceBuilder tb(inst, cfg);
  Matrix x = initial_point(inst).values();
  Matrix y = x;
  double t = 1.0;
  const double e0 = energy_relaxed(inst, x);
  detail::check_initial("pgm", e0, x);
  tb.start(x, e0, e0);

  for (int k = 0; k < cfg.max_iters; ++k) {
    const double alpha = stepsize(cfg.schedule, k, StepState{});
    const Matrix grad_y = gradient(inst, y);
    Matrix x_new = project_feasible(y - alpha * grad_y).values();
    const double t_new = (1.0 + std::sqrt(1.0 + 4.0 * t * t)) / 2.0;
    y = x_new + ((t - 1.0) / t_new) * (x_new - x);
    const double e = energy_relaxed(inst, x_new);
    tb.add(k, alpha, x, x_new, e, e);
    x = std::move(x_new);
    t = t_new;
  }
  return {RelaxedPoint::unchecked(std::move(x)), std::move(tb.trace())};
}

/// FISTA momentum sequence t_0 = 1, t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2.
inline double fista_momentum(int k) {
  double t = 1.0;
  for (int i = 0; i < k; ++i) t = (1.0 + std::sqrt(1.0 + 4.0 * t * t)) / 2.0;
  return t;
}

inline constexpr double kEmdEpsilon = 1e-10;

/// Entropic mirror descent, stabilized:
/// x_is <- (x_is + eps) exp(-alpha g_is + m_i) / Z_i with m_i = alpha min_s g_is.
inline SolveResult emd_run(const CrfInstance& inst, const SolverConfig& config) {
  const SolverConfig cfg = detail::resolve(config);
  if (cfg.method.kind != SolverMethod::Kind::EMD) throw InvalidArgument("emd_run: method must be EMD");
  detail::TraceBuilder tb(inst, cfg);
  Matrix x = initial_point(inst).values();
  EnergyGrad eg = energy_and_gradient(inst, x);
  detail::check_initial("emd", eg.energy, x);
  tb.start(x, eg.energy, eg.energy);

  for (int k = 0; k < cfg.max_iters; ++k) {
    const double alpha = stepsize(cfg.schedule, k, StepState{});
    Matrix x_new(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double shift = alpha * eg.grad.row(i).minCoeff();
      double z = 0.0;
      for (Eigen::Index s = 0; s < x.cols(); ++s) {
        const double v = (x(i, s) + kEmdEpsilon) * std::exp(-alpha * eg.grad(i, s) + shift);
        x_new(i, s) = v;
        z += v;
      }
      x_new.row(i) /= z;
    }
    EnergyGrad eg_new = energy_and_gradient(inst, x_new);
    tb.add(k, alpha, x, x_new, eg_new.energy, eg_new.energy);
    x = std::move(x_new);
    eg = std::move(eg_new);
  }
  return {RelaxedPoint::unchecked(std::move(x)), std::move(tb.trace())};
}

/// Nonconvex ADMM with z^0 = softmax(-u), y^0 = 0. The x- and z-updates are
/// recorded as separate trace entries, so max_iters counts half-iterations.
inline SolveResult admm_run(const CrfInstance& inst, const SolverConfig& config) {
  const SolverConfig cfg = detail::resolve(config);
  if (cfg.method.kind != SolverMethod::Kind::ADMM) throw InvalidArgument("admm_run: method must be ADMM");
  const double rho = cfg.method.param;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  detail::TraceBuilder tb(inst, cfg);
  Matrix z = initial_point(inst).values();
  Matrix y = Matrix::Zero(z.rows(), z.cols());
  Matrix pz = inst.quadratic_matvec(z);
  const double e0 = 0.5 * z.cwiseProduct(pz).sum() + z.cwiseProduct(inst.unary()).sum();
  detail::check_initial("admm", e0, z);
  tb.start(z, e0, e0);

  Matrix last = z;
  int k = 0;
  while (k < cfg.max_iters) {
    Matrix x = project_feasible(z - (1.0 / rho) * (y + 0.5 * pz + inst.unary())).values();
    const Matrix px = inst.quadratic_matvec(x);
    const double ex = 0.5 * x.cwiseProduct(px).sum() + x.cwiseProduct(inst.unary()).sum();
    tb.add(k++, nan, last, x, ex, ex);
    last = x;
    if (k >= cfg.max_iters) break;

    z = project_feasible(x - (1.0 / rho) * (-y + 0.5 * px)).values();
    y += rho * (x - z);
    pz = inst.quadratic_matvec(z);
    const double ez = 0.5 * z.cwiseProduct(pz).sum() + z.cwiseProduct(inst.unary()).sum();
    tb.add(k++, nan, last, z, ez, ez);
    last = z;
  }
  return {RelaxedPoint::unchecked(std::move(last)), std::move(tb.trace())};
}

/// Dispatches on config.method.
inline SolveResult solve(const CrfInstance& inst, const SolverConfig& config) {
  switch (config.method.kind) {
    case SolverMethod::Kind::PGD: return pgd_run(inst, config);
    case SolverMethod::Kind::FastPGM: return fpgm_run(inst, config);
    case SolverMethod::Kind::EMD: return emd_run(inst, config);
    case SolverMethod::Kind::ADMM: return admm_run(inst, config);
    default: return run_generalized_fw(inst, config);
  }
}

}  // namespace crffw
