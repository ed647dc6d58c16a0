#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "crffw/bounds.hpp"
#include "crffw/diagnostics.hpp"
#include "crffw/instances.hpp"
#include "crffw/model.hpp"
#include "crffw/random.hpp"
#include "crffw/regularizer.hpp"
#include "crffw/schedule.hpp"
#include "crffw/simplex.hpp"
#include "crffw/solvers.hpp"
#include "crffw/types.hpp"

namespace crffw::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// %.17g, enough digits to round-trip any double.
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Method and stepsize parsing
// ---------------------------------------------------------------------------

/// "constant:A", "length:A", "harmonic", "diminishing", "invsqrt",
/// "adaptive" or "linesearch".
inline StepsizeSchedule parse_stepsize(const std::string& text) {
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  auto value = [&]() {
    if (colon == std::string::npos) throw UsageError("stepsize '" + text + "' needs a value, e.g. " + head + ":0.5");
    const std::string v = text.substr(colon + 1);
    std::size_t pos = 0;
    double a = 0.0;
    try {
      a = std::stod(v, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != v.size() || v.empty()) throw UsageError("stepsize '" + text + "': bad number");
    return a;
  };
  try {
    if (head == "constant") return StepsizeSchedule::constant(value());
    if (head == "length") return StepsizeSchedule::constant_length(value());
    if (colon == std::string::npos) {
      if (head == "harmonic") return StepsizeSchedule::harmonic();
      if (head == "diminishing") return StepsizeSchedule::paper_diminishing();
      if (head == "invsqrt") return StepsizeSchedule::inv_sqrt();
      if (head == "adaptive") return StepsizeSchedule::adaptive();
      if (head == "linesearch") return StepsizeSchedule::line_search();
    }
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  throw UsageError("unknown stepsize '" + text + "'");
}

inline const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names = {"mf", "dmf", "fw", "cfw", "l2fw", "efw", "pgd", "pgm", "emd", "admm"};
  return names;
}

/// A fully resolved solver choice plus a display label.
struct MethodSpec {
  std::string label;
  SolverMethod method;
  Regularizer regularizer;
  StepsizeSchedule schedule;
};

inline constexpr double kDefaultDamping = 0.5;

/// Builds a MethodSpec from a method name and optional lambda / stepsize.
/// Defaults: line search for fw, cfw, l2fw and efw; constant:1 for pgd, pgm
/// and emd; lambda = 1 for l2fw and efw; damping 0.5 for dmf.
inline MethodSpec make_method(const std::string& name, std::optional<double> lambda = {},
                              const std::optional<std::string>& stepsize = {}, double rho = 1.0) {
  if (lambda && !(*lambda > 0.0 && std::isfinite(*lambda))) throw UsageError("--lambda must be positive");
  MethodSpec m;
  std::optional<StepsizeSchedule> sched;
  if (stepsize) sched = parse_stepsize(*stepsize);
  const double lam = lambda.value_or(1.0);
  if (name == "mf") {
    if (sched && !(sched->kind == StepsizeSchedule::Kind::Constant && sched->alpha == 1.0)) {
      throw UsageError("mf uses a unit stepsize; use dmf for damping");
    }
    m.method = SolverMethod::mean_field();
    m.regularizer = Regularizer::entropy(1.0);
    m.schedule = StepsizeSchedule::constant(1.0);
  } else if (name == "dmf") {
    double a = kDefaultDamping;
    if (sched) {
      if (sched->kind != StepsizeSchedule::Kind::Constant) throw UsageError("dmf takes a constant stepsize");
      a = sched->alpha;
    }
    m.method = SolverMethod::damped_mean_field(a);
    m.regularizer = Regularizer::entropy(1.0);
    m.schedule = StepsizeSchedule::constant(a);
  } else if (name == "fw" || name == "cfw" || name == "l2fw" || name == "efw") {
    m.method = name == "fw"     ? SolverMethod::vanilla_fw()
               : name == "cfw"  ? SolverMethod::convex_fw()
               : name == "l2fw" ? SolverMethod::l2_fw()
                                : SolverMethod::entropic_fw();
    if (name == "l2fw") m.regularizer = Regularizer::l2(lam);
    if (name == "efw") m.regularizer = Regularizer::entropy(lam);
    m.schedule = sched.value_or(StepsizeSchedule::line_search());
  } else if (name == "pgd" || name == "pgm" || name == "emd") {
    m.method = name == "pgd" ? SolverMethod::pgd() : name == "pgm" ? SolverMethod::fast_pgm() : SolverMethod::emd();
    m.schedule = sched.value_or(StepsizeSchedule::constant(1.0));
    const bool ok = m.schedule.is_open_loop() ||
                    (name == "pgd" && m.schedule.kind == StepsizeSchedule::Kind::LineSearch);
    if (!ok) throw UsageError(name + " does not support stepsize " + m.schedule.name());
  } else if (name == "admm") {
    if (!(rho > 0.0)) throw UsageError("--rho must be positive");
    m.method = SolverMethod::admm(rho);
    m.schedule = StepsizeSchedule::constant(1.0);
  } else {
    throw UsageError("unknown method '" + name + "'");
  }
  m.label = name;
  if (!m.regularizer.is_none() && (name == "l2fw" || name == "efw")) m.label += ":" + fmt_short(m.regularizer.lambda);
  if (stepsize) m.label += "@" + m.schedule.name();
  return m;
}

/// "method[:lambda][@stepsize]", e.g. "efw:0.25@constant:1".
inline MethodSpec parse_method_token(const std::string& token) {
  const auto at = token.find('@');
  const std::string head = token.substr(0, at);
  std::optional<std::string> stepsize;
  if (at != std::string::npos) stepsize = token.substr(at + 1);
  const auto colon = head.find(':');
  const std::string name = head.substr(0, colon);
  std::optional<double> lambda;
  if (colon != std::string::npos) {
    const std::string v = head.substr(colon + 1);
    std::size_t pos = 0;
    try {
      lambda = std::stod(v, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != v.size() || v.empty()) throw UsageError("method '" + token + "': bad lambda");
  }
  return make_method(name, lambda, stepsize);
}

inline SolverConfig to_config(const MethodSpec& m, int steps, bool bound_check = false) {
  if (steps < 1) throw UsageError("--steps must be >= 1");
  SolverConfig cfg;
  cfg.method = m.method;
  cfg.regularizer = m.regularizer;
  cfg.schedule = m.schedule;
  cfg.max_iters = steps;
  cfg.decrease_bound_check = bound_check && m.method.is_frank_wolfe();
  return cfg;
}

// ---------------------------------------------------------------------------
// Trace CSV
// ---------------------------------------------------------------------------

inline constexpr const char* kTraceHeader = "k,alpha,e_cont,e_reg,e_disc,s_k,step_norm,bound_delta,bound_held,time_ms";

/// One row per iteration. Undefined values are left empty; time_ms is 0
/// unless `timing` is set so that reruns are byte-identical.
inline void write_trace_csv(std::ostream& out, const IterationTrace& trace, bool timing = false) {
  auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string(); };
  out << kTraceHeader << '\n';
  for (const auto& r : trace.records) {
    out << r.k << ',' << (std::isnan(r.alpha) ? std::string() : fmt(r.alpha)) << ',' << fmt(r.e_cont) << ','
        << fmt(r.e_reg) << ',' << opt(r.e_disc) << ',' << opt(r.s_k) << ',' << fmt(r.step_norm) << ','
        << opt(r.bound_delta) << ',' << (r.bound_held ? (*r.bound_held ? "1" : "0") : "") << ','
        << (timing ? fmt(r.time_ms) : std::string("0")) << '\n';
  }
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateOptions {
  std::string kind = "dense";
  std::size_t nodes = 500;
  std::size_t labels = 21;
  std::size_t rows = 8;
  std::size_t cols = 8;
  double edge_prob = 0.3;
  double image_size = RandomDense{}.image_size;
  double unary_scale = RandomDense{}.unary_scale;
  double potts_w = 1.0;
  std::string compat = "potts";
  std::uint64_t seed = 0;
  std::string out;
};

inline GeneratorSpec to_spec(const GenerateOptions& o) {
  if (o.labels == 0) throw UsageError("--labels must be positive");
  if (o.kind == "dense") {
    if (o.nodes == 0) throw UsageError("--nodes must be positive");
    if (!(o.image_size > 0.0)) throw UsageError("--image-size must be positive");
    RandomDense s;
    s.n = o.nodes;
    s.d = o.labels;
    s.image_size = o.image_size;
    s.unary_scale = o.unary_scale;
    s.potts_w = o.potts_w;
    if (o.compat == "potts") {
      s.compat = CompatKind::Potts;
    } else if (o.compat == "random") {
      s.compat = CompatKind::RandomSymmetric;
    } else {
      throw UsageError("--compat must be potts or random");
    }
    s.seed = o.seed;
    return s;
  }
  if (o.kind == "grid") {
    if (o.rows == 0 || o.cols == 0) throw UsageError("--rows and --cols must be positive");
    return RandomGrid{o.rows, o.cols, o.labels, o.potts_w, o.unary_scale, o.seed};
  }
  if (o.kind == "edges") {
    if (o.nodes == 0) throw UsageError("--nodes must be positive");
    if (!(o.edge_prob >= 0.0 && o.edge_prob <= 1.0)) throw UsageError("--edge-prob must lie in [0, 1]");
    return RandomEdgeList{o.nodes, o.labels, o.edge_prob, o.unary_scale, o.seed};
  }
  throw UsageError("--kind must be dense, grid or edges");
}

inline std::string backend_name(const CrfInstance& inst) {
  const auto& b = inst.pairwise();
  if (std::holds_alternative<DenseMatrix>(b)) return "dense";
  if (std::holds_alternative<EdgeList>(b)) return "edges";
  return "gaussian";
}

inline int cmd_generate(const GenerateOptions& o, std::ostream& log) {
  if (o.out.empty()) throw UsageError("--out is required");
  const CrfInstance inst = generate(to_spec(o));
  write_json(inst, o.out);
  log << "wrote " << o.out << ": n=" << inst.n() << " d=" << inst.d() << " backend=" << backend_name(inst) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

struct SolveOptions {
  std::string instance;
  std::string method = "fw";
  std::optional<double> lambda;
  std::optional<std::string> stepsize;
  double rho = 1.0;
  int steps = 20;
  std::string trace;
  std::string rounding = "nearest";
  bool bound_check = false;
  bool timing = false;
};

inline CrfInstance load_instance(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.extension() == ".uai") return read_uai(path);
  return read_json(path);
}

inline int cmd_solve(const SolveOptions& o, std::ostream& out) {
  if (o.instance.empty()) throw UsageError("--instance is required");
  if (o.steps < 1) throw UsageError("--steps must be >= 1");
  if (o.rounding != "nearest" && o.rounding != "bcd") throw UsageError("--rounding must be nearest or bcd");
  const MethodSpec m = make_method(o.method, o.lambda, o.stepsize, o.rho);
  const SolverConfig cfg = to_config(m, o.steps, o.bound_check);
  const CrfInstance inst = load_instance(o.instance);

  auto dump = [&](const IterationTrace& t) {
    if (o.trace.empty()) return;
    std::ofstream f(o.trace, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + o.trace);
    write_trace_csv(f, t, o.timing);
  };
  SolveResult res = [&]() {
    try {
      return solve(inst, cfg);
    } catch (const DivergedError& e) {
      dump(e.trace());
      throw;
    }
  }();
  dump(res.trace);

  const Labeling s = o.rounding == "bcd" ? round_bcd(inst, res.x) : round_nearest(res.x);
  const auto& last = res.trace.records.back();
  out << "method " << m.label << " iterations " << res.trace.size() << '\n';
  out << "e_cont " << fmt(last.e_cont) << " e_reg " << fmt(last.e_reg) << " e_decoded " << fmt(energy_discrete(inst, s))
      << '\n';
  if (cfg.decrease_bound_check) out << "bound_violations " << res.trace.bound_violations() << '\n';
  out << "labels";
  for (std::size_t i = 0; i < s.size(); ++i) out << ' ' << s[i];
  out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

inline constexpr const char* kDefaultCompareMethods =
    "fw,l2fw:1@constant:1,efw:0.25@constant:1,mf,pgd,pgm,emd,admm";

struct CompareOptions {
  std::vector<std::string> instances;
  /// Generated instead of (or in addition to) files: RandomDense with seeds
  /// seed, seed + 1, ...
  std::size_t generate_count = 0;
  RandomDense generator{};
  std::string methods = kDefaultCompareMethods;
  std::string sweep_methods = "l2fw,efw";
  double lambda_min = 0.1;
  double lambda_max = 2.5;
  double lambda_step = 0.1;
  int sweep_iteration = 5;
  int steps = 20;
  std::string out_dir;
};

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    if (!cur.empty()) parts.push_back(cur);
  }
  return parts;
}

/// Worker count: hardware concurrency, capped by CRFFW_THREADS when set.
inline std::size_t thread_budget(std::size_t jobs) {
  std::size_t t = std::max<unsigned>(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CRFFW_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) t = std::min(t, static_cast<std::size_t>(v));
  }
  return std::max<std::size_t>(1, std::min(t, jobs));
}

/// Runs f(0..count-1) on up to thread_budget(count) threads. The first
/// exception (by index) is rethrown after all workers finish.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& f) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = thread_budget(count);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline std::vector<double> lambda_grid(double lo, double hi, double step) {
  if (!(lo > 0.0) || !(hi >= lo) || !(step > 0.0)) throw UsageError("invalid lambda grid");
  std::vector<double> g;
  const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long i = 0; i <= count; ++i) g.push_back(std::round((lo + static_cast<double>(i) * step) * 1e12) / 1e12);
  return g;
}

/// Discrete energies E(round(x^t)) for t = 0..steps (t = completed steps).
inline std::vector<double> discrete_curve(const CrfInstance& inst, const MethodSpec& m, int steps) {
  const SolveResult r = solve(inst, to_config(m, steps));
  std::vector<double> curve;
  curve.reserve(r.trace.size() + 1);
  curve.push_back(*r.trace.initial_e_disc);
  for (const auto& rec : r.trace.records) curve.push_back(*rec.e_disc);
  return curve;
}

struct CompareResult {
  std::vector<std::string> instance_names;
  std::vector<std::string> method_labels;
  /// [method][instance][t]
  std::vector<std::vector<std::vector<double>>> curves;
  std::vector<std::string> sweep_methods;
  std::vector<double> lambdas;
  /// [sweep method][instance][lambda index], energy after sweep_iteration steps
  std::vector<std::vector<std::vector<double>>> sweep;
  int steps = 0;
  int sweep_iteration = 0;

  /// Mean over instances of the method's discrete energy after t steps.
  double mean_energy(std::size_t method, std::size_t t) const {
    double s = 0.0;
    for (const auto& c : curves[method]) s += c[t];
    return s / static_cast<double>(curves[method].size());
  }
  double mean_sweep(std::size_t method, std::size_t l) const {
    double s = 0.0;
    for (const auto& c : sweep[method]) s += c[l];
    return s / static_cast<double>(sweep[method].size());
  }
};

inline CompareResult run_compare(const CompareOptions& o) {
  if (o.steps < 1) throw UsageError("--steps must be >= 1");
  if (o.sweep_iteration < 1) throw UsageError("--sweep-iteration must be >= 1");
  std::vector<MethodSpec> methods;
  for (const auto& tok : split(o.methods, ',')) methods.push_back(parse_method_token(tok));
  if (methods.empty()) throw UsageError("--methods must list at least one method");
  CompareResult res;
  for (const auto& tok : split(o.sweep_methods, ',')) {
    if (tok != "l2fw" && tok != "efw") throw UsageError("sweep methods must be l2fw or efw, got '" + tok + "'");
    res.sweep_methods.push_back(tok);
  }
  res.lambdas = lambda_grid(o.lambda_min, o.lambda_max, o.lambda_step);
  res.steps = o.steps;
  res.sweep_iteration = o.sweep_iteration;
  for (const auto& m : methods) res.method_labels.push_back(m.label);

  std::vector<std::function<CrfInstance()>> sources;
  for (const auto& p : o.instances) {
    res.instance_names.push_back(p);
    sources.emplace_back([p]() { return load_instance(p); });
  }
  for (std::size_t k = 0; k < o.generate_count; ++k) {
    RandomDense spec = o.generator;
    spec.seed = o.generator.seed + k;
    res.instance_names.push_back("dense-seed-" + std::to_string(spec.seed));
    sources.emplace_back([spec]() { return generate(spec); });
  }
  const std::size_t count = sources.size();
  if (count == 0) throw UsageError("compare needs at least one instance");

  res.curves.assign(methods.size(), std::vector<std::vector<double>>(count));
  res.sweep.assign(res.sweep_methods.size(), std::vector<std::vector<double>>(count));
  parallel_for(count, [&](std::size_t i) {
    const CrfInstance inst = sources[i]();
    for (std::size_t m = 0; m < methods.size(); ++m) res.curves[m][i] = discrete_curve(inst, methods[m], o.steps);
    for (std::size_t m = 0; m < res.sweep_methods.size(); ++m) {
      auto& row = res.sweep[m][i];
      for (double lam : res.lambdas) {
        const MethodSpec spec = make_method(res.sweep_methods[m], lam, std::string("constant:1"));
        row.push_back(discrete_curve(inst, spec, o.sweep_iteration).back());
      }
    }
  });
  return res;
}

inline void write_compare(const CompareResult& r, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  {
    std::ofstream f(base / "energy_by_iteration.csv", std::ios::binary);
    f << "method,iteration,mean_e_disc\n";
    for (std::size_t m = 0; m < r.method_labels.size(); ++m) {
      for (std::size_t t = 0; t <= static_cast<std::size_t>(r.steps); ++t) {
        f << r.method_labels[m] << ',' << t << ',' << fmt(r.mean_energy(m, t)) << '\n';
      }
    }
  }
  {
    std::ofstream f(base / "lambda_sweep.csv", std::ios::binary);
    f << "method,lambda,mean_e_disc\n";
    for (std::size_t m = 0; m < r.sweep_methods.size(); ++m) {
      for (std::size_t l = 0; l < r.lambdas.size(); ++l) {
        f << r.sweep_methods[m] << ',' << fmt(r.lambdas[l]) << ',' << fmt(r.mean_sweep(m, l)) << '\n';
      }
    }
  }
  nlohmann::json j;
  j["instances"] = r.instance_names;
  j["steps"] = r.steps;
  j["sweep_iteration"] = r.sweep_iteration;
  j["lambdas"] = r.lambdas;
  nlohmann::json ms = nlohmann::json::array();
  for (std::size_t m = 0; m < r.method_labels.size(); ++m) {
    std::vector<double> mean;
    for (std::size_t t = 0; t <= static_cast<std::size_t>(r.steps); ++t) mean.push_back(r.mean_energy(m, t));
    ms.push_back({{"method", r.method_labels[m]}, {"mean_e_disc", mean}, {"per_instance", r.curves[m]}});
  }
  j["methods"] = std::move(ms);
  nlohmann::json sw = nlohmann::json::array();
  for (std::size_t m = 0; m < r.sweep_methods.size(); ++m) {
    std::vector<double> mean;
    std::vector<double> argmin;
    for (std::size_t l = 0; l < r.lambdas.size(); ++l) mean.push_back(r.mean_sweep(m, l));
    for (const auto& row : r.sweep[m]) {
      argmin.push_back(r.lambdas[static_cast<std::size_t>(std::min_element(row.begin(), row.end()) - row.begin())]);
    }
    sw.push_back({{"method", r.sweep_methods[m]}, {"mean_e_disc", mean}, {"argmin_lambda", argmin},
                  {"per_instance", r.sweep[m]}});
  }
  j["lambda_sweep"] = std::move(sw);
  std::ofstream f(base / "summary.json", std::ios::binary);
  f << j.dump(2) << '\n';
}

inline int cmd_compare(const CompareOptions& o, std::ostream& log) {
  if (o.out_dir.empty()) throw UsageError("--out is required");
  const CompareResult r = run_compare(o);
  write_compare(r, o.out_dir);
  const auto t = static_cast<std::size_t>(std::min(r.sweep_iteration, r.steps));
  log << "mean discrete energy after " << t << " steps over " << r.instance_names.size() << " instances\n";
  for (std::size_t m = 0; m < r.method_labels.size(); ++m) {
    log << "  " << std::left << std::setw(28) << r.method_labels[m] << fmt(r.mean_energy(m, t)) << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  std::string suite;
  std::uint64_t seed = 1;
  std::string report;
};

namespace detail {

inline CrfInstance small_instance(Rng& rng, std::uint64_t seed) {
  const std::size_t n = 2 + rng.below(5);
  const std::size_t d = 2 + rng.below(2);
  switch (rng.below(3)) {
    case 0: return generate(RandomEdgeList{n, d, 0.6, 1.0, seed});
    case 1: return generate(RandomGrid{1, n, d, rng.uniform(0.2, 2.0), 1.0, seed});
    default: {
      RandomDense s;
      s.n = n;
      s.d = d;
      s.image_size = 6.0;
      s.compat = CompatKind::RandomSymmetric;
      s.seed = seed;
      return generate(s);
    }
  }
}

inline Matrix random_point(Rng& rng, std::size_t n, std::size_t d) {
  Matrix v(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index k = 0; k < v.size(); ++k) v.data()[k] = -std::log(1.0 - rng.uniform());
  for (Eigen::Index i = 0; i < v.rows(); ++i) v.row(i) /= v.row(i).sum();
  return v;
}

inline Check make_check(std::string name, std::size_t failures, std::size_t total) {
  return {std::move(name), failures == 0, std::to_string(total - failures) + "/" + std::to_string(total) + " passed"};
}

inline std::vector<Check> suite_invariants(std::uint64_t seed) {
  std::vector<Check> out;
  Rng rng(seed);
  std::size_t fail_vertex = 0, fail_grad = 0, fail_sym = 0, fail_bcd = 0, fail_feas = 0, fail_mf = 0, fail_cg_bound = 0;
  std::size_t total_vertex = 0;
  const std::size_t trials = 50;
  for (std::size_t t = 0; t < trials; ++t) {
    const CrfInstance inst = small_instance(rng, seed * 1000 + t);
    const std::size_t n = inst.n();
    const std::size_t d = inst.d();
    for_each_labeling(n, d, [&](const Labeling& s) {
      ++total_vertex;
      if (std::abs(energy_relaxed(inst, one_hot(s, d)) - energy_discrete(inst, s)) > 1e-9) ++fail_vertex;
    });
    const Matrix x = random_point(rng, n, d);
    const Matrix y = random_point(rng, n, d);
    const Matrix g = gradient(inst, x);
    const Matrix fd = finite_diff_gradient(inst, x, 1e-5);
    if ((g - fd).cwiseAbs().maxCoeff() > 1e-6 * std::max(1.0, g.cwiseAbs().maxCoeff())) ++fail_grad;
    const double a = x.cwiseProduct(pairwise_matvec(inst.pairwise(), y)).sum();
    const double b = pairwise_matvec(inst.pairwise(), x).cwiseProduct(y).sum();
    if (std::abs(a - b) > 1e-9) ++fail_sym;
    if (energy_discrete(inst, round_bcd(inst, x)) > energy_relaxed(inst, x) + 1e-9) ++fail_bcd;
    for (const Regularizer& reg : {Regularizer::l2(0.5), Regularizer::entropy(0.5)}) {
      const Matrix grad = gradient(inst, x);
      const RelaxedPoint p = regularized_direction(grad, reg);
      const double s = conditional_gradient_norm(grad, x, p, reg);
      if (s < -1e-9 || s < 0.5 * reg.lambda * (x - p.values()).squaredNorm() - 1e-9) ++fail_cg_bound;
    }
    for (const auto& name : method_names()) {
      SolverConfig cfg = to_config(make_method(name), 10);
      cfg.record_iterates = true;
      const SolveResult r = solve(inst, cfg);
      for (const auto& it : r.trace.iterates) {
        if (!is_row_stochastic(it)) {
          ++fail_feas;
          break;
        }
      }
    }
    SolverConfig efw;
    efw.method = SolverMethod::entropic_fw();
    efw.regularizer = Regularizer::entropy(1.0);
    efw.schedule = StepsizeSchedule::constant(1.0);
    efw.max_iters = 20;
    efw.record_iterates = true;
    const SolveResult a1 = run_generalized_fw(inst, efw);
    const SolveResult a2 = mean_field_run(inst, 20, 1.0, false, true);
    for (std::size_t k = 0; k < a1.trace.iterates.size(); ++k) {
      if ((a1.trace.iterates[k] - a2.trace.iterates[k]).cwiseAbs().maxCoeff() > 1e-12) {
        ++fail_mf;
        break;
      }
    }
  }
  out.push_back(make_check("vertex_energy_consistency", fail_vertex, total_vertex));
  out.push_back(make_check("gradient_finite_difference", fail_grad, trials));
  out.push_back(make_check("pairwise_symmetry", fail_sym, trials));
  out.push_back(make_check("bcd_non_increase", fail_bcd, trials));
  out.push_back(make_check("conditional_gradient_bound", fail_cg_bound, 2 * trials));
  out.push_back(make_check("solver_feasibility", fail_feas, trials));
  out.push_back(make_check("mean_field_identity", fail_mf, trials));

  std::size_t fail_proj = 0;
  for (std::size_t t = 0; t < 200; ++t) {
    const std::size_t d = 1 + rng.below(6);
    std::vector<double> v(d);
    for (auto& c : v) c = rng.uniform(-3.0, 3.0);
    const std::vector<double> z = project_simplex(v);
    double sum = 0.0;
    double lo = 0.0;
    for (double c : z) {
      sum += c;
      lo = std::min(lo, c);
    }
    const std::vector<double> zz = project_simplex(z);
    double idem = 0.0;
    for (std::size_t k = 0; k < d; ++k) idem = std::max(idem, std::abs(zz[k] - z[k]));
    if (std::abs(sum - 1.0) > 1e-12 || lo < 0.0 || idem > 1e-12) ++fail_proj;
  }
  out.push_back(make_check("simplex_projection", fail_proj, 200));
  const bool vertex_ok = vertex_regularizer_constancy(Regularizer::l2(0.7), 3, 4) &&
                         vertex_regularizer_constancy(Regularizer::entropy(0.7), 3, 4) &&
                         vertex_regularizer_constancy(Regularizer::l2(1.3), 20, 5);
  out.push_back({"regularizer_vertex_constancy", vertex_ok, vertex_ok ? "constant" : "not constant"});
  return out;
}

inline std::vector<Check> suite_bounds(std::uint64_t seed) {
  std::vector<Check> out;
  Rng rng(seed);
  struct Case {
    std::string name;
    SolverMethod method;
    Regularizer reg;
    std::function<StepsizeSchedule(const CrfInstance&, const Regularizer&)> schedule;
  };
  auto fixed = [](StepsizeSchedule s) { return [s](const CrfInstance&, const Regularizer&) { return s; }; };
  auto below_two_omega = [](const CrfInstance& inst, const Regularizer& reg) {
    const double L = lipschitz_upper_bound(inst);
    const double omega = reg.lambda / (L + reg.lambda);
    return StepsizeSchedule::constant(std::min(1.0, 1.5 * omega));
  };
  const std::vector<Case> cases = {
      {"l2fw/adaptive", SolverMethod::l2_fw(), Regularizer::l2(1.0), fixed(StepsizeSchedule::adaptive())},
      {"efw/adaptive", SolverMethod::entropic_fw(), Regularizer::entropy(0.5), fixed(StepsizeSchedule::adaptive())},
      {"l2fw/linesearch", SolverMethod::l2_fw(), Regularizer::l2(0.5), fixed(StepsizeSchedule::line_search())},
      {"efw/linesearch", SolverMethod::entropic_fw(), Regularizer::entropy(1.0), fixed(StepsizeSchedule::line_search())},
      {"l2fw/constant<2w", SolverMethod::l2_fw(), Regularizer::l2(1.0), below_two_omega},
      {"efw/constant<2w", SolverMethod::entropic_fw(), Regularizer::entropy(1.0), below_two_omega},
      {"l2fw/constant:1", SolverMethod::l2_fw(), Regularizer::l2(1.0), fixed(StepsizeSchedule::constant(1.0))},
      {"efw/harmonic", SolverMethod::entropic_fw(), Regularizer::entropy(0.5), fixed(StepsizeSchedule::harmonic())},
      {"l2fw/diminishing", SolverMethod::l2_fw(), Regularizer::l2(0.5), fixed(StepsizeSchedule::paper_diminishing())},
      {"efw/length", SolverMethod::entropic_fw(), Regularizer::entropy(1.0), fixed(StepsizeSchedule::constant_length(0.2))},
      {"fw/linesearch", SolverMethod::vanilla_fw(), Regularizer::none(), fixed(StepsizeSchedule::line_search())},
      {"fw/constant:0.1", SolverMethod::vanilla_fw(), Regularizer::none(), fixed(StepsizeSchedule::constant(0.1))},
      {"fw/invsqrt", SolverMethod::vanilla_fw(), Regularizer::none(), fixed(StepsizeSchedule::inv_sqrt())},
      {"fw/length", SolverMethod::vanilla_fw(), Regularizer::none(), fixed(StepsizeSchedule::constant_length(0.1))},
      {"cfw/linesearch", SolverMethod::convex_fw(), Regularizer::none(), fixed(StepsizeSchedule::line_search())},
      {"mf", SolverMethod::mean_field(), Regularizer::entropy(1.0), fixed(StepsizeSchedule::constant(1.0))},
  };
  const std::size_t trials = 20;
  std::vector<CrfInstance> instances;
  for (std::size_t t = 0; t < trials; ++t) {
    RandomDense s;
    s.n = 20 + rng.below(20);
    s.d = 3 + rng.below(3);
    s.image_size = 12.0;
    s.seed = seed * 7919 + t;
    instances.push_back(generate(s));
    instances.push_back(generate(RandomEdgeList{15, 3, 0.3, 1.0, seed * 7919 + t}));
  }
  for (const auto& c : cases) {
    std::size_t violations = 0;
    std::size_t steps = 0;
    for (const auto& inst : instances) {
      SolverConfig cfg;
      cfg.method = c.method;
      cfg.regularizer = c.reg;
      cfg.schedule = c.schedule(inst, c.reg);
      cfg.max_iters = 20;
      cfg.decrease_bound_check = true;
      const SolveResult r = run_generalized_fw(inst, cfg);
      violations += r.trace.bound_violations();
      steps += r.trace.size();
    }
    out.push_back({"decrease_bound " + c.name, violations == 0,
                   std::to_string(violations) + " violations in " + std::to_string(steps) + " steps"});
  }
  std::size_t trend_fail = 0;
  for (const auto& inst : instances) {
    SolverConfig cfg;
    cfg.method = SolverMethod::l2_fw();
    cfg.regularizer = Regularizer::l2(1.0);
    cfg.schedule = StepsizeSchedule::adaptive();
    cfg.max_iters = 30;
    const SolveResult r = run_generalized_fw(inst, cfg);
    if (!sublinear_trend(r.trace, r.trace.params->omega).holds) ++trend_fail;
  }
  out.push_back(make_check("sublinear_trend l2fw/adaptive", trend_fail, instances.size()));
  return out;
}

/// Random pairwise MARKOV network text and its factor tables.
struct UaiCase {
  std::string text;
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<std::vector<std::size_t>> scopes;
  std::vector<std::vector<double>> tables;
};

inline UaiCase random_uai(Rng& rng) {
  UaiCase c;
  c.n = 2 + rng.below(3);
  c.d = 2 + rng.below(2);
  while (c.n * c.d > 12) --c.n;
  for (std::size_t i = 0; i < c.n; ++i) {
    if (rng.uniform() < 0.8) c.scopes.push_back({i});
  }
  for (std::size_t i = 0; i < c.n; ++i) {
    for (std::size_t j = i + 1; j < c.n; ++j) {
      if (rng.uniform() < 0.6) c.scopes.push_back(rng.uniform() < 0.5 ? std::vector<std::size_t>{i, j}
                                                                       : std::vector<std::size_t>{j, i});
    }
  }
  std::ostringstream s;
  s << std::setprecision(17) << "MARKOV\n" << c.n << '\n';
  for (std::size_t i = 0; i < c.n; ++i) s << c.d << (i + 1 < c.n ? ' ' : '\n');
  s << c.scopes.size() << '\n';
  for (const auto& sc : c.scopes) {
    s << sc.size();
    for (auto v : sc) s << ' ' << v;
    s << '\n';
  }
  for (const auto& sc : c.scopes) {
    const std::size_t size = sc.size() == 1 ? c.d : c.d * c.d;
    std::vector<double> t(size);
    s << '\n' << size << '\n';
    for (auto& v : t) {
      v = rng.uniform(0.05, 1.0);
      s << v << ' ';
    }
    s << '\n';
    c.tables.push_back(std::move(t));
  }
  c.text = s.str();
  return c;
}

/// Product of all factor tables at labeling s.
inline double uai_product(const UaiCase& c, const Labeling& s) {
  double p = 1.0;
  for (std::size_t f = 0; f < c.scopes.size(); ++f) {
    std::size_t idx = 0;
    for (auto v : c.scopes[f]) idx = idx * c.d + s[v];
    p *= c.tables[f][idx];
  }
  return p;
}

inline std::vector<Check> suite_oracle(std::uint64_t seed) {
  std::vector<Check> out;
  Rng rng(seed);
  const std::size_t trials = 50;
  std::size_t fail_bf = 0, fail_tight = 0, fail_json = 0, fail_uai = 0, fail_lower = 0;
  std::size_t exact = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const CrfInstance inst = small_instance(rng, seed * 1000 + t);
    const OracleReport rep = brute_force_map(inst);
    double best = std::numeric_limits<double>::infinity();
    for_each_labeling(inst.n(), inst.d(), [&](const Labeling& s) { best = std::min(best, energy_discrete(inst, s)); });
    if (rep.optimal_energy != best || energy_discrete(inst, rep.optimal_labeling) != rep.optimal_energy) ++fail_bf;

    const Matrix star = one_hot(rep.optimal_labeling, inst.d());
    const TightnessReport tr = tightness_report(inst, star, Regularizer::none());
    if (tr.e_rounded_nearest != tr.e_star || !tr.lower_holds) ++fail_tight;

    const CrfInstance back = from_json_string(to_json_string(inst));
    const Matrix x = random_point(rng, inst.n(), inst.d());
    if (energy_relaxed(inst, x) != energy_relaxed(back, x)) ++fail_json;

    for (const char* name : {"fw", "l2fw", "efw", "mf"}) {
      SolverConfig cfg = to_config(make_method(name), 200);
      cfg.record_discrete_energy = false;
      const SolveResult r = solve(inst, cfg);
      const double e = energy_discrete(inst, round_bcd(inst, r.x));
      if (e < rep.optimal_energy - 1e-9) ++fail_lower;
      if (std::string(name) == "fw" && e <= rep.optimal_energy + 1e-9) ++exact;
    }

    const UaiCase uc = random_uai(rng);
    std::istringstream in(uc.text);
    const CrfInstance ui = read_uai(in);
    const OracleReport ur = brute_force_map(ui);
    double pmax = 0.0;
    for_each_labeling(uc.n, uc.d, [&](const Labeling& s) { pmax = std::max(pmax, uai_product(uc, s)); });
    if (std::abs(uai_product(uc, ur.optimal_labeling) - pmax) > 1e-9 * pmax) ++fail_uai;
  }
  out.push_back(make_check("brute_force_reenumeration", fail_bf, trials));
  out.push_back(make_check("tight_at_optimum", fail_tight, trials));
  out.push_back(make_check("json_round_trip", fail_json, trials));
  out.push_back(make_check("decoded_not_below_optimum", fail_lower, 4 * trials));
  const double ratio = static_cast<double>(exact) / static_cast<double>(trials);
  out.push_back({"fw_linesearch_exact_ratio", ratio >= 0.7,
                 std::to_string(exact) + "/" + std::to_string(trials) + " decoded to E*, need ratio >= 0.7"});
  out.push_back(make_check("uai_map_matches_product", fail_uai, trials));
  return out;
}

}  // namespace detail

inline std::vector<Check> run_suite(const std::string& suite, std::uint64_t seed) {
  if (suite == "invariants") return detail::suite_invariants(seed);
  if (suite == "bounds") return detail::suite_bounds(seed);
  if (suite == "oracle") return detail::suite_oracle(seed);
  throw UsageError("unknown suite '" + suite + "' (invariants, bounds, oracle)");
}

inline int cmd_verify(const VerifyOptions& o, std::ostream& log) {
  const std::vector<Check> checks = run_suite(o.suite, o.seed);
  bool all = true;
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : checks) {
    all = all && c.passed;
    arr.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    log << (c.passed ? "PASS " : "FAIL ") << c.name << " (" << c.detail << ")\n";
  }
  const nlohmann::json report = {{"suite", o.suite}, {"seed", o.seed}, {"passed", all}, {"checks", arr}};
  if (!o.report.empty()) {
    std::ofstream f(o.report, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + o.report);
    f << report.dump(2) << '\n';
  }
  return all ? kExitOk : kExitRuntime;
}

}  // namespace crffw::cli
