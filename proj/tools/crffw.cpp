// crffw: generate CRF instances, run solvers, compare methods and run the
// verification suites. Exit codes: 0 success, 1 runtime error or
// divergence, 2 usage error.

#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "crffw/cli.hpp"

namespace {

using namespace crffw::cli;

void add_generate(CLI::App& app, GenerateOptions& o) {
  auto* c = app.add_subcommand("generate", "Write a synthetic instance as JSON");
  c->add_option("--kind", o.kind, "dense | grid | edges")->capture_default_str();
  c->add_option("--nodes", o.nodes, "Node count (dense, edges)")->capture_default_str();
  c->add_option("--labels", o.labels, "Label count")->capture_default_str();
  c->add_option("--rows", o.rows, "Grid rows")->capture_default_str();
  c->add_option("--cols", o.cols, "Grid columns")->capture_default_str();
  c->add_option("--edge-prob", o.edge_prob, "Edge probability (edges)")->capture_default_str();
  c->add_option("--image-size", o.image_size, "Side of the square holding node positions (dense)")
      ->capture_default_str();
  c->add_option("--unary-scale", o.unary_scale, "Standard deviation of the unaries")->capture_default_str();
  c->add_option("--potts-w", o.potts_w, "Potts weight (dense, grid)")->capture_default_str();
  c->add_option("--compat", o.compat, "potts | random (dense)")->capture_default_str();
  c->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  c->add_option("--out", o.out, "Output JSON path")->required();
}

void add_solve(CLI::App& app, SolveOptions& o, std::optional<double>& lambda, std::string& stepsize) {
  auto* c = app.add_subcommand("solve", "Run one solver and write its trace");
  c->add_option("--instance", o.instance, "Instance (.json or .uai)")->required();
  c->add_option("--method", o.method, "mf | dmf | fw | cfw | l2fw | efw | pgd | pgm | emd | admm")
      ->capture_default_str();
  c->add_option("--lambda", lambda, "Regularization weight (l2fw, efw)");
  c->add_option("--stepsize", stepsize,
                "constant:A | length:A | harmonic | diminishing | invsqrt | adaptive | linesearch");
  c->add_option("--rho", o.rho, "ADMM penalty")->capture_default_str();
  c->add_option("--steps", o.steps, "Iterations")->capture_default_str();
  c->add_option("--trace", o.trace, "Trace CSV path");
  c->add_option("--rounding", o.rounding, "Final decoding: nearest | bcd")->capture_default_str();
  c->add_flag("--bound-check", o.bound_check, "Check per-iteration decrease bounds");
  c->add_flag("--timing", o.timing, "Record wall time in the trace");
}

void add_compare(CLI::App& app, CompareOptions& o) {
  auto* c = app.add_subcommand("compare", "Mean energy per iteration and lambda sweep over instances");
  c->add_option("--instance", o.instances, "Instance files (repeatable)");
  c->add_option("--generate", o.generate_count, "Also generate this many dense instances")->capture_default_str();
  c->add_option("--nodes", o.generator.n, "Generated node count")->capture_default_str();
  c->add_option("--labels", o.generator.d, "Generated label count")->capture_default_str();
  c->add_option("--seed", o.generator.seed, "First generator seed")->capture_default_str();
  c->add_option("--methods", o.methods, "Comma list of method[:lambda][@stepsize]")->capture_default_str();
  c->add_option("--sweep-methods", o.sweep_methods, "Comma list from l2fw, efw (empty to skip)")
      ->capture_default_str();
  c->add_option("--lambda-min", o.lambda_min)->capture_default_str();
  c->add_option("--lambda-max", o.lambda_max)->capture_default_str();
  c->add_option("--lambda-step", o.lambda_step)->capture_default_str();
  c->add_option("--sweep-iteration", o.sweep_iteration, "Iteration reported by the sweep")->capture_default_str();
  c->add_option("--steps", o.steps, "Iterations per run")->capture_default_str();
  c->add_option("--out", o.out_dir, "Output directory")->required();
}

void add_verify(CLI::App& app, VerifyOptions& o) {
  auto* c = app.add_subcommand("verify", "Run a verification suite");
  c->add_option("--suite", o.suite, "invariants | bounds | oracle")->required();
  c->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  c->add_option("--report", o.report, "JSON report path");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frank-Wolfe family MAP inference for pairwise CRFs"};
  app.require_subcommand(1);
  GenerateOptions gen;
  SolveOptions sol;
  CompareOptions cmp;
  VerifyOptions ver;
  std::optional<double> lambda;
  std::string stepsize;
  add_generate(app, gen);
  add_solve(app, sol, lambda, stepsize);
  add_compare(app, cmp);
  add_verify(app, ver);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "generate") return cmd_generate(gen, std::cout);
    if (cmd == "solve") {
      sol.lambda = lambda;
      if (!stepsize.empty()) sol.stepsize = stepsize;
      return cmd_solve(sol, std::cout);
    }
    if (cmd == "compare") return cmd_compare(cmp, std::cout);
    return cmd_verify(ver, std::cout);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const crffw::DivergedError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
