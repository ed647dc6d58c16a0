// Generates a small fully connected CRF, runs three solvers and decodes each
// result, then checks a tiny chain against exhaustive search.

#include <iostream>

#include "crffw/crffw.hpp"

using namespace crffw;

namespace {

double decoded_energy(const CrfInstance& inst, const SolverConfig& cfg) {
  const SolveResult r = solve(inst, cfg);
  return energy_discrete(inst, round_bcd(inst, r.x));
}

}  // namespace

int main() {
  RandomDense spec;
  spec.n = 200;
  spec.d = 8;
  spec.seed = 42;
  const CrfInstance inst = generate(spec);
  std::cout << "dense instance: n=" << inst.n() << " d=" << inst.d() << '\n';

  SolverConfig fw;
  fw.method = SolverMethod::vanilla_fw();
  fw.schedule = StepsizeSchedule::line_search();
  fw.max_iters = 10;

  SolverConfig l2fw;
  l2fw.method = SolverMethod::l2_fw();
  l2fw.regularizer = Regularizer::l2(1.0);
  l2fw.schedule = StepsizeSchedule::constant(1.0);
  l2fw.max_iters = 10;

  SolverConfig mf;
  mf.method = SolverMethod::mean_field();
  mf.max_iters = 10;

  std::cout << "  initial  " << energy_discrete(inst, round_nearest(initial_point(inst))) << '\n';
  std::cout << "  fw       " << decoded_energy(inst, fw) << '\n';
  std::cout << "  l2fw     " << decoded_energy(inst, l2fw) << '\n';
  std::cout << "  mf       " << decoded_energy(inst, mf) << '\n';

  // A 6-node chain is small enough to enumerate all 3^6 labelings.
  const CrfInstance chain = generate(RandomGrid{1, 6, 3, 1.0, 1.0, 7});
  const OracleReport best = brute_force_map(chain);
  std::cout << "chain: E* = " << best.optimal_energy << ", fw decodes to " << decoded_energy(chain, fw) << '\n';
  return 0;
}
