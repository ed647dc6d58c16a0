#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <sstream>

#include "crffw/cli.hpp"
#include "crffw/crffw.hpp"
#include "oracles.hpp"

using namespace crffw;

namespace {

SolverConfig config(SolverMethod m, Regularizer r, StepsizeSchedule s, int iters) {
  SolverConfig c;
  c.method = m;
  c.regularizer = r;
  c.schedule = s;
  c.max_iters = iters;
  c.record_iterates = true;
  return c;
}

/// Random instance with nonnegative edge potentials.
CrfInstance nonnegative_edges(Rng& rng, std::size_t n, std::size_t d, double prob = 0.6) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (rng.uniform() < prob) {
        edges.push_back({i, j, oracle::random_matrix(rng, static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d), 0, 1)});
      }
    }
  }
  return CrfInstance(oracle::random_matrix(rng, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d), -2, 2),
                     EdgeList(edges, n, d));
}

double regularized_energy(const CrfInstance& inst, const Regularizer& r, const Matrix& x) {
  return energy_relaxed(inst, x) + regularizer_value(r, x);
}

}  // namespace

TEST(InitialPoint, Examples) {
  EXPECT_EQ(initial_point(oracle::unary_only(Matrix::Zero(2, 4))).values(), Matrix::Constant(2, 4, 0.25));
  Matrix u(1, 2);
  u << 0, 1e6;
  const Matrix x = initial_point(oracle::unary_only(u)).values();
  EXPECT_NEAR(x(0, 0), 1.0, 1e-15);
  Matrix v(1, 2);
  v << -std::log(2.0), 0;
  const Matrix y = initial_point(oracle::unary_only(v)).values();
  EXPECT_NEAR(y(0, 0), 2.0 / 3, 1e-15);
  EXPECT_NEAR(y(0, 1), 1.0 / 3, 1e-15);
}

TEST(Lmo, Examples) {
  Matrix g(2, 3);
  g << 0.2, -0.1, 0.3, 0, 0, 5;
  const Matrix p = lmo_vanilla(g).values();
  EXPECT_EQ(p.row(0), Eigen::RowVector3d(0, 1, 0));
  EXPECT_EQ(p.row(1), Eigen::RowVector3d(1, 0, 0));
  Matrix h = g;
  h(0, 0) += 1e-9;
  h(0, 1) -= 1e-9;
  EXPECT_EQ(lmo_vanilla(h).values(), p);
}

TEST(Lmo, InvariantBelowHalfRunnerUpGap) {
  Rng rng(101);
  for (int t = 0; t < 1000; ++t) {
    const Matrix g = oracle::random_matrix(rng, 1, 2 + static_cast<Eigen::Index>(rng.below(6)), -5, 5);
    Eigen::RowVectorXd sorted = g.row(0);
    std::sort(sorted.begin(), sorted.end());
    const double gap = sorted(1) - sorted(0);
    if (!(gap > 0)) continue;
    const Matrix p = lmo_vanilla(g).values();
    Matrix pert = g;
    for (Eigen::Index s = 0; s < g.cols(); ++s) pert(0, s) += rng.uniform(-0.49, 0.49) * gap;
    EXPECT_EQ(lmo_vanilla(pert).values(), p);
    // Crossing the tie boundary moves the vertex.
    Matrix cross = g;
    const auto winner = static_cast<Eigen::Index>(argmin_lowest(g.row(0)));
    cross(0, winner) += 1.01 * gap;
    EXPECT_NE(lmo_vanilla(cross).values(), p);
  }
}

TEST(Directions, L2Examples) {
  Matrix u(1, 2);
  u << -2, 0;
  const CrfInstance inst = oracle::unary_only(u);
  const Matrix x = Matrix::Constant(1, 2, 0.5);
  EXPECT_EQ(direction_l2fw(inst, x, 1.0).values(), (Matrix(1, 2) << 1, 0).finished());
  Rng rng(3);
  const auto c = oracle::random_case(rng, oracle::Backend::Dense, 4, 3);
  const Matrix y = oracle::random_point(rng, 4, 3);
  EXPECT_LE((direction_l2fw(c.inst, y, 1e12).values() - Matrix::Constant(4, 3, 1.0 / 3)).cwiseAbs().maxCoeff(), 1e-9);
  for (double lam : {0.01, 0.3, 1.0, 7.0}) EXPECT_TRUE(is_row_stochastic(direction_l2fw(c.inst, y, lam).values()));
}

TEST(Directions, EntropicExamples) {
  Rng rng(4);
  const Matrix u = oracle::random_matrix(rng, 3, 4);
  const CrfInstance inst = oracle::unary_only(u);
  const Matrix x = oracle::random_point(rng, 3, 4);
  EXPECT_EQ(direction_efw(inst, x, 1.0).values(), initial_point(inst).values());
  const auto c = oracle::random_case(rng, oracle::Backend::Edges, 5, 3);
  const Matrix y = oracle::random_point(rng, 5, 3);
  const Matrix p = direction_efw(c.inst, y, 0.25).values();
  EXPECT_GT(p.minCoeff(), 0.0);
  EXPECT_LE((direction_efw(c.inst, y, 1e-6).values() - lmo_vanilla(gradient(c.inst, y)).values()).cwiseAbs().maxCoeff(),
            1e-3);
}

TEST(ConditionalGradientNorm, StationaryPoints) {
  Rng rng(8);
  const Matrix u = oracle::random_matrix(rng, 3, 4);
  const CrfInstance inst = oracle::unary_only(u);
  const double lam = 0.7;
  const Matrix star = project_feasible(-u / lam).values();
  EXPECT_NEAR(conditional_gradient_norm(inst, star, Regularizer::l2(lam)), 0.0, 1e-12);
  const Matrix vertex = lmo_vanilla(u).values();
  EXPECT_EQ(conditional_gradient_norm(inst, vertex, Regularizer::none()), 0.0);
}

TEST(ConditionalGradientNorm, LowerBoundOnRandomPairs) {
  Rng rng(17);
  for (int t = 0; t < 200; ++t) {
    const auto c = oracle::random_case(rng, static_cast<oracle::Backend>(t % 3), 2 + rng.below(5), 2 + rng.below(3));
    const Matrix x = oracle::random_point(rng, c.inst.n(), c.inst.d());
    const double lam = rng.uniform(0.05, 3.0);
    for (const auto& reg : {Regularizer::l2(lam), Regularizer::entropy(lam), Regularizer::none()}) {
      const Matrix g = gradient(c.inst, x);
      const Matrix p = regularized_direction(g, reg).values();
      const double s = conditional_gradient_norm(g, x, p, reg);
      EXPECT_GE(s, -1e-9);
      EXPECT_GE(s, 0.5 * reg.strong_convexity() * (x - p).squaredNorm() - 1e-9);
    }
  }
}

TEST(Stepsize, Examples) {
  EXPECT_DOUBLE_EQ(stepsize(StepsizeSchedule::adaptive(2.0, 1.0), 0, StepState{1.0, 1.0, nullptr}), 0.5);
  EXPECT_EQ(stepsize(StepsizeSchedule::adaptive(2.0, 1.0), 0, StepState{1.0, 0.0, nullptr}), 1.0);
  EXPECT_EQ(stepsize(StepsizeSchedule::adaptive(1.0, 1.0), 0, StepState{100.0, 1.0, nullptr}), 1.0);
  EXPECT_EQ(stepsize(StepsizeSchedule::harmonic(), 0, {}), 1.0);
  EXPECT_EQ(stepsize(StepsizeSchedule::harmonic(), 2, {}), 0.5);
  EXPECT_EQ(stepsize(StepsizeSchedule::paper_diminishing(), 0, {}), 0.0);
  EXPECT_EQ(stepsize(StepsizeSchedule::paper_diminishing(), 2, {}), 0.5);
  EXPECT_EQ(stepsize(StepsizeSchedule::inv_sqrt(), 3, {}), 0.5);
  EXPECT_EQ(stepsize(StepsizeSchedule::constant(0.25), 9, {}), 0.25);
  EXPECT_DOUBLE_EQ(stepsize(StepsizeSchedule::constant_length(0.5), 0, StepState{0, 4.0, nullptr}), 0.25);
  EXPECT_THROW(stepsize(StepsizeSchedule::adaptive(), 0, {}), InvalidArgument);
  EXPECT_THROW(StepsizeSchedule::constant(0.0), InvalidArgument);
  EXPECT_THROW(StepsizeSchedule::constant(1.5), InvalidArgument);
  EXPECT_THROW(StepsizeSchedule::constant_length(-1.0), InvalidArgument);
}

TEST(Stepsize, LineSearchInteriorMinimum) {
  // q(a) = a^2 - 0.6 a has its minimum at 0.3.
  SegmentModel quad{-0.6, 2.0, {}};
  EXPECT_NEAR(stepsize(StepsizeSchedule::line_search(), 0, StepState{0, 1, &quad}), 0.3, 1e-9);
  SegmentModel generic{0.0, 0.0, [](double a) { return std::cosh(a - 0.3); }};
  // Value comparisons near a smooth minimum resolve the argmin only to about
  // sqrt(machine epsilon).
  EXPECT_NEAR(line_search(generic), 0.3, 1e-7);
  SegmentModel concave{0.1, -1.0, {}};
  EXPECT_EQ(line_search(concave), 1.0);
  SegmentModel rising{1.0, 1.0, {}};
  EXPECT_EQ(line_search(rising), 0.0);
}

TEST(Config, RejectsInvalidCombinations) {
  const CrfInstance inst = oracle::two_node_potts();
  EXPECT_THROW(solve(inst, config(SolverMethod::l2_fw(), Regularizer::none(), StepsizeSchedule::constant(1), 3)),
               InvalidArgument);
  EXPECT_THROW(
      solve(inst, config(SolverMethod::entropic_fw(), Regularizer::l2(1), StepsizeSchedule::constant(1), 3)),
      InvalidArgument);
  EXPECT_THROW(solve(inst, config(SolverMethod::vanilla_fw(), Regularizer::none(), StepsizeSchedule::constant(1), 0)),
               InvalidArgument);
  EXPECT_THROW(solve(inst, config(SolverMethod::fast_pgm(), Regularizer::none(), StepsizeSchedule::line_search(), 3)),
               InvalidArgument);
  EXPECT_THROW(solve(inst, config(SolverMethod::emd(), Regularizer::none(), StepsizeSchedule::adaptive(), 3)),
               InvalidArgument);
  EXPECT_THROW(SolverMethod::damped_mean_field(0.0), InvalidArgument);
  EXPECT_THROW(SolverMethod::damped_mean_field(1.5), InvalidArgument);
  EXPECT_THROW(SolverMethod::admm(0.0), InvalidArgument);
  EXPECT_THROW(Regularizer::l2(0.0), InvalidArgument);
}

TEST(Config, RegularizerForcedOffForUnregularizedMethods) {
  Rng rng(2);
  const auto c = oracle::random_case(rng, oracle::Backend::Dense, 4, 3);
  for (auto m : {SolverMethod::vanilla_fw(), SolverMethod::pgd(), SolverMethod::emd()}) {
    const auto a = solve(c.inst, config(m, Regularizer::l2(5.0), StepsizeSchedule::constant(1), 4));
    const auto b = solve(c.inst, config(m, Regularizer::none(), StepsizeSchedule::constant(1), 4));
    EXPECT_EQ(a.x.values(), b.x.values()) << m.name();
    EXPECT_EQ(a.trace.records.back().e_reg, a.trace.records.back().e_cont);
  }
}

TEST(MeanField, EqualsEntropicFwOnRandomInstances) {
  Rng rng(50);
  for (int t = 0; t < 50; ++t) {
    const auto c = oracle::random_case(rng, static_cast<oracle::Backend>(t % 3), 2 + rng.below(8), 2 + rng.below(4));
    const auto mf = mean_field_run(c.inst, 10, 1.0, false, true);
    const auto efw =
        run_generalized_fw(c.inst, config(SolverMethod::entropic_fw(), Regularizer::entropy(1.0),
                                          StepsizeSchedule::constant(1.0), 10));
    ASSERT_EQ(mf.trace.iterates.size(), efw.trace.iterates.size());
    for (std::size_t k = 0; k < mf.trace.iterates.size(); ++k) {
      EXPECT_LE((mf.trace.iterates[k] - efw.trace.iterates[k]).cwiseAbs().maxCoeff(), 1e-12);
    }
    EXPECT_EQ(mf.x.values(), efw.x.values());
    const auto via_method =
        solve(c.inst, config(SolverMethod::mean_field(), Regularizer::none(), StepsizeSchedule::harmonic(), 10));
    EXPECT_EQ(via_method.x.values(), mf.x.values());
  }
}

TEST(MeanField, Examples) {
  Rng rng(6);
  const Matrix u = oracle::random_matrix(rng, 3, 3);
  const CrfInstance zero_pair = oracle::unary_only(u);
  const auto r = mean_field_run(zero_pair, 3, 1.0, false, true);
  for (const auto& x : r.trace.iterates) EXPECT_LE((x - softmax_rows(-u).values()).cwiseAbs().maxCoeff(), 1e-15);

  const auto c = oracle::random_case(rng, oracle::Backend::Gaussian, 6, 3);
  const auto damped = mean_field_run(c.inst, 8, 0.5, false, true);
  const auto efw = run_generalized_fw(
      c.inst, config(SolverMethod::entropic_fw(), Regularizer::entropy(1.0), StepsizeSchedule::constant(0.5), 8));
  for (std::size_t k = 0; k < damped.trace.iterates.size(); ++k) {
    EXPECT_LE((damped.trace.iterates[k] - efw.trace.iterates[k]).cwiseAbs().maxCoeff(), 1e-12);
  }
  const auto dmf = solve(c.inst, config(SolverMethod::damped_mean_field(0.5), Regularizer::none(),
                                        StepsizeSchedule::constant(1.0), 8));
  EXPECT_LE((dmf.x.values() - damped.x.values()).cwiseAbs().maxCoeff(), 1e-12);

  Matrix one(1, 3);
  one << 0.5, -1, 2;
  const auto single = mean_field_run(oracle::unary_only(one), 4, 1.0, false, true);
  for (std::size_t k = 2; k < single.trace.iterates.size(); ++k) EXPECT_EQ(single.trace.iterates[k], single.trace.iterates[1]);
  EXPECT_EQ(mean_field_run(zero_pair, 0).trace.size(), 0u);
}

TEST(FrankWolfe, VanillaLineSearchOnLinearObjective) {
  Rng rng(12);
  const Matrix u = oracle::random_matrix(rng, 5, 4);
  const CrfInstance inst = oracle::unary_only(u);
  const auto r =
      solve(inst, config(SolverMethod::vanilla_fw(), Regularizer::none(), StepsizeSchedule::line_search(), 3));
  EXPECT_EQ(r.trace.iterates[1], lmo_vanilla(u).values());
  EXPECT_EQ(r.trace.records[0].alpha, 1.0);
  EXPECT_EQ(round_nearest(r.x.values()), brute_force_map(inst).optimal_labeling);
}

TEST(FrankWolfe, L2GoldenTrace) {
  const CrfInstance inst = read_json(std::string(CRFFW_TEST_DATA_DIR) + "/dense_n40_d5_seed7.json");
  SolverConfig cfg = config(SolverMethod::l2_fw(), Regularizer::l2(1.0), StepsizeSchedule::constant(1.0), 5);
  const auto r = solve(inst, cfg);
  std::ifstream in(std::string(CRFFW_TEST_DATA_DIR) + "/l2fw_golden.csv");
  ASSERT_TRUE(in);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, cli::kTraceHeader);
  std::size_t k = 0;
  int non_increasing = 0;
  double prev = *r.trace.initial_e_disc;
  while (std::getline(in, line)) {
    ASSERT_LT(k, r.trace.size());
    std::stringstream ss(line);
    std::vector<std::string> cells;
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    const auto& rec = r.trace.records[k];
    EXPECT_EQ(std::stoi(cells[0]), rec.k);
    EXPECT_NEAR(std::stod(cells[2]), rec.e_cont, 1e-9 * std::abs(rec.e_cont));
    EXPECT_NEAR(std::stod(cells[3]), rec.e_reg, 1e-9 * std::abs(rec.e_reg));
    EXPECT_NEAR(std::stod(cells[4]), *rec.e_disc, 1e-9 * std::abs(*rec.e_disc));
    if (*rec.e_disc <= prev) ++non_increasing;
    prev = *rec.e_disc;
    ++k;
  }
  EXPECT_EQ(k, 5u);
  EXPECT_GE(non_increasing, 5 * 9 / 10);
}

TEST(Convexify, Examples) {
  const CrfInstance inst = oracle::two_node_potts();
  const CrfInstance cvx = convexify(inst);
  ASSERT_TRUE(cvx.has_diagonal());
  EXPECT_EQ(cvx.diagonal(), Matrix::Constant(2, 2, 1.0));  // 2c with c = 0.5
  EXPECT_EQ(inst.unary() - cvx.unary(), Matrix::Constant(2, 2, 0.5));
  for (const auto& s : oracle::all_labelings(2, 2)) {
    EXPECT_NEAR(energy_relaxed(cvx, oracle::one_hot(s, 2)), energy_discrete(inst, Labeling(s)), 1e-12);
  }
  const CrfInstance zero = convexify(oracle::unary_only(Matrix::Ones(2, 3)));
  EXPECT_EQ(zero.unary(), Matrix::Ones(2, 3));
  EXPECT_EQ(zero.diagonal().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Convexify, VertexEnergiesAndConvexity) {
  Rng rng(70);
  for (int t = 0; t < 30; ++t) {
    const CrfInstance inst = nonnegative_edges(rng, 4, 3);
    const CrfInstance cvx = convexify(inst);
    for (const auto& s : oracle::all_labelings(4, 3)) {
      EXPECT_NEAR(energy_relaxed(cvx, oracle::one_hot(s, 3)), energy_discrete(inst, Labeling(s)), 1e-9);
    }
    Matrix h = to_dense_matrix(inst.pairwise());
    const Eigen::Map<const Eigen::VectorXd> q(cvx.diagonal().data(), cvx.diagonal().size());
    h.diagonal() += q;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-9);
  }
}

TEST(Pgd, Examples) {
  const CrfInstance zero = oracle::unary_only(Matrix::Zero(3, 3));
  const auto still = solve(zero, config(SolverMethod::pgd(), Regularizer::none(), StepsizeSchedule::constant(1), 5));
  for (const auto& x : still.trace.iterates) EXPECT_EQ(x, Matrix::Constant(3, 3, 1.0 / 3));

  Rng rng(13);
  const auto c = oracle::random_case(rng, oracle::Backend::Dense, 5, 3);
  const auto r = solve(c.inst, config(SolverMethod::pgd(), Regularizer::none(), StepsizeSchedule::constant(1), 6));
  Matrix x = softmax_rows(-c.inst.unary()).values();
  for (int k = 0; k < 6; ++k) {
    const Eigen::Map<const Eigen::VectorXd> v(x.data(), x.size());
    const Eigen::VectorXd g = c.p * v + Eigen::Map<const Eigen::VectorXd>(c.inst.unary().data(), x.size());
    Matrix step = x - Eigen::Map<const Matrix>(g.data(), x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const auto z = oracle::project_simplex_bisect(std::vector<double>(step.row(i).begin(), step.row(i).end()));
      for (Eigen::Index s = 0; s < x.cols(); ++s) x(i, s) = z[static_cast<std::size_t>(s)];
    }
    EXPECT_LE((r.trace.iterates[static_cast<std::size_t>(k) + 1] - x).cwiseAbs().maxCoeff(), 1e-9);
  }

  const Matrix u = oracle::random_matrix(rng, 4, 3, -3, 3);
  const CrfInstance lin = oracle::unary_only(u);
  const auto conv = solve(lin, config(SolverMethod::pgd(), Regularizer::none(), StepsizeSchedule::constant(1), 20));
  EXPECT_EQ(conv.x.values(), one_hot(brute_force_map(lin).optimal_labeling, 3));
}

TEST(Pgd, LineSearchNotWorseThanUnitStep) {
  Rng rng(14);
  for (int t = 0; t < 30; ++t) {
    const auto c = oracle::random_case(rng, static_cast<oracle::Backend>(t % 3), 5, 3);
    const auto ls = solve(c.inst, config(SolverMethod::pgd(), Regularizer::none(), StepsizeSchedule::line_search(), 1));
    const auto one = solve(c.inst, config(SolverMethod::pgd(), Regularizer::none(), StepsizeSchedule::constant(1), 1));
    EXPECT_LE(ls.trace.records[0].e_cont, one.trace.records[0].e_cont + 1e-9);
  }
}

TEST(Fista, MomentumAndStationarity) {
  EXPECT_EQ(fista_momentum(0), 1.0);
  EXPECT_NEAR(fista_momentum(1), (1 + std::sqrt(5.0)) / 2, 1e-15);
  EXPECT_NEAR(fista_momentum(1), 1.6180, 1e-4);
  const CrfInstance zero = oracle::unary_only(Matrix::Zero(2, 4));
  const auto r = solve(zero, config(SolverMethod::fast_pgm(), Regularizer::none(), StepsizeSchedule::constant(1), 5));
  for (const auto& x : r.trace.iterates) EXPECT_EQ(x, Matrix::Constant(2, 4, 0.25));
}

TEST(Fista, AcceleratesOnConvexifiedInstances) {
  Rng rng(90);
  int wins = 0;
  for (int t = 0; t < 50; ++t) {
    const CrfInstance cvx = convexify(nonnegative_edges(rng, 8, 3));
    const double step = 1.0 / lipschitz_upper_bound(cvx);
    const auto sched = StepsizeSchedule::constant(std::min(1.0, step));
    const auto fista = solve(cvx, config(SolverMethod::fast_pgm(), Regularizer::none(), sched, 20));
    const auto pgd = solve(cvx, config(SolverMethod::pgd(), Regularizer::none(), StepsizeSchedule::constant(1), 20));
    if (energy_relaxed(cvx, fista.x.values()) <= energy_relaxed(cvx, pgd.x.values()) + 1e-12) ++wins;
  }
  EXPECT_GE(wins, 40);
}

TEST(Emd, Examples) {
  const CrfInstance zero = oracle::unary_only(Matrix::Zero(2, 3));
  const auto r = solve(zero, config(SolverMethod::emd(), Regularizer::none(), StepsizeSchedule::constant(1), 4));
  for (const auto& x : r.trace.iterates) EXPECT_LE((x - Matrix::Constant(2, 3, 1.0 / 3)).cwiseAbs().maxCoeff(), 1e-15);

  Matrix u(1, 3);
  u << 2, 2, 2;
  const auto flat = solve(oracle::unary_only(u), config(SolverMethod::emd(), Regularizer::none(),
                                                        StepsizeSchedule::constant(1), 4));
  EXPECT_LE((flat.x.values() - Matrix::Constant(1, 3, 1.0 / 3)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Emd, LargeUnariesStayFinite) {
  Rng rng(15);
  Matrix u = oracle::random_matrix(rng, 6, 4);
  u = (u.array() < 0).select(Matrix::Constant(6, 4, -1e4), Matrix::Constant(6, 4, 1e4));
  std::vector<Edge> edges = {{0, 1, potts_compatibility(4)}, {2, 5, potts_compatibility(4)}};
  const CrfInstance inst(u, EdgeList(edges, 6, 4));
  const auto r = solve(inst, config(SolverMethod::emd(), Regularizer::none(), StepsizeSchedule::constant(1), 100));
  for (const auto& x : r.trace.iterates) {
    EXPECT_TRUE(x.allFinite());
    EXPECT_TRUE(is_row_stochastic(x));
  }
  const auto moderate = solve(oracle::random_case(rng, oracle::Backend::Dense, 5, 3).inst,
                              config(SolverMethod::emd(), Regularizer::none(), StepsizeSchedule::constant(1), 30));
  for (const auto& x : moderate.trace.iterates) EXPECT_GT(x.minCoeff(), 0.0);
}

TEST(Admm, ZeroInstanceAndBookkeeping) {
  const CrfInstance zero = oracle::unary_only(Matrix::Zero(3, 2));
  const auto r = solve(zero, config(SolverMethod::admm(), Regularizer::none(), StepsizeSchedule::constant(1), 7));
  EXPECT_EQ(r.trace.size(), 7u);
  for (const auto& x : r.trace.iterates) EXPECT_EQ(x, Matrix::Constant(3, 2, 0.5));
  for (std::size_t k = 0; k < r.trace.size(); ++k) {
    EXPECT_EQ(r.trace.records[k].k, static_cast<int>(k));
    EXPECT_TRUE(std::isnan(r.trace.records[k].alpha));
  }
}

TEST(Admm, PrimalResidualShrinks) {
  Rng rng(16);
  int shrinks = 0;
  for (int t = 0; t < 50; ++t) {
    const auto c = oracle::random_case(rng, static_cast<oracle::Backend>(t % 3), 6, 3);
    // 20 full iterations; iterates alternate x^1, z^1, x^2, z^2, ...
    const auto r = solve(c.inst, config(SolverMethod::admm(), Regularizer::none(), StepsizeSchedule::constant(1), 40));
    const auto& it = r.trace.iterates;
    const double first = (it[1] - it[2]).norm();
    const double last = (it[39] - it[40]).norm();
    if (last < first) ++shrinks;
  }
  EXPECT_GE(shrinks, 40);
}

TEST(Solvers, EveryIterateFeasible) {
  Rng rng(20);
  const std::vector<std::pair<SolverMethod, Regularizer>> methods = {
      {SolverMethod::vanilla_fw(), Regularizer::none()}, {SolverMethod::convex_fw(), Regularizer::none()},
      {SolverMethod::l2_fw(), Regularizer::l2(0.5)},     {SolverMethod::entropic_fw(), Regularizer::entropy(0.3)},
      {SolverMethod::mean_field(), Regularizer::none()}, {SolverMethod::damped_mean_field(0.3), Regularizer::none()},
      {SolverMethod::pgd(), Regularizer::none()},        {SolverMethod::fast_pgm(), Regularizer::none()},
      {SolverMethod::emd(), Regularizer::none()},        {SolverMethod::admm(2.0), Regularizer::none()}};
  const StepsizeSchedule schedules[] = {StepsizeSchedule::constant(1), StepsizeSchedule::harmonic(),
                                        StepsizeSchedule::line_search(), StepsizeSchedule::adaptive()};
  for (int t = 0; t < 6; ++t) {
    const auto c = oracle::random_case(rng, static_cast<oracle::Backend>(t % 3), 5, 4);
    for (const auto& [m, reg] : methods) {
      for (const auto& s : schedules) {
        SolverConfig cfg = config(m, reg, s, 12);
        const bool fw = m.is_frank_wolfe();
        if (!fw && s.kind != StepsizeSchedule::Kind::Constant && s.kind != StepsizeSchedule::Kind::Harmonic &&
            !(m.kind == SolverMethod::Kind::PGD && s.kind == StepsizeSchedule::Kind::LineSearch)) {
          continue;
        }
        const auto r = solve(c.inst, cfg);
        ASSERT_EQ(r.trace.size(), 12u);
        for (const auto& x : r.trace.iterates) {
          for (Eigen::Index i = 0; i < x.rows(); ++i) EXPECT_NEAR(x.row(i).sum(), 1.0, 1e-9) << m.name();
          EXPECT_GE(x.minCoeff(), -1e-12) << m.name();
        }
        for (const auto& rec : r.trace.records) EXPECT_TRUE(std::isfinite(rec.e_cont));
      }
    }
  }
}

TEST(Solvers, LineSearchNotWorseThanConstantSteps) {
  Rng rng(22);
  const std::vector<std::pair<SolverMethod, Regularizer>> methods = {
      {SolverMethod::vanilla_fw(), Regularizer::none()},
      {SolverMethod::l2_fw(), Regularizer::l2(0.8)},
      {SolverMethod::entropic_fw(), Regularizer::entropy(0.5)}};
  for (int t = 0; t < 30; ++t) {
    const auto c = oracle::random_case(rng, static_cast<oracle::Backend>(t % 3), 5, 3);
    for (const auto& [m, reg] : methods) {
      const auto base = solve(c.inst, config(m, reg, StepsizeSchedule::harmonic(), 3));
      // Take one step from each recorded iterate with each schedule.
      for (const auto& x : base.trace.iterates) {
        const Matrix g = gradient(c.inst, x);
        const Matrix p = regularized_direction(g, reg).values();
        const Matrix dir = p - x;
        SegmentModel seg{g.cwiseProduct(dir).sum(), dir.cwiseProduct(c.inst.quadratic_matvec(dir)).sum(), {}};
        if (!reg.is_none()) seg.extra = [&](double a) { return regularizer_value(reg, x + a * dir); };
        const double a = line_search(seg);
        const double f_ls = regularized_energy(c.inst, reg, x + a * dir);
        EXPECT_LE(f_ls, regularized_energy(c.inst, reg, p) + 1e-9);
        EXPECT_LE(f_ls, regularized_energy(c.inst, reg, x + 0.5 * dir) + 1e-9);
      }
    }
  }
}

TEST(Solvers, DecreaseBoundsHold) {
  Rng rng(24);
  for (int t = 0; t < 20; ++t) {
    const auto c = oracle::random_case(rng, static_cast<oracle::Backend>(t % 3), 6, 3);
    const double lip = lipschitz_upper_bound(c.inst);
    for (const auto& reg : {Regularizer::l2(1.5), Regularizer::entropy(0.8)}) {
      const SolverMethod m = reg.kind == Regularizer::Kind::L2 ? SolverMethod::l2_fw() : SolverMethod::entropic_fw();
      const double omega = reg.lambda / (lip + reg.lambda);
      for (const auto& s : {StepsizeSchedule::constant(std::min(1.0, 1.9 * omega)), StepsizeSchedule::adaptive(),
                            StepsizeSchedule::line_search()}) {
        SolverConfig cfg = config(m, reg, s, 25);
        cfg.decrease_bound_check = true;
        const auto r = solve(c.inst, cfg);
        EXPECT_EQ(r.trace.bound_violations(), 0u) << m.name() << " " << s.name();
        for (const auto& rec : r.trace.records) ASSERT_TRUE(rec.bound_held.has_value());
      }
    }
  }
}

TEST(Solvers, SublinearTrendForAdaptiveSteps) {
  Rng rng(26);
  for (int t = 0; t < 10; ++t) {
    const auto c = oracle::random_case(rng, static_cast<oracle::Backend>(t % 3), 6, 3);
    SolverConfig cfg = config(SolverMethod::l2_fw(), Regularizer::l2(1.0), StepsizeSchedule::adaptive(), 40);
    const auto r = solve(c.inst, cfg);
    const auto rep = sublinear_trend(r.trace, r.trace.params->omega);
    EXPECT_TRUE(rep.holds) << "first failure at " << rep.first_failure;
    EXPECT_DOUBLE_EQ(rep.delta0_hat, r.trace.params->delta0_hat);
  }
}

TEST(Solvers, TraceColumns) {
  Rng rng(27);
  const auto c = oracle::random_case(rng, oracle::Backend::Edges, 5, 3);
  SolverConfig cfg = config(SolverMethod::vanilla_fw(), Regularizer::none(), StepsizeSchedule::harmonic(), 4);
  cfg.record_discrete_energy = false;
  const auto r = solve(c.inst, cfg);
  ASSERT_EQ(r.trace.size(), 4u);
  EXPECT_FALSE(r.trace.initial_e_disc.has_value());
  for (const auto& rec : r.trace.records) {
    EXPECT_FALSE(rec.e_disc.has_value());
    EXPECT_TRUE(rec.s_k.has_value());
    EXPECT_FALSE(rec.bound_delta.has_value());
  }
  EXPECT_EQ(r.trace.records[0].alpha, 1.0);
  EXPECT_NEAR(r.trace.records[1].alpha, 2.0 / 3, 1e-15);
  const auto pgd = solve(c.inst, config(SolverMethod::pgd(), Regularizer::none(), StepsizeSchedule::constant(1), 2));
  EXPECT_FALSE(pgd.trace.records[0].s_k.has_value());
}

TEST(Solvers, OverflowIsReportedAsDivergence) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = i + 1; j < 4; ++j) edges.push_back({i, j, Matrix::Constant(2, 2, 1e308)});
  }
  const CrfInstance inst(Matrix::Zero(4, 2), EdgeList(edges, 4, 2));
  for (auto m : {SolverMethod::vanilla_fw(), SolverMethod::pgd(), SolverMethod::admm()}) {
    EXPECT_THROW(solve(inst, config(m, Regularizer::none(), StepsizeSchedule::constant(1), 3)), DivergedError);
  }
  EXPECT_THROW(mean_field_run(inst, 3), DivergedError);
}
