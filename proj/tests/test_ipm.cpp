#include "sqlp/ipm.hpp"

#include "sqlp/cones.hpp"
#include "sqlp/io.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

namespace {

using namespace sqlp;
using namespace sqlp::ipm;
using sqlp::test::Rng;

const std::string kData = SQLP_TEST_DATA;
constexpr double kInf = std::numeric_limits<double>::infinity();

Vector vec(std::initializer_list<double> d) {
  return Vector::Map(d.begin(), static_cast<Index>(d.size()));
}

BlockVec blocks(std::initializer_list<Matrix> b) {
  BlockVec v;
  v.blocks = b;
  return v;
}

Metrics metrics(double relgap, double pinf, double dinf, double gap = 1.0) {
  Metrics m;
  m.relgap = relgap;
  m.pinfeas = pinf;
  m.dinfeas = dinf;
  m.gap = gap;
  return m;
}

// ---------------------------------------------------------------------------

TEST(InitialPoint, TinyLinearData) {
  ProblemData p;
  p.specs = {{ConeKind::Lin, 1, 0.0}};
  p.m = 1;
  p.b = vec({0.01});
  p.c.blocks = {vec({0.01})};
  p.at = {Matrix::Constant(1, 1, 0.01)};
  const Point pt = initial_point(p);
  EXPECT_EQ(pt.x[0](0, 0), 10.0);
  EXPECT_EQ(pt.z[0](0, 0), 10.0);
  EXPECT_EQ(pt.y, Vector::Zero(1));
}

TEST(InitialPoint, ScalesWithConeAndData) {
  ProblemData p;
  p.specs = {{ConeKind::Sdp, 4, 0.0}, {ConeKind::Soc, 9, 0.0}, {ConeKind::Free, 2, 0.0}};
  p.m = 1;
  p.b = vec({1000});
  Matrix c0 = Matrix::Zero(4, 4);
  c0(0, 0) = 50.0;
  p.c.blocks = {c0, Vector::Zero(9), Vector::Zero(2)};
  Matrix a1 = Matrix::Zero(9, 1);
  a1(0, 0) = 2.0;
  p.at = {test::svec_oracle(Matrix::Identity(4, 4)), a1, Matrix::Ones(2, 1)};
  const Point pt = initial_point(p);
  // ‖a‖ = 2 in both blocks, so the ratio is 1001/3
  const double ratio = 1001.0 / 3.0;
  EXPECT_NEAR(pt.x[0](0, 0), 4 * ratio, 1e-10);
  EXPECT_TRUE(pt.x[0].isDiagonal(0.0));
  EXPECT_NEAR(pt.x[1](0, 0), 3 * ratio, 1e-10);
  EXPECT_TRUE(pt.x[1].bottomRows(8).isZero(0.0));
  EXPECT_EQ(pt.z[0], 50.0 * Matrix::Identity(4, 4));
  EXPECT_EQ(pt.z[1](0, 0), 10.0);
  EXPECT_TRUE(pt.x[2].isZero(0.0));
  EXPECT_TRUE(pt.z[2].isZero(0.0));
}

// ---------------------------------------------------------------------------

TEST(MaxStep, Examples) {
  EXPECT_DOUBLE_EQ(max_step_block({ConeKind::Lin, 2, 0.0}, vec({1, 2}), vec({-1, -4})), 0.5);
  EXPECT_EQ(max_step_block({ConeKind::Lin, 2, 0.0}, vec({1, 2}), vec({0, 3})), kInf);
  EXPECT_DOUBLE_EQ(max_step_block({ConeKind::Soc, 2, 0.0}, vec({1, 0}), vec({-1, 0})), 1.0);
  Matrix dv = Matrix::Zero(2, 2);
  dv(0, 0) = -2.0;
  dv(1, 1) = 1.0;
  EXPECT_NEAR(max_step_block({ConeKind::Sdp, 2, 0.0}, Matrix::Identity(2, 2), dv), 0.5, 1e-14);
  EXPECT_EQ(max_step_block({ConeKind::Sdp, 2, 0.0}, Matrix::Identity(2, 2), Matrix::Identity(2, 2)),
            kInf);
  EXPECT_EQ(max_step_block({ConeKind::Free, 2, 0.0}, vec({1, 2}), vec({-5, -5})), kInf);
}

TEST(MaxStep, SecondOrderCases) {
  const BlockSpec s{ConeKind::Soc, 3, 0.0};
  // moving inside the cone forever
  EXPECT_EQ(max_step_block(s, vec({2, 0, 0}), vec({1, 0.5, 0})), kInf);
  // along a ray towards the apex side: (2 − α, α) hits x₀ = |x̄| at α = 1
  EXPECT_NEAR(max_step_block(s, vec({2, 0, 0}), vec({-1, 1, 0})), 1.0, 1e-14);
  // a direction on the boundary ray (a = 0)
  EXPECT_NEAR(max_step_block(s, vec({2, 1, 0}), vec({-1, -1, 0})), 1.5, 1e-14);
}

TEST(MaxStep, BoundarySharpness) {
  Rng rng(1);
  for (ConeKind kind : {ConeKind::Sdp, ConeKind::Soc, ConeKind::Lin}) {
    int finite = 0;
    for (int trial = 0; trial < 50; ++trial) {
      const BlockSpec s{kind, kind == ConeKind::Soc ? test::uniform_int(rng, 2, 10) : test::uniform_int(rng, 1, 8), 0.0};
      const Matrix v = test::random_interior(s, rng);
      Matrix dv = kind == ConeKind::Sdp ? test::random_sym(s.dim, rng) : test::gaussian(s.dim, 1, rng);
      const double a = max_step_block(s, v, dv);
      ASSERT_GT(a, 0.0);
      if (!std::isfinite(a)) {
        EXPECT_GT(test::boundary_measure(v + 1e6 * dv, s), 0.0);
        continue;
      }
      ++finite;
      const double at = test::boundary_measure(v + a * dv, s);
      EXPECT_LE(std::abs(at), 1e-6) << to_string(kind);
      EXPECT_GT(test::boundary_measure(v + 0.999 * a * dv, s), 0.0);
    }
    EXPECT_GT(finite, 10);
  }
}

TEST(StepLengths, Examples) {
  const std::vector<BlockSpec> lin{{ConeKind::Lin, 2, 0.0}};
  const BlockVec x = blocks({vec({1, 2})});
  const BlockVec up = blocks({vec({1, 1})});
  Steps s = step_lengths(lin, x, up, x, up, 0.9);
  EXPECT_DOUBLE_EQ(s.primal, 0.9);
  EXPECT_DOUBLE_EQ(s.dual, 0.9);
  s = step_lengths(lin, x, blocks({vec({-1, -4})}), x, up, 0.99);
  EXPECT_DOUBLE_EQ(s.primal, 0.495);
  EXPECT_DOUBLE_EQ(s.dual, 0.99);

  const std::vector<BlockSpec> fr{{ConeKind::Free, 2, 0.0}};
  const BlockVec zero = blocks({vec({0, 0})});
  s = step_lengths(fr, blocks({vec({1, -1})}), blocks({vec({-3, 3})}), zero, zero, 0.95);
  EXPECT_DOUBLE_EQ(s.primal, 0.95);
  EXPECT_DOUBLE_EQ(s.dual, 0.95);
}

// ---------------------------------------------------------------------------

TEST(Centering, Examples) {
  const std::vector<BlockSpec> specs{{ConeKind::Lin, 1, 0.0}};
  const BlockVec x = blocks({vec({1})});
  const BlockVec z = blocks({vec({1})});
  const BlockVec dz = blocks({vec({0})});
  // r = 0.1, ψ = 3
  EXPECT_NEAR(centering_sigma(specs, x, z, blocks({vec({-0.9})}), dz, 1.0, 1.0, 1.0, 3.0), 1e-3, 1e-15);
  // r ≥ 1 is clamped
  EXPECT_EQ(centering_sigma(specs, x, z, blocks({vec({0.5})}), dz, 1.0, 1.0, 1.0, 3.0), 1.0);
  EXPECT_THROW(centering_sigma(specs, x, blocks({vec({0})}), x, dz, 1.0, 1.0, 1.0, 3.0), std::exception);
}

TEST(Centering, BarrierBlocksAreLeftOut) {
  const std::vector<BlockSpec> specs{{ConeKind::Lin, 1, 0.0}, {ConeKind::Lin, 1, 1.0}};
  const BlockVec x = blocks({vec({1}), vec({1})});
  const BlockVec z = blocks({vec({1}), vec({1})});
  const BlockVec dx = blocks({vec({-0.9}), vec({0})});
  const BlockVec dz = blocks({vec({0}), vec({0})});
  EXPECT_NEAR(centering_sigma(specs, x, z, dx, dz, 1.0, 1.0, 1.0, 3.0), 1e-3, 1e-15);
}

TEST(Centering, Exponent) {
  EXPECT_DOUBLE_EQ(centering_exponent(1.0, 1.0, 1.0, 3.0), 3.0);
  EXPECT_DOUBLE_EQ(centering_exponent(1.0, 0.1, 1.0, 2.0), 2.0);
  EXPECT_DOUBLE_EQ(centering_exponent(1.0, 1.0, 1.0, 2.0), 3.0);
  // small μ with short steps: the floor of 1 applies
  EXPECT_DOUBLE_EQ(centering_exponent(1e-7, 0.1, 0.2, 3.0), 1.0);
  EXPECT_DOUBLE_EQ(centering_exponent(1e-7, 0.9, 0.95, 3.0), 3.0 * 0.81);
  EXPECT_DOUBLE_EQ(centering_exponent(1e-7, 1.0, 1.0, 2.0), 2.0);
}

// ---------------------------------------------------------------------------

TEST(Infeasibility, Ratios) {
  ProblemData p;
  p.specs = {{ConeKind::Lin, 2, 0.0}};
  p.m = 1;
  p.b = vec({-1});
  p.c.blocks = {vec({1, 1})};
  p.at = {(Matrix(2, 1) << 1, 0).finished()};
  // y = −1, z = (1, 0): Aᵀy + z = 0 so the primal ratio denominator vanishes
  InfeasibilityRatios r = infeasibility_ratios(p, blocks({vec({0, 0})}), vec({-1}), blocks({vec({1, 0})}));
  EXPECT_EQ(r.primal, 0.0);
  EXPECT_EQ(r.dual, 0.0);
  r = infeasibility_ratios(p, blocks({vec({2, 1})}), vec({-1}), blocks({vec({2, 0})}));
  EXPECT_DOUBLE_EQ(r.primal, 1.0 / 1.0);
  EXPECT_DOUBLE_EQ(r.dual, -3.0 / 2.0);
}

TEST(Termination, Criteria) {
  const SolverOptions o;
  const History empty;
  const InfeasibilityRatios none;
  EXPECT_EQ(check_termination(metrics(1e-9, 1e-9, 1e-9), none, empty, 3, o), Status::Optimal);
  EXPECT_EQ(check_termination(metrics(1e-2, 1e-9, 1e-9), none, empty, 3, o), std::nullopt);
  EXPECT_EQ(check_termination(metrics(1, 1, 1), {2e10, 0}, empty, 3, o), Status::PrimalInfeasible);
  EXPECT_EQ(check_termination(metrics(1, 1, 1), {0, 2e10}, empty, 3, o), Status::DualInfeasible);
  EXPECT_EQ(check_termination(metrics(1, 1, 1), none, empty, 100, o), Status::MaxIter);
  EXPECT_EQ(check_termination(metrics(1, std::nan(""), 1), none, empty, 3, o),
            Status::NumericalFailure);
}

TEST(Termination, GapDivergence) {
  const SolverOptions o;
  History h;
  h.push(metrics(1e-3, 1e-6, 1e-6, 1e-2), 5);
  EXPECT_EQ(check_termination(metrics(1e-3, 1e-6, 1e-6, 20.0), {}, h, 3, o), Status::NumericalFailure);
  EXPECT_EQ(check_termination(metrics(1e-3, 1e-6, 1e-6, 5.0), {}, h, 3, o), std::nullopt);
  // far from feasibility the growth is not judged yet
  EXPECT_EQ(check_termination(metrics(1e-3, 1.0, 1e-6, 20.0), {}, h, 3, o), std::nullopt);
}

TEST(Termination, SlowProgress) {
  const SolverOptions o;
  History h;
  const double base = 1e-5;
  for (int i = 0; i < 5; ++i) h.push(metrics(base * (1 - 0.01 * i), 1e-6, 1e-6, 1.0), 5);
  EXPECT_EQ(check_termination(metrics(base * 0.95, 1e-6, 1e-6, 1.0), {}, h, 6, o),
            Status::SlowProgress);
  // one good step in the window keeps the run going
  History g;
  for (int i = 0; i < 5; ++i) g.push(metrics(base * (i == 2 ? 0.5 : 1.0), 1e-6, 1e-6, 1.0), 5);
  EXPECT_EQ(check_termination(metrics(base * 0.5, 1e-6, 1e-6, 1.0), {}, g, 6, o), std::nullopt);
  // and so do infeasibilities above √ε
  EXPECT_EQ(check_termination(metrics(base * 0.95, 1e-3, 1e-6, 1.0), {}, h, 6, o), std::nullopt);
}

// ---------------------------------------------------------------------------

TEST(Stabilize, Examples) {
  Vector xp = vec({3}), xm = vec({2}), zp = vec({1}), zm = vec({2});
  stabilize_split(xp, xm, zp, zm, 0.5);
  EXPECT_DOUBLE_EQ(xp(0), 1.4);
  EXPECT_DOUBLE_EQ(xm(0), 0.4);
  EXPECT_DOUBLE_EQ(zp(0), 1.05);
  EXPECT_DOUBLE_EQ(zm(0), 2.05);

  Vector a = vec({0, 1}), b = vec({4, 0}), c = vec({1, 1}), d = vec({1, 1});
  stabilize_split(a, b, c, d, 0.0);
  EXPECT_EQ(a, vec({0, 1}));
  EXPECT_EQ(b, vec({4, 0}));
}

TEST(Stabilize, DifferenceIsInvariant) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    Vector xp = test::random_positive(4, rng), xm = test::random_positive(4, rng);
    Vector zp = test::random_positive(4, rng), zm = test::random_positive(4, rng);
    const Vector diff = xp - xm;
    stabilize_split(xp, xm, zp, zm, 0.3);
    EXPECT_LE((xp - xm - diff).norm(), 1e-15);
    EXPECT_GT(xp.minCoeff(), 0.0);
    EXPECT_GT(xm.minCoeff(), 0.0);
  }
}

TEST(Stabilize, Pairs) {
  BlockVec x = blocks({vec({3, 5, 2})}), z = blocks({vec({1, 1, 1})});
  const std::vector<preprocess::VariablePair> pairs{{0, 0, 2}};
  stabilize_pairs(x, z, pairs, 1.0);
  EXPECT_LE((x[0] - vec({1.4, 5, 0.4})).norm(), 1e-15);
  EXPECT_LE((z[0] - vec({1.1, 1, 1.1})).norm(), 1e-15);
}

// ---------------------------------------------------------------------------

class Solve : public ::testing::TestWithParam<Direction> {
 protected:
  SolverOptions opts() const {
    SolverOptions o;
    o.direction = GetParam();
    return o;
  }
};

TEST_P(Solve, LinearToy) {
  const auto p = io::load_problem(kData + "/lp_toy.json", io::Format::Auto);
  const SolveResult r = solve(p, opts());
  ASSERT_EQ(r.status, Status::Optimal) << r.message;
  EXPECT_NEAR(r.x[0](0, 0), 1.0, 1e-6);
  EXPECT_NEAR(r.x[0](1, 0), 0.0, 1e-6);
  EXPECT_NEAR(r.pobj, 1.0, 1e-6);
  EXPECT_LT(r.relgap, 1e-8);
  EXPECT_EQ(r.factorizations, r.iterations);
}

TEST_P(Solve, SemidefiniteToy) {
  const auto p = io::load_problem(kData + "/sdp_toy.json", io::Format::Auto);
  const SolveResult r = solve(p, opts());
  ASSERT_EQ(r.status, Status::Optimal) << r.message;
  EXPECT_NEAR(r.pobj, 1.0, 1e-6);
  Matrix e11 = Matrix::Zero(2, 2);
  e11(0, 0) = 1.0;
  EXPECT_LE((r.x[0] - e11).norm(), 1e-5);
}

TEST_P(Solve, AppendixInstance) {
  const auto p = io::load_problem(kData + "/appendix_example.json", io::Format::Auto);
  SolverOptions o = opts();
  o.eps = 1e-9;
  const SolveResult r = solve(p, o);
  ASSERT_EQ(r.status, Status::Optimal) << r.message;
  EXPECT_LE(std::abs(r.pobj - r.dobj), 1e-6 * (1 + std::abs(r.pobj)));
  EXPECT_LE(r.iterations, 50);
  EXPECT_EQ(r.factorizations, r.iterations);
  // optimum reported by an independent conic solver at tolerance 1e-10
  EXPECT_NEAR(r.pobj, 10.948549353179592, 1e-6);
  for (std::size_t k = 0; k < p.specs.size(); ++k) {
    EXPECT_TRUE(cones::is_interior(r.x[k], p.specs[k]));
    EXPECT_TRUE(cones::is_interior(r.z[k], p.specs[k]));
  }
}

TEST_P(Solve, InfeasibleProblems) {
  const auto pi = io::load_problem(kData + "/infeasible_lp.json", io::Format::Auto);
  EXPECT_EQ(solve(pi, opts()).status, Status::PrimalInfeasible);
  const auto du = io::load_problem(kData + "/unbounded_lp.json", io::Format::Auto);
  EXPECT_EQ(solve(du, opts()).status, Status::DualInfeasible);
}

TEST_P(Solve, BarrierBlockReachesItsCenter) {
  ProblemData p;
  p.specs = {{ConeKind::Lin, 3, 1.0}};
  p.m = 1;
  p.b = vec({3});
  p.c.blocks = {vec({1, 2, 3})};
  p.at = {Matrix::Ones(3, 1)};
  SolverOptions o = opts();
  o.eps = 1e-10;
  const SolveResult r = solve(p, o);
  ASSERT_EQ(r.status, Status::Optimal) << r.message;
  const Vector xz = r.x[0].cwiseProduct(r.z[0]);
  EXPECT_LE((xz - Vector::Ones(3)).cwiseAbs().maxCoeff(), 1e-6);
  // per-coordinate xz − ν log(xz) − ν, which is zero at xz = ν = 1
  const double gap = (xz.array() - xz.array().log() - 1.0).sum();
  EXPECT_LE(std::abs(gap), 1e-6);
  // stationarity of ⟨c,x⟩ − Σ log x on x₁+x₂+x₃ = 3: cᵢ − 1/xᵢ = y
  for (Index i = 0; i < 3; ++i) {
    EXPECT_NEAR(p.c[0](i, 0) - 1.0 / r.x[0](i, 0), r.y(0), 1e-6);
  }
}

TEST_P(Solve, FreeVariablesAreRecovered) {
  // min x₁ + 2s s.t. x₁ + u = 1, u − s = 0.5, x₁, s ≥ 0, u free.
  // Eliminating u gives x₁ = 0.5 − s and objective 0.5 + s, so s = 0, u = 0.5.
  ProblemData p;
  p.specs = {{ConeKind::Lin, 2, 0.0}, {ConeKind::Free, 1, 0.0}};
  p.m = 2;
  p.b = vec({1, 0.5});
  p.c.blocks = {vec({1, 2}), vec({0})};
  p.at = {(Matrix(2, 2) << 1, 0, 0, -1).finished(), (Matrix(1, 2) << 1, 1).finished()};
  const SolveResult r = solve(p, opts());
  ASSERT_EQ(r.status, Status::Optimal) << r.message;
  EXPECT_NEAR(r.x[1](0, 0), 0.5, 1e-6);
  EXPECT_NEAR(r.x[0](0, 0), 0.5, 1e-6);
  EXPECT_NEAR(r.pobj, 0.5, 1e-6);
  EXPECT_TRUE(r.z[1].isZero(0.0));
}

TEST_P(Solve, RandomPlantedSuite) {
  Rng rng(100 + static_cast<int>(GetParam()));
  int optimal = 0;
  int mu_steps = 0, mu_down = 0;
  const int n = 30;
  for (int trial = 0; trial < n; ++trial) {
    const auto [specs, m] = test::random_structure(rng);
    const auto inst = test::planted(specs, m, rng, 0.5);
    SolverOptions o = opts();
    o.eps = 1e-7;
    o.max_iters = 50;
    const SolveResult r = solve(inst.problem, o);
    if (r.status == Status::Optimal) ++optimal;
    EXPECT_EQ(r.factorizations, r.iterations);
    for (std::size_t k = 0; k < specs.size(); ++k) {
      EXPECT_TRUE(cones::is_interior(r.x[k], specs[k]));
      EXPECT_TRUE(cones::is_interior(r.z[k], specs[k]));
    }
    for (std::size_t i = 1; i < r.trace.size(); ++i) {
      ++mu_steps;
      if (r.trace[i].mu <= r.trace[i - 1].mu) ++mu_down;
    }
  }
  EXPECT_GE(optimal, n - 1);
  EXPECT_GE(mu_down, 0.9 * mu_steps);
}

TEST_P(Solve, IterationLimitAndInvalidInput) {
  const auto p = io::load_problem(kData + "/appendix_example.json", io::Format::Auto);
  SolverOptions o = opts();
  o.max_iters = 2;
  const SolveResult r = solve(p, o);
  EXPECT_EQ(r.status, Status::MaxIter);
  EXPECT_EQ(r.iterations, 2);
  EXPECT_EQ(r.factorizations, 2);

  ProblemData bad = p;
  bad.b.resize(1);
  const SolveResult f = solve(bad, o);
  EXPECT_EQ(f.status, Status::NumericalFailure);
  EXPECT_FALSE(f.message.empty());
}

TEST_P(Solve, WithoutPreprocessing) {
  const auto p = io::load_problem(kData + "/appendix_example.json", io::Format::Auto);
  SolverOptions o = opts();
  const SolveResult a = solve(p, o);
  o.preprocess = false;
  const SolveResult b = solve(p, o);
  ASSERT_EQ(a.status, Status::Optimal);
  ASSERT_EQ(b.status, Status::Optimal);
  EXPECT_NEAR(a.pobj, b.pobj, 1e-6 * (1 + std::abs(a.pobj)));
}

INSTANTIATE_TEST_SUITE_P(Directions, Solve, ::testing::Values(Direction::Hkm, Direction::Nt),
                         [](const auto& info) { return std::string(to_string(info.param)); });

}  // namespace
