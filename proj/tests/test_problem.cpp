#include "support.hpp"

#include <gtest/gtest.h>

using namespace rasa;
using namespace rasa::testing;

TEST(Grad, ScalarQuadratic) {
  const auto f = ObjectiveSpec::quadratic(Matrix::Identity(1, 1), vec({0.0}));
  EXPECT_DOUBLE_EQ(grad(f, vec({3.0}))(0), 6.0);
}

TEST(Grad, GradientAtOriginIsLinearTerm) {
  const auto f = ObjectiveSpec::quadratic(Matrix::Identity(2, 2), vec({1.0, 1.0}));
  const Vector g = grad(f, vec({0.0, 0.0}));
  EXPECT_EQ(g, vec({1.0, 1.0}));
}

TEST(Grad, MatchesCentralDifferences) {
  CounterRng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 1 + static_cast<int>(rng.index(5));
    const auto f = ObjectiveSpec::quadratic(random_spd(rng, m, 0.5, 5.0), gaussian_vector(rng, m));
    const Vector x = gaussian_vector(rng, m, 3.0);
    const Vector g = grad(f, x);
    const double h = 1e-5;
    for (int c = 0; c < m; ++c) {
      Vector xp = x, xm = x;
      xp(c) += h;
      xm(c) -= h;
      const double fd = (value(f, xp) - value(f, xm)) / (2.0 * h);
      EXPECT_NEAR(fd, g(c), 1e-6 * (1.0 + std::abs(g(c))));
    }
  }
}

TEST(Grad, DimensionMismatchThrows) {
  const auto f = ObjectiveSpec::quadratic(Matrix::Identity(2, 2), vec({0.0, 0.0}));
  EXPECT_THROW(grad(f, vec({1.0})), InvalidArgument);
}

TEST(ObjectiveSpec, RejectsIndefiniteAndAsymmetric) {
  Matrix Q(2, 2);
  Q << 1.0, 0.0, 0.0, -1.0;
  EXPECT_THROW(ObjectiveSpec::quadratic(Q, vec({0, 0})), AssumptionViolated);
  Q << 1.0, 0.5, 0.0, 1.0;
  EXPECT_THROW(ObjectiveSpec::quadratic(Q, vec({0, 0})), AssumptionViolated);
}

TEST(ObjectiveSpec, LipschitzHintMustDominate) {
  const Matrix Q = Matrix::Identity(2, 2) * 3.0;
  EXPECT_DOUBLE_EQ(ObjectiveSpec::quadratic(Q, vec({0, 0})).lipschitz(), 6.0);
  EXPECT_NO_THROW(ObjectiveSpec::quadratic(Q, vec({0, 0}), 6.0));
  EXPECT_THROW(ObjectiveSpec::quadratic(Q, vec({0, 0}), 5.0), AssumptionViolated);
}

TEST(Project, BoxClamps) {
  const auto box = LocalSet::box(vec({0.0}), vec({2.0}));
  EXPECT_DOUBLE_EQ(project(box, vec({3.0}))(0), 2.0);
}

TEST(Project, MembersAreFixed) {
  CounterRng rng(3);
  for (auto kind : {SetKind::Unconstrained, SetKind::Box, SetKind::Polyhedron}) {
    const auto set = random_set(rng, 3, kind);
    const Vector x = random_member(rng, set);
    EXPECT_LT((project(set, x) - x).norm(), 1e-9);
  }
}

TEST(Project, PolyhedronMatchesGridSearch) {
  CounterRng rng(2024);
  const double step = 1e-3;
  for (int trial = 0; trial < 4; ++trial) {
    // Four random halfspaces around a point with slack in [0.3, 1.5].
    Matrix R(4, 2);
    Vector l(4);
    for (int j = 0; j < 4; ++j) {
      Vector r = gaussian_vector(rng, 2);
      r /= r.norm();
      R.row(j) = r.transpose();
      l(j) = rng.uniform(0.3, 1.5);
    }
    const auto set = LocalSet::polyhedron(R, l);
    const Vector y = vec({rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)});
    const Vector p = project(set, y);

    // The origin is feasible, so the nearest point lies within ‖y‖ of y.
    const double radius = y.norm();
    double best = std::numeric_limits<double>::infinity();
    Vector arg = Vector::Zero(2);
    const long cells = static_cast<long>(std::ceil(2.0 * radius / step));
    Vector g(2);
    for (long a = 0; a <= cells; ++a) {
      g(0) = y(0) - radius + a * step;
      for (long b = 0; b <= cells; ++b) {
        g(1) = y(1) - radius + b * step;
        if (((R * g - l).array() > 0.0).any()) continue;
        const double d = (g - y).squaredNorm();
        if (d < best) {
          best = d;
          arg = g;
        }
      }
    }
    EXPECT_LT((arg - p).norm(), 2e-3) << "trial " << trial;
  }
}

TEST(Project, SweepCapRaisesNumericalFailure) {
  Matrix R(2, 2);
  R << 1.0, 1.0, 1.0, -1.0;
  const auto set = LocalSet::polyhedron(R, vec({0.0, 0.0}));
  ProjectionOptions opts;
  opts.max_sweeps = 0;
  EXPECT_THROW(project(set, vec({5.0, 0.3}), opts), NumericalFailure);
}

TEST(ProjectProperties, NonExpansiveIdempotentVariational) {
  CounterRng rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const int m = 1 + static_cast<int>(rng.index(4));
    const auto kind = static_cast<SetKind>(rng.index(3));
    const auto set = random_set(rng, m, kind);
    const Vector y1 = gaussian_vector(rng, m, 4.0);
    const Vector y2 = gaussian_vector(rng, m, 4.0);
    const Vector p1 = project(set, y1);
    const Vector p2 = project(set, y2);
    EXPECT_LE((p1 - p2).norm(), (y1 - y2).norm() + 1e-9);
    EXPECT_LT((project(set, p1) - p1).norm(), 1e-9);
    EXPECT_TRUE(contains(set, p1, 1e-9));
    for (int w = 0; w < 5; ++w) {
      const Vector member = random_member(rng, set, 4.0);
      EXPECT_LE((y1 - p1).dot(member - p1), 1e-8);
    }
  }
}

TEST(Contains, Examples) {
  const auto unit = LocalSet::box(vec({0.0}), vec({1.0}));
  EXPECT_TRUE(contains(unit, vec({0.5}), 0.0));
  EXPECT_TRUE(contains(unit, vec({1.0 + 1e-12}), 1e-9));
  const auto half = LocalSet::polyhedron(Matrix::Identity(1, 1), vec({0.0}));
  EXPECT_FALSE(contains(half, vec({0.1}), 1e-9));
  EXPECT_THROW(contains(unit, vec({0.5}), -1.0), InvalidArgument);
}

TEST(Polyhedron, EmptyInteriorIsRejected) {
  Matrix R(2, 1);
  R << 1.0, -1.0;
  EXPECT_THROW(LocalSet::polyhedron(R, vec({0.0, -1.0})), AssumptionViolated);  // x ≤ 0 and x ≥ 1
  EXPECT_THROW(LocalSet::polyhedron(R, vec({0.0, 0.0})), AssumptionViolated);   // the point {0}
}

TEST(Polyhedron, CertifiedInteriorHasSlack) {
  CounterRng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const auto set = random_set(rng, 3, SetKind::Polyhedron);
    const auto& p = std::get<Polyhedron>(set.kind());
    EXPECT_GT(p.slack, kInteriorSlack);
    const Vector s = (p.l - p.R * p.interior).cwiseQuotient(p.R.rowwise().norm());
    EXPECT_NEAR(s.minCoeff(), p.slack, 1e-12);
  }
}

TEST(StationarityResidual, InteriorStationaryPointIsZero) {
  AgentSpec a{ObjectiveSpec::quadratic(Matrix::Identity(2, 2), vec({1.0, -1.0})), LocalSet::unconstrained(2),
              vec({0, 0})};
  const Vector x = vec({0.3, 0.7});
  EXPECT_NEAR(stationarity_residual(a, x, grad(a.objective, x)), 0.0, 1e-15);
}

TEST(StationarityResidual, NormalConeAbsorbsMultiplier) {
  AgentSpec a{ObjectiveSpec::quadratic(Matrix::Identity(1, 1), vec({0.0})), LocalSet::box(vec({0.0}), vec({1.0})),
              vec({0.0})};
  EXPECT_DOUBLE_EQ(stationarity_residual(a, vec({0.0}), vec({-1.0})), 0.0);
}

TEST(StationarityResidual, HandComputedValue) {
  // f(x) = x², Ω = [0, 1], x = 0.5, λ = 3: x − P(x − (2x − λ)) = 0.5 − P(2.5) = −0.5.
  AgentSpec a{ObjectiveSpec::quadratic(Matrix::Identity(1, 1), vec({0.0})), LocalSet::box(vec({0.0}), vec({1.0})),
              vec({0.0})};
  EXPECT_DOUBLE_EQ(stationarity_residual(a, vec({0.5}), vec({3.0})), 0.5);
}

TEST(RandomInstance, ShapeAndDeterminism) {
  const auto a = random_instance(1, 10, 3);
  const auto b = random_instance(1, 10, 3);
  ASSERT_EQ(a.n, 10);
  ASSERT_EQ(a.m, 3);
  ASSERT_EQ(a.agents.size(), 10u);
  for (int i = 0; i < a.n; ++i) {
    EXPECT_EQ(a.agents[i].objective.as_quadratic()->Q, b.agents[i].objective.as_quadratic()->Q);
    EXPECT_EQ(a.agents[i].objective.as_quadratic()->c, b.agents[i].objective.as_quadratic()->c);
    EXPECT_EQ(a.agents[i].resource, b.agents[i].resource);
  }
  const auto c = random_instance(2, 10, 3);
  EXPECT_NE(a.agents[0].resource, c.agents[0].resource);
}

TEST(RandomInstance, SpectraAndFeasibleAllocation) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto kind = seed % 2 ? SetKind::Box : SetKind::Polyhedron;
    const auto p = random_instance(seed, 3, 2, kind);
    for (const auto& a : p.agents) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(a.objective.as_quadratic()->Q);
      EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
      EXPECT_GE(es.eigenvalues().minCoeff(), 0.5 - 1e-9);
      EXPECT_LE(es.eigenvalues().maxCoeff(), 5.0 + 1e-9);
      // X = D is a feasible coupled allocation.
      EXPECT_TRUE(contains(a.set, a.resource, 0.0));
    }
  }
}

TEST(ProblemSpec, ValidateCatchesDimensionErrors) {
  auto p = random_instance(4, 3, 2);
  p.agents[1].resource = vec({1.0});
  EXPECT_THROW(p.validate(), InvalidArgument);
  auto q = random_instance(4, 3, 2);
  q.n = 1;
  EXPECT_THROW(q.validate(), InvalidArgument);
}
