#include "support.hpp"

#include <gtest/gtest.h>

using namespace rasa;
using namespace rasa::testing;

namespace {

NoiseConfig gaussian_everywhere(double s) {
  NoiseConfig nc;
  nc.gradient.kind = GradientNoise::Kind::Gaussian;
  nc.gradient.sigma = s;
  nc.resource = s;
  nc.channel_lambda = s;
  nc.channel_z = s;
  return nc;
}

NetworkState random_state(CounterRng& rng, const ProblemSpec& p) {
  auto s = NetworkState::zeros(p.n, p.m);
  for (int i = 0; i < p.n; ++i) s.X.row(i) = random_member(rng, p.agents[i].set).transpose();
  for (auto& v : s.Lambda.reshaped()) v = rng.normal();
  for (auto& v : s.Z.reshaped()) v = rng.normal();
  return s;
}

GraphSample graph_of(const Matrix& A) { return GraphSample{static_cast<int>(A.rows()), A, laplacian(A)}; }

}  // namespace

TEST(StepSize, Examples) {
  EXPECT_DOUBLE_EQ(step_size(StepSchedule::power(1.0, 0.6), 0), 1.0);
  EXPECT_NEAR(step_size(StepSchedule::power(1.0, 0.6), 999), std::pow(1000.0, -0.6), 1e-15);
  EXPECT_NEAR(step_size(StepSchedule::power(1.0, 0.6), 999), 0.01585, 1e-5);
  EXPECT_DOUBLE_EQ(step_size(StepSchedule::constant(0.01), 12345), 0.01);
  EXPECT_FALSE(StepSchedule::constant(0.01).convergent());
  EXPECT_TRUE(StepSchedule::power(2.0, 1.0).convergent());
}

TEST(StepSize, PowerScheduleDomain) {
  EXPECT_THROW(StepSchedule::power(1.0, 0.5), InvalidArgument);
  EXPECT_THROW(StepSchedule::power(1.0, 1.1), InvalidArgument);
  EXPECT_THROW(StepSchedule::power(0.0, 0.6), InvalidArgument);
  EXPECT_THROW(step_size(StepSchedule::power(1.0, 0.6), -1), InvalidArgument);
}

TEST(SaStep, PointwiseFixedPointOnEmptyGraph) {
  const auto p = random_instance(3, 4, 2, SetKind::Unconstrained);
  auto s = NetworkState::zeros(p.n, p.m);
  s.X = p.resources();
  for (int i = 0; i < p.n; ++i) s.Lambda.row(i) = grad(p.agents[i].objective, s.X.row(i).transpose()).transpose();
  CounterRng rng(1);
  for (auto& v : s.Z.reshaped()) v = rng.normal();
  const auto next = sa_step(s, p, graph_of(Matrix::Zero(p.n, p.n)), NoiseDraw::zeros(p.n, p.m), 0.7);
  EXPECT_LT((next.X - s.X).norm(), 1e-15);
  EXPECT_LT((next.Lambda - s.Lambda).norm(), 1e-15);
  EXPECT_EQ(next.Z, s.Z);
  EXPECT_EQ(next.k, s.k + 1);
}

TEST(SaStep, ConstructedEquilibriumIsFixedUnderMeanGraph) {
  const auto inst = demand_response_instance(5);
  const auto model = GraphModel::erdos_renyi_pool(10, 30, 0.05, 0.1, 8);
  const auto g = mean_graph(model);
  const auto eq = equilibrium_construct(inst.problem, g.laplacian, inst.oracle.X_star, inst.oracle.lambda_star);
  const auto next = sa_step(eq.state, inst.problem, g, NoiseDraw::zeros(10, 3), 1.0);
  EXPECT_LT(std::sqrt(next.squared_distance(eq.state)), 1e-12);
}

TEST(SaStep, HandComputedTwoAgentUpdate) {
  // f₁ = x², Ω₁ = [0.5, 2]; f₂ = 2x² + x, Ω₂ = ℝ; complete graph; α = 0.5.
  ProblemSpec p = tiny_problem(1.0, 0.0, 2.0, 1.0, 0.3, 0.4, LocalSet::box(vec({0.5}), vec({2.0})),
                               LocalSet::unconstrained(1));
  NetworkState s = NetworkState::zeros(2, 1);
  s.X << 1.0, -1.0;
  s.Lambda << 0.5, 0.0;
  s.Z << 0.2, -0.1;
  auto d = NoiseDraw::zeros(2, 1);
  d.nu << 0.1, -0.2;
  d.delta << 0.05, 0.0;
  d.zeta[0](1, 0) = 0.3;   // λ₂ as received by agent 1
  d.zeta[1](0, 0) = -0.1;  // λ₁ as received by agent 2
  d.eps[0](1, 0) = 0.02;
  const auto next = sa_step(s, p, graph_of(complete(2)), d, 0.5);
  // x₁: 1 + 0.5(−2.1 + 0.5) = 0.2 → clamped to 0.5; x₂: −1 + 0.5(3.2) = 0.6.
  EXPECT_NEAR(next.X(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(next.X(1, 0), 0.6, 1e-15);
  // λ₁: 0.5 + 0.5(0.35 − 1 − 0.2 − 0.28); λ₂: 0.5(0.4 + 1 + 0.4 + 0.3).
  EXPECT_NEAR(next.Lambda(0, 0), -0.065, 1e-15);
  EXPECT_NEAR(next.Lambda(1, 0), 1.05, 1e-15);
  // z₁: 0.2 + 0.5·0.2; z₂: −0.1 + 0.5·(−0.4).
  EXPECT_NEAR(next.Z(0, 0), 0.3, 1e-15);
  EXPECT_NEAR(next.Z(1, 0), -0.3, 1e-15);
}

TEST(SaStep, MatchesCompactProjectedForm) {
  const auto inst = demand_response_instance(2);
  const auto& p = inst.problem;
  const auto model = GraphModel::erdos_renyi_pool(10, 30, 0.05, 0.1, 4);
  const Matrix Lbar = mean_laplacian(model);
  const PathStream stream(99);
  CounterRng rng(10);
  for (int k = 0; k < 20; ++k) {
    auto s = random_state(rng, p);
    s.k = k;
    auto grng = stream.at(k, Channel::Graph);
    const auto g = sample_graph(model, grng);
    const auto draw = draw_noise(inst.spec.noise, s, g, stream);
    const double alpha = 0.3;
    const auto direct = sa_step(s, p, g, draw, alpha);

    const auto J = drift(s, p, Lbar);
    const auto xi = aggregate_noise(s, g, draw, Lbar);
    NetworkState compact;
    compact.X.resize(p.n, p.m);
    for (int i = 0; i < p.n; ++i) {
      const Vector y = (s.X.row(i) + alpha * (J.dX.row(i) + xi.X.row(i))).transpose();
      compact.X.row(i) = project(p.agents[i].set, y).transpose();
    }
    compact.Lambda = s.Lambda + alpha * (J.dLambda + xi.Lambda);
    compact.Z = s.Z + alpha * (J.dZ + xi.Z);
    EXPECT_LT((direct.X - compact.X).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((direct.Lambda - compact.Lambda).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((direct.Z - compact.Z).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(SaStep, SharedChannelDrawCancelsInLambdaPlusZ) {
  // λ⁺ − λ + z⁺ − z = α(d + δ − x − (LZ − ε)): ζ enters both lines with opposite signs.
  const auto p = random_instance(6, 5, 2);
  CounterRng rng(3);
  const auto s = random_state(rng, p);
  const auto g = graph_of(ring(5));
  auto d = NoiseDraw::zeros(5, 2);
  for (auto& z : d.zeta)
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j)
        if (g.adjacency(&z - d.zeta.data(), j) != 0.0) z.row(j) = gaussian_vector(rng, 2).transpose();
  const double alpha = 0.2;
  const auto next = sa_step(s, p, g, d, alpha);
  const AgentMatrix lhs = next.Lambda - s.Lambda + next.Z - s.Z;
  const AgentMatrix rhs = alpha * (p.resources() - s.X - g.laplacian * s.Z);
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SaStep, InvalidArguments) {
  const auto p = random_instance(6, 3, 2);
  const auto s = default_initial_state(p);
  EXPECT_THROW(sa_step(s, p, graph_of(ring(3)), NoiseDraw::zeros(3, 2), 0.0), InvalidArgument);
  EXPECT_THROW(sa_step(s, p, graph_of(ring(4)), NoiseDraw::zeros(4, 2), 0.1), InvalidArgument);
}

TEST(SaStep, ConservationOnUndirectedGraphs) {
  const auto p = random_instance(11, 6, 3, SetKind::Polyhedron);
  const auto model = GraphModel::erdos_renyi_pool(6, 10, 0.2, 0.5, 2);
  const PathStream stream(5);
  CounterRng rng(7);
  auto s = random_state(rng, p);
  for (long k = 0; k < 200; ++k) {
    auto grng = stream.at(k, Channel::Graph);
    const auto g = sample_graph(model, grng);
    const double alpha = step_size(StepSchedule::power(1.0, 0.6), k);
    const auto next = sa_step(s, p, g, NoiseConfig::none(), alpha, stream);
    const Eigen::RowVectorXd dz = next.Z.colwise().sum() - s.Z.colwise().sum();
    EXPECT_LT(dz.cwiseAbs().maxCoeff(), 1e-12);
    const Eigen::RowVectorXd dlz = (next.Lambda + next.Z).colwise().sum() - (s.Lambda + s.Z).colwise().sum();
    const Eigen::RowVectorXd expected = alpha * (p.resources() - s.X).colwise().sum();
    EXPECT_LT((dlz - expected).cwiseAbs().maxCoeff(), 1e-12);
    for (int i = 0; i < p.n; ++i) EXPECT_TRUE(contains(p.agents[i].set, next.X.row(i).transpose(), 1e-9));
    s = next;
  }
}

TEST(Noise, ChannelsAreZeroMeanWithConfiguredVariance) {
  const double sigma = 0.7;
  const auto nc = gaussian_everywhere(sigma);
  const auto p = random_instance(1, 2, 1, SetKind::Unconstrained);
  const auto g = graph_of(complete(2));
  const PathStream stream(2718);
  auto s = default_initial_state(p);
  const int N = 100000;
  double sum[4] = {}, sq[4] = {};
  for (int k = 0; k < N; ++k) {
    s.k = k;
    const auto d = draw_noise(nc, s, g, stream);
    const double v[4] = {d.nu(0, 0), d.delta(0, 0), d.zeta[0](1, 0), d.eps[0](1, 0)};
    for (int c = 0; c < 4; ++c) {
      sum[c] += v[c];
      sq[c] += v[c] * v[c];
    }
  }
  for (int c = 0; c < 4; ++c) {
    EXPECT_LT(std::abs(sum[c] / N), 4.0 * sigma / std::sqrt(N)) << "channel " << c;
    EXPECT_NEAR(sq[c] / N, sigma * sigma, 0.1 * sigma * sigma) << "channel " << c;
  }
}

TEST(Noise, AbsentEdgesCarryNoChannelNoise) {
  const auto p = random_instance(1, 4, 2);
  const auto g = graph_of(ring(4));
  const auto d = draw_noise(gaussian_everywhere(1.0), default_initial_state(p), g, PathStream(1));
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (g.adjacency(i, j) == 0.0) {
        EXPECT_EQ(d.zeta[i].row(j).norm(), 0.0);
        EXPECT_EQ(d.eps[i].row(j).norm(), 0.0);
      } else {
        EXPECT_GT(d.zeta[i].row(j).norm(), 0.0);
      }
}

TEST(Noise, SampledQuadraticEnvelope) {
  const int m = 3;
  const double sp = std::sqrt(0.5), st = std::sqrt(0.5);
  const double c = sampled_quadratic_envelope(m, sp, st);
  EXPECT_DOUBLE_EQ(c, std::max(4.0 * m * 0.5, m * 0.5));
  NoiseConfig nc;
  nc.gradient.kind = GradientNoise::Kind::SampledQuadratic;
  nc.gradient.sigma_psi = sp;
  nc.gradient.sigma_theta = st;
  const auto p = random_instance(1, 2, m, SetKind::Unconstrained);
  const auto g = graph_of(complete(2));
  for (double r : {0.0, 1.0, 10.0}) {
    auto s = NetworkState::zeros(2, m);
    s.X.row(0) = Vector::Constant(m, r / std::sqrt(m)).transpose();
    const int N = 100000;
    double sq = 0.0;
    Vector mean = Vector::Zero(m);
    for (int k = 0; k < N; ++k) {
      s.k = k;
      const auto d = draw_noise(nc, s, g, PathStream(31));
      sq += d.nu.row(0).squaredNorm();
      mean += d.nu.row(0).transpose();
    }
    const double x2 = r * r;
    const double exact = 4.0 * m * sp * sp * x2 + m * st * st;  // E‖2Ψx + θ‖²
    EXPECT_NEAR(sq / N, exact, 0.1 * exact) << "‖x‖ = " << r;
    EXPECT_LE(sq / N, c * (1.0 + x2)) << "‖x‖ = " << r;
    const double sd = std::sqrt(exact / m / N);
    EXPECT_LT((mean / N).cwiseAbs().maxCoeff(), 4.0 * sd) << "‖x‖ = " << r;
  }
}

TEST(Noise, ConditionalMeanDoesNotDependOnState) {
  // Regress ν on x across varying states; the slope must vanish.
  const auto p = random_instance(1, 2, 1, SetKind::Unconstrained);
  const auto g = graph_of(complete(2));
  NoiseConfig sq;
  sq.gradient.kind = GradientNoise::Kind::SampledQuadratic;
  sq.gradient.sigma_psi = sq.gradient.sigma_theta = std::sqrt(0.5);
  for (const auto& nc : {gaussian_everywhere(1.0), sq}) {
    CounterRng rng(8);
    const int N = 50000;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::vector<double> xs(N), ys(N);
    for (int k = 0; k < N; ++k) {
      auto s = NetworkState::zeros(2, 1);
      s.k = k;
      s.X(0, 0) = rng.uniform(-2.0, 2.0);
      const auto d = draw_noise(nc, s, g, PathStream(77));
      xs[k] = s.X(0, 0);
      ys[k] = d.nu(0, 0);
      sx += xs[k];
      sy += ys[k];
      sxx += xs[k] * xs[k];
      sxy += xs[k] * ys[k];
    }
    const double slope = (sxy - sx * sy / N) / (sxx - sx * sx / N);
    const double intercept = sy / N - slope * sx / N;
    double rss = 0;
    for (int k = 0; k < N; ++k) rss += std::pow(ys[k] - intercept - slope * xs[k], 2);
    const double se = std::sqrt(rss / (N - 2) / (sxx - sx * sx / N));
    EXPECT_LT(std::abs(slope), 4.0 * se);
  }
}

TEST(NoiseConfig, Validation) {
  NoiseConfig nc;
  EXPECT_TRUE(nc.noiseless());
  nc.resource = -1.0;
  EXPECT_THROW(nc.validate(), InvalidArgument);
  EXPECT_FALSE(nc.noiseless());
}

TEST(RunPath, RecordCountAndDeterminism) {
  const auto p = random_instance(2, 4, 2);
  const auto model = GraphModel::erdos_renyi_pool(4, 5, 0.3, 0.6, 1);
  RunConfig rc;
  rc.iterations = 95;
  rc.cadence = 10;
  const auto a = run_path(p, model, gaussian_everywhere(0.5), StepSchedule::power(1, 0.6), rc, 17);
  const auto b = run_path(p, model, gaussian_everywhere(0.5), StepSchedule::power(1, 0.6), rc, 17);
  EXPECT_EQ(a.trace.records.size(), 10u);
  EXPECT_EQ(trace_to_csv(a.trace), trace_to_csv(b.trace));
  EXPECT_EQ(a.final_metrics.k, 95);
  EXPECT_FALSE(a.trace.records[0].dist.has_value());
  const auto c = run_path(p, model, gaussian_everywhere(0.5), StepSchedule::power(1, 0.6), rc, 18);
  EXPECT_NE(trace_to_csv(a.trace), trace_to_csv(c.trace));
}

TEST(RunPath, ZeroIterationsRejected) {
  const auto p = random_instance(2, 3, 1);
  RunConfig rc;
  rc.iterations = 0;
  EXPECT_THROW(run_path(p, GraphModel::gossip(3), NoiseConfig::none(), StepSchedule::power(1, 0.6), rc, 1),
               InvalidArgument);
}

TEST(RunPath, DivergenceGuardNamesIteration) {
  const auto p = random_instance(2, 3, 1);
  RunConfig rc;
  rc.iterations = 100;
  rc.divergence_guard = 1e-3;
  try {
    run_path(p, GraphModel::gossip(3), NoiseConfig::none(), StepSchedule::power(1, 0.6), rc, 1);
    FAIL() << "expected Diverged";
  } catch (const Diverged& d) {
    EXPECT_EQ(d.iteration(), 1);
  }
}

TEST(RunPath, NoiselessFixedGraphConverges) {
  const auto p = random_instance(21, 5, 2);
  const auto sol = solve_dual(p);
  RunConfig rc;
  rc.iterations = 50000;
  rc.cadence = 50000;
  const auto r = run_path(p, GraphModel::fixed_pool({ring(5)}), NoiseConfig::none(), StepSchedule::power(1, 0.6), rc,
                          3, &sol.X_star);
  EXPECT_LT(*r.final_metrics.dist / *r.trace.records[0].dist, 1e-2);
}

TEST(Trace, CsvRoundTripIsExact) {
  Trace t;
  t.cadence = 1;
  Metrics m;
  m.k = 3;
  m.alpha = 1.0 / 3.0;
  m.dist = std::nextafter(0.1, 1.0);
  m.obj = -1e-300;
  m.consensus = 12345.678901234567;
  m.balance = 0.0;
  m.state_norm = 1e300;
  t.records = {m, m};
  t.records[1].dist.reset();
  const auto csv = trace_to_csv(t);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kTraceHeader);
  const auto back = trace_from_csv(csv);
  ASSERT_EQ(back.records.size(), 2u);
  EXPECT_EQ(*back.records[0].dist, *m.dist);
  EXPECT_EQ(back.records[0].obj, m.obj);
  EXPECT_EQ(back.records[0].consensus, m.consensus);
  EXPECT_FALSE(back.records[1].dist.has_value());
  EXPECT_EQ(trace_to_csv(back), csv);
  EXPECT_THROW(trace_from_csv("k,alpha\n1,2\n"), ConfigError);
}

TEST(MonteCarlo, SinglePathEqualsRunPath) {
  const auto p = random_instance(2, 4, 2);
  const auto model = GraphModel::erdos_renyi_pool(4, 5, 0.3, 0.6, 1);
  RunConfig rc;
  rc.iterations = 200;
  const auto mc = monte_carlo(p, model, gaussian_everywhere(0.5), StepSchedule::power(1, 0.6), rc, 1, 9);
  const auto r = run_path(p, model, gaussian_everywhere(0.5), StepSchedule::power(1, 0.6), rc, path_key(9, 0));
  EXPECT_EQ(trace_to_csv(mc.mean_trace), trace_to_csv(r.trace));
  EXPECT_EQ(mc.path_seeds[0], path_key(9, 0));
}

TEST(MonteCarlo, MeanTraceIsPathAverageAndThreadIndependent) {
  const auto p = random_instance(2, 4, 2);
  const auto sol = solve_dual(p);
  const auto model = GraphModel::erdos_renyi_pool(4, 5, 0.3, 0.6, 1);
  RunConfig rc;
  rc.iterations = 300;
  rc.cadence = 7;
  rc.tracked = {{0, 0}, {3, 1}};
  const int paths = 6;
  const auto nc = gaussian_everywhere(0.5);
  const auto sched = StepSchedule::power(1, 0.6);
  const auto one = monte_carlo(p, model, nc, sched, rc, paths, 4, &sol.X_star, 1);
  const auto four = monte_carlo(p, model, nc, sched, rc, paths, 4, &sol.X_star, 4);
  EXPECT_EQ(trace_to_csv(one.mean_trace), trace_to_csv(four.mean_trace));
  EXPECT_EQ(one.mean_tracked, four.mean_tracked);

  std::vector<PathResult> runs;
  for (int q = 0; q < paths; ++q) runs.push_back(run_path(p, model, nc, sched, rc, path_key(4, q), &sol.X_star));
  for (std::size_t r = 0; r < one.mean_trace.records.size(); ++r) {
    double dist = 0.0, tracked = 0.0;
    for (const auto& run : runs) {
      dist += *run.trace.records[r].dist;
      tracked += run.tracked[r][1];
    }
    EXPECT_NEAR(*one.mean_trace.records[r].dist, dist / paths, 1e-12);
    EXPECT_NEAR(one.mean_tracked[r][1], tracked / paths, 1e-12);
  }
}

TEST(MonteCarlo, DivergedPathsAreCountedAndExcluded) {
  const auto p = random_instance(2, 3, 1, SetKind::Unconstrained);
  RunConfig rc;
  rc.iterations = 50;
  rc.divergence_guard = 1e3;
  // A constant step far beyond the stability range blows up every path.
  const auto mc = monte_carlo(p, GraphModel::gossip(3), gaussian_everywhere(1.0), StepSchedule::constant(5.0), rc, 3, 1);
  EXPECT_EQ(mc.diverged.size(), 3u);
  for (const auto& f : mc.finals) EXPECT_FALSE(f.has_value());
}

TEST(Summarize, Quantiles) {
  const auto q = summarize({4.0, 1.0, 3.0, 2.0, 5.0});
  EXPECT_DOUBLE_EQ(q.mean, 3.0);
  EXPECT_DOUBLE_EQ(q.median, 3.0);
  EXPECT_DOUBLE_EQ(q.p90, 4.6);
}
