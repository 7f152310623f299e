#include "rasa/oracle.hpp"

#include <cmath>
#include <limits>

namespace rasa {

Vector inner_min(const AgentSpec& agent, const Vector& lambda, double tol,
                 const Vector* warm_start, long max_iter) {
  require(tol > 0.0, "inner_min: tol must be positive");
  require(lambda.size() == agent.dim(), "inner_min: lambda dimension mismatch");
  const double L = agent.objective.lipschitz();
  require(L > 0.0, "inner_min: Lipschitz constant must be positive");
  const double step = 1.0 / L;

  Vector x = warm_start ? project(agent.set, *warm_start)
                        : project(agent.set, Vector::Zero(agent.dim()));
  double residual = std::numeric_limits<double>::infinity();
  for (long it = 0; it < max_iter; ++it) {
    const Vector next = project(agent.set, x - step * (grad(agent.objective, x) - lambda));
    residual = (next - x).norm();
    x = next;
    if (residual < tol) return x;
  }
  throw ConvergenceFailure("inner_min: iteration cap exceeded", residual);
}

KktReport kkt_check(const ProblemSpec& problem, const AgentMatrix& X, const Vector& lambda,
                    double tol) {
  require(X.rows() == problem.n && X.cols() == problem.m, "kkt_check: X has wrong shape");
  require(lambda.size() == problem.m, "kkt_check: lambda has wrong size");
  KktReport r;
  r.all_agents_active = true;
  for (int i = 0; i < problem.n; ++i) {
    const auto& a = problem.agents[i];
    const Vector x = X.row(i).transpose();
    const double viol = violation(a.set, x);
    r.membership = std::max(r.membership, viol);
    const double s = stationarity_residual(a, x, lambda);
    r.stationarity_per_agent.push_back(s);
    r.stationarity = std::max(r.stationarity, s);
    // Boundary test: a step of 1e-7 in some coordinate direction leaves the set.
    bool on_boundary = false;
    for (int c = 0; c < problem.m && !on_boundary; ++c)
      for (double sign : {-1.0, 1.0}) {
        Vector probe = x;
        probe(c) += sign * 1e-7;
        if (violation(a.set, probe) > 0.0) {
          on_boundary = true;
          break;
        }
      }
    r.all_agents_active = r.all_agents_active && on_boundary;
  }
  r.balance = (X.colwise().sum().transpose() - problem.total_resource()).norm();
  r.passed = r.stationarity < tol && r.balance < tol && r.membership < tol;
  return r;
}

DualValue dual_value(const ProblemSpec& problem, const Vector& lambda, double inner_tol,
                     const AgentMatrix* warm_start) {
  DualValue out;
  out.X.resize(problem.n, problem.m);
  out.value = lambda.dot(problem.total_resource());
  for (int i = 0; i < problem.n; ++i) {
    const auto& a = problem.agents[i];
    Vector warm;
    if (warm_start) warm = warm_start->row(i).transpose();
    const Vector x = inner_min(a, lambda, inner_tol, warm_start ? &warm : nullptr);
    out.X.row(i) = x.transpose();
    out.value += value(a.objective, x) - lambda.dot(x);
  }
  return out;
}

OracleSolution solve_dual(const ProblemSpec& problem, const DualOptions& options) {
  problem.validate();
  require(options.tol > 0.0 && options.inner_tol > 0.0, "solve_dual: tolerances must be positive");

  Vector lambda = options.initial_lambda.size() == problem.m ? options.initial_lambda
                                                             : Vector::Zero(problem.m);
  const Vector total = problem.total_resource();
  DualValue cur = dual_value(problem, lambda, options.inner_tol);
  Vector ascent = total - cur.X.colwise().sum().transpose();

  // The dual gradient is Lipschitz with constant Σ_i 1/μ_i (μ_i the strong
  // convexity modulus); its inverse is a safe first step.
  double lip_sum = 0.0;
  for (const auto& a : problem.agents) {
    if (const auto* q = a.objective.as_quadratic()) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(q->Q, Eigen::EigenvaluesOnly);
      lip_sum += 1.0 / (2.0 * es.eigenvalues().minCoeff());
    } else {
      lip_sum += 1.0;
    }
  }
  double step = 1.0 / lip_sum;
  std::vector<double> history{cur.value};

  long it = 0;
  for (; it < options.max_iter && ascent.norm() >= options.tol; ++it) {
    // Accept once the directional derivative at the trial point is still
    // nonnegative along the ascent direction; by concavity g did not decrease
    // on the segment.
    bool accepted = false;
    for (int halving = 0; halving < 80; ++halving) {
      const Vector trial = lambda + step * ascent;
      DualValue next = dual_value(problem, trial, options.inner_tol, &cur.X);
      const Vector next_ascent = total - next.X.colwise().sum().transpose();
      if (next_ascent.dot(ascent) >= 0.0) {
        lambda = trial;
        cur = std::move(next);
        ascent = next_ascent;
        history.push_back(cur.value);
        step *= 2.0;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  const double residual = ascent.norm();
  if (!(residual < options.tol))
    throw ConvergenceFailure("solve_dual: dual residual above tolerance after " +
                                 std::to_string(it) + " iterations",
                             residual);

  OracleSolution sol;
  sol.X_star = cur.X;
  sol.lambda_star = lambda;
  sol.dual_residual = residual;
  sol.iterations_used = it;
  sol.dual_history = std::move(history);
  sol.kkt = kkt_check(problem, sol.X_star, lambda, options.kkt_tol);
  sol.stationarity_residuals = sol.kkt.stationarity_per_agent;
  return sol;
}

OracleSolution brute_force_tiny(const ProblemSpec& problem, double grid_step) {
  problem.validate();
  require(problem.n == 2 && problem.m == 1, "brute_force_tiny: requires n = 2, m = 1");
  require(grid_step > 0.0, "brute_force_tiny: grid_step must be positive");
  const auto* b1 = std::get_if<Box>(&problem.agents[0].set.kind());
  const auto* b2 = std::get_if<Box>(&problem.agents[1].set.kind());
  require(b1 && b2, "brute_force_tiny: requires box sets");

  const double total = problem.total_resource()(0);
  const double lo = std::max(b1->lo(0), total - b2->hi(0));
  const double hi = std::min(b1->hi(0), total - b2->lo(0));
  if (lo > hi) throw Infeasible("brute_force_tiny: no allocation satisfies both boxes and the balance");

  const auto& f1 = problem.agents[0].objective;
  const auto& f2 = problem.agents[1].objective;
  auto cost = [&](double x1) {
    Vector a(1), b(1);
    a << x1;
    b << total - x1;
    return value(f1, a) + value(f2, b);
  };
  const auto points = static_cast<long>(std::floor((hi - lo) / grid_step));
  double best_x = lo;
  double best = cost(lo);
  for (long t = 1; t <= points + 1; ++t) {
    const double x1 = t <= points ? lo + static_cast<double>(t) * grid_step : hi;
    const double c = cost(x1);
    if (c < best) {
      best = c;
      best_x = x1;
    }
  }

  OracleSolution sol;
  sol.X_star.resize(2, 1);
  sol.X_star << best_x, total - best_x;
  sol.lambda_star = Vector::Constant(1, std::numeric_limits<double>::quiet_NaN());
  const auto interior = [&](const Box& b, double x) {
    return x > b.lo(0) + grid_step && x < b.hi(0) - grid_step;
  };
  if (interior(*b1, best_x))
    sol.lambda_star = grad(f1, sol.X_star.row(0).transpose());
  else if (interior(*b2, total - best_x))
    sol.lambda_star = grad(f2, sol.X_star.row(1).transpose());
  sol.iterations_used = points + 2;
  return sol;
}

}  // namespace rasa
