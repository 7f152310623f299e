#include "rasa/ode_ref.hpp"

#include <algorithm>
#include <cmath>

namespace rasa {

double DriftEvaluation::norm() const {
  return std::sqrt(dX.squaredNorm() + dLambda.squaredNorm() + dZ.squaredNorm());
}

DriftEvaluation drift(const NetworkState& state, const ProblemSpec& problem,
                      const Matrix& mean_laplacian) {
  const int n = problem.n;
  const int m = problem.m;
  require(state.X.rows() == n && state.X.cols() == m, "drift: state dimensions do not match");
  require(mean_laplacian.rows() == n && mean_laplacian.cols() == n, "drift: Laplacian must be n x n");

  DriftEvaluation J;
  J.dX.resize(n, m);
  for (int i = 0; i < n; ++i)
    J.dX.row(i) = -grad(problem.agents[i].objective, state.X.row(i).transpose()).transpose();
  J.dX += state.Lambda;
  const AgentMatrix LLambda = mean_laplacian * state.Lambda;
  J.dLambda = -LLambda - mean_laplacian * state.Z + problem.resources() - state.X;
  J.dZ = LLambda;
  return J;
}

NetworkState projected_euler_step(const NetworkState& state, const ProblemSpec& problem,
                                  const Matrix& mean_laplacian, double h) {
  require(h > 0.0, "projected_euler_step: h must be positive");
  const auto J = drift(state, problem, mean_laplacian);
  NetworkState next;
  next.k = state.k + 1;
  next.X.resize(problem.n, problem.m);
  for (int i = 0; i < problem.n; ++i) {
    const Vector y = (state.X.row(i) + h * J.dX.row(i)).transpose();
    next.X.row(i) = project(problem.agents[i].set, y).transpose();
  }
  next.Lambda = state.Lambda + h * J.dLambda;
  next.Z = state.Z + h * J.dZ;
  return next;
}

double lyapunov(const NetworkState& state, const NetworkState& equilibrium) {
  require(state.X.rows() == equilibrium.X.rows() && state.X.cols() == equilibrium.X.cols(),
          "lyapunov: dimension mismatch");
  return 0.5 * state.squared_distance(equilibrium);
}

Equilibrium equilibrium_construct(const ProblemSpec& problem, const Matrix& mean_laplacian,
                                  const AgentMatrix& X_star, const Vector& lambda_star) {
  const int n = problem.n;
  const int m = problem.m;
  require(X_star.rows() == n && X_star.cols() == m, "equilibrium_construct: X* has wrong shape");
  require(lambda_star.size() == m, "equilibrium_construct: lambda* has wrong size");

  // (L̄ ⊗ I_m) acts column-wise on the n×m block layout, so the pseudoinverse
  // of L̄ applied to each column of D − X* solves the Kronecker system.
  const AgentMatrix rhs = problem.resources() - X_star;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (mean_laplacian + mean_laplacian.transpose()));
  const Vector& s = es.eigenvalues();
  Vector inv = Vector::Zero(n);
  for (int k = 0; k < n; ++k)
    if (std::abs(s(k)) > 1e-10) inv(k) = 1.0 / s(k);
  const Matrix pinv = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();

  Equilibrium eq;
  eq.state = NetworkState::zeros(n, m);
  eq.state.X = X_star;
  eq.state.Lambda = AgentMatrix::Ones(n, 1) * lambda_star.transpose();
  eq.state.Z = pinv * rhs;
  const double range_defect = (mean_laplacian * eq.state.Z - rhs).norm();
  if (range_defect > 1e-6)
    throw Inconsistency("equilibrium_construct: D - X* is not in the range of the mean Laplacian "
                        "(defect " + std::to_string(range_defect) + "); sum x* != sum d?");
  eq.lambda_star = lambda_star;
  eq.residual = equilibrium_residual(eq.state, problem, mean_laplacian);
  return eq;
}

double equilibrium_residual(const NetworkState& state, const ProblemSpec& problem,
                            const Matrix& mean_laplacian) {
  const auto next = projected_euler_step(state, problem, mean_laplacian, kResidualProbe);
  return std::sqrt(state.squared_distance(next)) / kResidualProbe;
}

double flow_stability_number(const ProblemSpec& problem, const Matrix& mean_laplacian, double h) {
  double lip = 0.0;
  for (const auto& a : problem.agents) lip = std::max(lip, a.objective.lipschitz());
  Eigen::JacobiSVD<Matrix> svd(mean_laplacian);
  return h * (2.0 * lip + 2.0 * svd.singularValues()(0));
}

FlowResult flow(const NetworkState& initial, const ProblemSpec& problem,
                const Matrix& mean_laplacian, const FlowOptions& options,
                const NetworkState& equilibrium) {
  require(options.h > 0.0, "flow: h must be positive");
  require(options.steps >= 0, "flow: steps must be nonnegative");
  require(options.record_every >= 1, "flow: record_every must be at least 1");
  require(flow_stability_number(problem, mean_laplacian, options.h) < 1.0,
          "flow: step h violates h*(2*max Lipschitz + 2*||Lbar||) < 1");

  FlowResult out;
  out.lyapunov.reserve(static_cast<std::size_t>(options.steps) + 1);
  NetworkState s = initial;
  out.trajectory.push_back(s);
  out.lyapunov.push_back(lyapunov(s, equilibrium));
  for (long t = 1; t <= options.steps; ++t) {
    s = projected_euler_step(s, problem, mean_laplacian, options.h);
    const double norm = s.norm();
    if (!(norm <= options.divergence_guard)) throw Diverged(t, norm);
    out.lyapunov.push_back(lyapunov(s, equilibrium));
    if (t % options.record_every == 0 || t == options.steps) out.trajectory.push_back(s);
  }
  out.final_state = std::move(s);
  return out;
}

long first_lyapunov_increase(const std::vector<double>& series, double slack) {
  for (std::size_t t = 0; t + 1 < series.size(); ++t)
    if (series[t + 1] > series[t] + slack * (1.0 + series[t])) return static_cast<long>(t);
  return -1;
}

}  // namespace rasa
