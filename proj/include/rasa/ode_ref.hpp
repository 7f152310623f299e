#pragma once

#include "rasa/problem.hpp"
#include "rasa/sa_engine.hpp"
#include "rasa/types.hpp"

#include <vector>

namespace rasa {

/// The mean-field drift J(S):
///   dX = −∇f(X) + Λ
///   dΛ = −(L̄ ⊗ I)(Λ + Z) + D − X
///   dZ = (L̄ ⊗ I)Λ
struct DriftEvaluation {
  AgentMatrix dX;
  AgentMatrix dLambda;
  AgentMatrix dZ;

  double norm() const;
};

DriftEvaluation drift(const NetworkState& state, const ProblemSpec& problem,
                      const Matrix& mean_laplacian);

/// S⁺ = P_Φ(S + hJ(S)); only the X block is projected (onto Ω_i row-wise).
NetworkState projected_euler_step(const NetworkState& state, const ProblemSpec& problem,
                                  const Matrix& mean_laplacian, double h);

/// ½‖S − S*‖² over all three blocks.
double lyapunov(const NetworkState& state, const NetworkState& equilibrium);

struct Equilibrium {
  NetworkState state;
  Vector lambda_star;
  double residual = 0.0;
};

/// Builds S* = (X*, 1 ⊗ λ*, Z*) with Z* the minimum-norm solution of
/// (L̄ ⊗ I)Z = D − X* (pseudoinverse, singular-value cutoff 1e-10).
/// Throws Inconsistency when D − X* is not in range(L̄ ⊗ I) within 1e-6.
Equilibrium equilibrium_construct(const ProblemSpec& problem, const Matrix& mean_laplacian,
                                  const AgentMatrix& X_star, const Vector& lambda_star);

inline constexpr double kResidualProbe = 1e-6;

/// ‖S − P_Φ(S + h₀J(S))‖ / h₀ with h₀ = kResidualProbe.
double equilibrium_residual(const NetworkState& state, const ProblemSpec& problem,
                            const Matrix& mean_laplacian);

struct FlowOptions {
  double h = 1e-3;
  long steps = 1000;
  /// Keep every `record_every`-th state in the trajectory (the last state is
  /// always kept). The Lyapunov series is recorded at every step regardless.
  long record_every = 1;
  double divergence_guard = 1e12;
};

struct FlowResult {
  std::vector<NetworkState> trajectory;
  std::vector<double> lyapunov;  // V(S_t), t = 0..steps
  NetworkState final_state;
};

/// Integrates the projected ODE with projected Euler. Requires
/// h·(2·max_i l_i + 2‖L̄‖) < 1; throws Diverged on ‖S‖ > guard.
FlowResult flow(const NetworkState& initial, const ProblemSpec& problem,
                const Matrix& mean_laplacian, const FlowOptions& options,
                const NetworkState& equilibrium);

/// h·(2·max Lipschitz + 2‖L̄‖₂); the flow requires this to be below 1.
double flow_stability_number(const ProblemSpec& problem, const Matrix& mean_laplacian, double h);

/// Index of the first t with V(S_{t+1}) > V(S_t) + 1e-10·(1 + V(S_t)), or −1.
long first_lyapunov_increase(const std::vector<double>& series, double slack = 1e-10);

}  // namespace rasa
