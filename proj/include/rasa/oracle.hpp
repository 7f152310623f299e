#pragma once

#include "rasa/problem.hpp"
#include "rasa/types.hpp"

#include <optional>
#include <vector>

namespace rasa {

/// argmin_{x ∈ Ω} f(x) − λᵀx by projected gradient with step 1/L, stopped
/// when ‖x − P(x − (∇f(x) − λ)/L)‖ < tol. Throws ConvergenceFailure after
/// max_iter iterations.
Vector inner_min(const AgentSpec& agent, const Vector& lambda, double tol,
                 const Vector* warm_start = nullptr, long max_iter = 1'000'000);

struct KktReport {
  double stationarity = 0.0;  // max_i ‖x_i − P_Ωi(x_i − (∇f_i(x_i) − λ))‖
  double balance = 0.0;       // ‖Σx_i − Σd_i‖
  double membership = 0.0;    // max_i violation of Ω_i
  std::vector<double> stationarity_per_agent;
  /// Every agent sits on its set boundary; λ* need not be unique then.
  bool all_agents_active = false;
  bool passed = false;
};

KktReport kkt_check(const ProblemSpec& problem, const AgentMatrix& X, const Vector& lambda,
                    double tol);

struct OracleSolution {
  AgentMatrix X_star;
  Vector lambda_star;
  double dual_residual = 0.0;
  std::vector<double> stationarity_residuals;
  long iterations_used = 0;
  KktReport kkt;
  std::vector<double> dual_history;  // g(λ) at each accepted iterate
};

struct DualOptions {
  // Tight enough that S* built from the solution is a fixed point of the
  // noiseless mean-graph step to 1e-12.
  double tol = 1e-12;       // on ‖Σd − Σx(λ)‖
  double inner_tol = 1e-14;
  long max_iter = 100000;
  double kkt_tol = 1e-6;
  Vector initial_lambda;    // empty → 0
};

/// Maximizes the concave dual g(λ) = Σ_i min_{x∈Ω_i}(f_i(x) − λᵀx) + λᵀΣd_i
/// by ascent along ∇g = Σd − Σx(λ). A trial step is kept while ∇g at the
/// trial point still has a nonnegative component along the direction, so g
/// never decreases; the step doubles on acceptance and halves on rejection.
/// Throws ConvergenceFailure (carrying the best residual) when the residual
/// stays above tol.
OracleSolution solve_dual(const ProblemSpec& problem, const DualOptions& options = {});

/// g(λ) together with the inner minimizers that realize it.
struct DualValue {
  double value = 0.0;
  AgentMatrix X;
};

DualValue dual_value(const ProblemSpec& problem, const Vector& lambda, double inner_tol,
                     const AgentMatrix* warm_start = nullptr);

/// Exhaustive grid search for n = 2, m = 1 with box sets: x₁ on a grid of
/// spacing grid_step, x₂ = Σd − x₁. λ is recovered as f₁'(x₁*) (or f₂'(x₂*))
/// from an agent whose box is not binding; NaN when both bind.
/// Throws Infeasible when no grid point is feasible.
OracleSolution brute_force_tiny(const ProblemSpec& problem, double grid_step);

}  // namespace rasa
