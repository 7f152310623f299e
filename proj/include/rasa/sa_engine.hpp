#pragma once

#include "rasa/network.hpp"
#include "rasa/problem.hpp"
#include "rasa/rng.hpp"
#include "rasa/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace rasa {

/// Stacked algorithm state S = (X, Λ, Z); row i of each block belongs to agent i.
struct NetworkState {
  AgentMatrix X;
  AgentMatrix Lambda;
  AgentMatrix Z;
  long k = 0;

  static NetworkState zeros(int n, int m);
  /// ‖S‖ over all three blocks.
  double norm() const;
  /// Squared distance over all three blocks.
  double squared_distance(const NetworkState& other) const;
};

/// X(0) = P_Ω(0), Λ(0) = Z(0) = 0.
NetworkState default_initial_state(const ProblemSpec& problem);

class StepSchedule {
 public:
  enum class Kind { Power, Constant };

  /// α_k = a/(k+1)^β; requires a > 0 and β ∈ (0.5, 1].
  static StepSchedule power(double a, double beta);
  /// Constant steps do not satisfy Σα² < ∞; diagnostics only.
  static StepSchedule constant(double a);

  Kind kind() const { return kind_; }
  double a() const { return a_; }
  double beta() const { return beta_; }
  /// True for power schedules, whose steps are square-summable but not summable.
  bool convergent() const { return kind_ == Kind::Power; }

 private:
  StepSchedule(Kind kind, double a, double beta) : kind_(kind), a_(a), beta_(beta) {}
  Kind kind_;
  double a_;
  double beta_;
};

double step_size(const StepSchedule& schedule, long k);

struct GradientNoise {
  enum class Kind { None, Gaussian, SampledQuadratic };
  Kind kind = Kind::None;
  double sigma = 0.0;        // Gaussian: per-component std of ν
  double sigma_psi = 0.0;    // SampledQuadratic: std of each Ψ entry
  double sigma_theta = 0.0;  // SampledQuadratic: std of each θ entry
};

/// The four noise processes. A disengaged optional means "none"; otherwise
/// the value is the per-component standard deviation of a zero-mean Gaussian.
struct NoiseConfig {
  GradientNoise gradient;
  std::optional<double> resource;        // δ_i
  std::optional<double> channel_lambda;  // ζ_ij
  std::optional<double> channel_z;       // ε_ij

  static NoiseConfig none() { return {}; }
  bool noiseless() const;
  void validate() const;
};

/// c such that E‖ν‖² ≤ c(1 + ‖x‖²) for ν = 2Ψx + θ with i.i.d. N(0, σ²)
/// entries: E‖ν‖² = 4mσ_Ψ²‖x‖² + mσ_θ², so c = max(4mσ_Ψ², mσ_θ²).
double sampled_quadratic_envelope(int m, double sigma_psi, double sigma_theta);

/// One realization of every noise channel at one step. zeta[i].row(j) is the
/// noise on λ_j as received by agent i (the same draw enters both the λ- and
/// the z-update); entries for absent edges are zero.
struct NoiseDraw {
  AgentMatrix nu;
  AgentMatrix delta;
  std::vector<AgentMatrix> zeta;
  std::vector<AgentMatrix> eps;

  static NoiseDraw zeros(int n, int m);
};

/// Draws every channel for step `state.k` from addresses
/// (k, channel, i, j) of `stream`; only edges present in `graph` are drawn.
NoiseDraw draw_noise(const NoiseConfig& noise, const NetworkState& state,
                     const GraphSample& graph, const PathStream& stream);

/// One synchronous round of the recursion, for every agent i:
///   x_i⁺ = P_Ωi(x_i + α(−(∇f_i(x_i) + ν_i) + λ_i))
///   λ_i⁺ = λ_i + α((d_i + δ_i) − x_i − Σ_j a_ij(λ_i − λ_j − ζ_ij) − Σ_j a_ij(z_i − z_j − ε_ij))
///   z_i⁺ = z_i + α Σ_j a_ij(λ_i − λ_j − ζ_ij)
NetworkState sa_step(const NetworkState& state, const ProblemSpec& problem,
                     const GraphSample& graph, const NoiseDraw& noise, double alpha);

NetworkState sa_step(const NetworkState& state, const ProblemSpec& problem,
                     const GraphSample& graph, const NoiseConfig& noise, double alpha,
                     const PathStream& stream);

/// Blocks of the aggregate noise ξ(k) = (−ν, e₁ + e₂, e₃) in the compact
/// recursion S⁺ = P_Φ(S + α(J(S) + ξ)) around the mean Laplacian.
struct StateBlocks {
  AgentMatrix X;
  AgentMatrix Lambda;
  AgentMatrix Z;
};

StateBlocks aggregate_noise(const NetworkState& state, const GraphSample& graph,
                            const NoiseDraw& noise, const Matrix& mean_laplacian);

// ---------------------------------------------------------------------------
// Traces and runs
// ---------------------------------------------------------------------------

struct Metrics {
  long k = 0;
  double alpha = 0.0;
  std::optional<double> dist;  // ‖X − X*‖, only with a reference solution
  double obj = 0.0;            // Σ f_i(x_i)
  double consensus = 0.0;      // ‖(L̄ ⊗ I)Λ‖
  double balance = 0.0;        // ‖Σ(x_i − d_i)‖
  double state_norm = 0.0;     // ‖S‖
};

Metrics evaluate_metrics(const NetworkState& state, const ProblemSpec& problem,
                         const Matrix& mean_laplacian, const AgentMatrix* reference,
                         double alpha);

struct Trace {
  long cadence = 10;
  std::vector<Metrics> records;
};

inline constexpr char kTraceHeader[] = "k,alpha,dist,obj,consensus,balance,state_norm";

/// CSV with kTraceHeader; doubles printed with 17 significant digits, absent
/// distances as empty fields.
std::string trace_to_csv(const Trace& trace);
Trace trace_from_csv(const std::string& text);

struct RunConfig {
  long iterations = 8000;
  long cadence = 10;
  std::optional<NetworkState> initial;
  /// (agent, component) pairs whose allocation is recorded at each cadence point.
  std::vector<std::pair<int, int>> tracked;
  double divergence_guard = 1e12;
};

struct PathResult {
  Trace trace;
  NetworkState final_state;
  Metrics first_step;                // evaluated at k = 1
  Metrics final_metrics;             // evaluated at k = iterations
  std::vector<std::vector<double>> tracked;  // [record][tracked index]
};

/// Runs one sample path with stream key `seed`. Records the state before
/// step k for k = 0, c, 2c, … < iterations, so the trace holds
/// ⌈iterations / cadence⌉ records; the state after the last step is in
/// final_metrics. Throws Diverged when ‖S(k)‖ exceeds the guard.
PathResult run_path(const ProblemSpec& problem, const GraphModel& model, const NoiseConfig& noise,
                    const StepSchedule& schedule, const RunConfig& config, std::uint64_t seed,
                    const AgentMatrix* reference = nullptr);

struct DivergedPath {
  int path = 0;
  long iteration = 0;
};

struct MonteCarloResult {
  int paths = 0;
  std::vector<DivergedPath> diverged;
  Trace mean_trace;                              // over non-diverged paths
  std::vector<std::vector<double>> mean_tracked;
  std::vector<std::optional<Metrics>> finals;    // per path; empty if diverged
  std::vector<std::uint64_t> path_seeds;
};

/// Path p runs with seed path_key(master_seed, p). Per-path results land in
/// slots indexed by p and are reduced in index order, so the result does not
/// depend on `threads`.
MonteCarloResult monte_carlo(const ProblemSpec& problem, const GraphModel& model,
                             const NoiseConfig& noise, const StepSchedule& schedule,
                             const RunConfig& config, int paths, std::uint64_t master_seed,
                             const AgentMatrix* reference = nullptr, int threads = 1);

struct Quantiles {
  double mean = 0.0;
  double median = 0.0;
  double p90 = 0.0;
};

Quantiles summarize(std::vector<double> values);

}  // namespace rasa
