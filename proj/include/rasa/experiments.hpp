#pragma once

#include "rasa/network.hpp"
#include "rasa/oracle.hpp"
#include "rasa/problem.hpp"
#include "rasa/sa_engine.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace rasa {

inline constexpr int kDemandResponseAgents = 10;
inline constexpr int kDemandResponsePeriods = 3;
inline constexpr int kTemplateRows = 12;

/// The fixed 12×3 load-response template. Row pairs (lower, upper):
///   total demand 1ᵀP, ramp P₁ − P₂, ramp P₂ − P₃, levels P₁, P₂, P₃.
/// Lower bounds appear negated so the set reads R P ≤ l.
Matrix demand_response_template();

/// The six two-sided quantities of a profile in template order.
std::array<double, 6> load_response_quantities(const Vector& profile);

struct DemandResponseSpec {
  int n = kDemandResponseAgents;
  int T = kDemandResponsePeriods;
  std::vector<Vector> generation;  // P^g_i, the resources d_i
  std::vector<Vector> nominal;     // feasible profile used to place the bounds
  std::vector<Vector> bounds;      // l_i (12 entries)
  NoiseConfig noise;               // sampled-quadratic gradient noise plus unit δ, ζ, ε
};

struct DemandResponseInstance {
  ProblemSpec problem;
  DemandResponseSpec spec;
  OracleSolution oracle;  // cached certified solution
};

/// Random demand-response instance. Per agent: SPD Q_i (eigenvalues in
/// [0.5, 5]), c_i ∈ [−1, 1]³, nominal profile ∈ [−1, 1]³, bounds at the
/// nominal quantities ± U[0.5, 1.5], and P^g_i = nominal ± U[−0.15, 0.15]
/// per period. Retries (up to 100) until every Ω_i has slack > 1e-6 and the
/// coupled problem solves with a passing KKT check.
DemandResponseInstance demand_response_instance(std::uint64_t seed);

/// Noise levels of the experiments: Ψ, θ entries N(0, 0.5); δ, ζ, ε ~ N(0, I).
NoiseConfig demand_response_noise();

struct ExperimentConfig {
  int paths = 200;
  int rounds = 100;
  long iterations = 8000;
  long cadence = 10;
  StepSchedule schedule = StepSchedule::power(1.0, 0.6);
  NoiseConfig noise = demand_response_noise();
  int pool_size = 30;
  double p_lo = 0.05;
  double p_hi = 0.1;
  std::uint64_t master_seed = 1;
  std::uint64_t instance_seed = 1;
  /// Allocation components traced for the agent-trajectory curves.
  std::vector<std::pair<int, int>> tracked{{0, 0}, {1, 0}, {2, 0}};
  int threads = 1;
};

struct Experiment1Report {
  DemandResponseInstance instance;
  GraphModel pool;
  MonteCarloResult mc;
};

/// Fixed instance and graph pool; `paths` sample paths; averaged index and
/// allocation curves against the oracle solution.
Experiment1Report experiment1(const ExperimentConfig& config);

struct RoundOutcome {
  int round = 0;
  std::uint64_t instance_seed = 0;
  std::uint64_t pool_seed = 0;
  std::uint64_t path_seed = 0;
  Metrics initial;     // k = 0
  Metrics first_step;  // k = 1; the consensus residual is identically 0 at k = 0 when Λ(0) = 0
  Metrics final;
  bool diverged = false;
};

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  long count = 0;
};

/// 20 log-spaced bins spanning the positive values; nonpositive values fall
/// into the first bin.
std::vector<HistogramBin> log_histogram(const std::vector<double>& values, int bins = 20);

using NamedHistograms = std::vector<std::pair<std::string, std::vector<HistogramBin>>>;

/// Log histograms of final metrics: dist, |obj|, consensus, balance.
NamedHistograms final_metric_histograms(const std::vector<Metrics>& finals, int bins = 20);

struct Experiment2Report {
  std::vector<RoundOutcome> rounds;
  int resampled_pools = 0;
  NamedHistograms histograms;  // over non-diverged rounds
};

/// Fresh instance, fresh graph pool, and one path per round.
Experiment2Report experiment2(const ExperimentConfig& config);

/// Round-r seeds are derived from the master seed (instance, pool, path).
std::uint64_t round_seed(std::uint64_t master_seed, int round, std::uint64_t salt);

}  // namespace rasa
