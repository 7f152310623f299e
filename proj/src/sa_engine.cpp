#include "rasa/sa_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <thread>

namespace rasa {

NetworkState NetworkState::zeros(int n, int m) {
  return NetworkState{AgentMatrix::Zero(n, m), AgentMatrix::Zero(n, m), AgentMatrix::Zero(n, m), 0};
}

double NetworkState::norm() const {
  return std::sqrt(X.squaredNorm() + Lambda.squaredNorm() + Z.squaredNorm());
}

double NetworkState::squared_distance(const NetworkState& other) const {
  return (X - other.X).squaredNorm() + (Lambda - other.Lambda).squaredNorm() +
         (Z - other.Z).squaredNorm();
}

NetworkState default_initial_state(const ProblemSpec& problem) {
  auto s = NetworkState::zeros(problem.n, problem.m);
  for (int i = 0; i < problem.n; ++i)
    s.X.row(i) = project(problem.agents[i].set, Vector::Zero(problem.m)).transpose();
  return s;
}

// ---------------------------------------------------------------------------
// Step sizes and noise
// ---------------------------------------------------------------------------

StepSchedule StepSchedule::power(double a, double beta) {
  require(a > 0.0, "power schedule: a must be positive");
  require(beta > 0.5 && beta <= 1.0, "power schedule: beta must lie in (0.5, 1]");
  return StepSchedule(Kind::Power, a, beta);
}

StepSchedule StepSchedule::constant(double a) {
  require(a > 0.0, "constant schedule: a must be positive");
  return StepSchedule(Kind::Constant, a, 0.0);
}

double step_size(const StepSchedule& schedule, long k) {
  require(k >= 0, "step_size: k must be nonnegative");
  if (schedule.kind() == StepSchedule::Kind::Constant) return schedule.a();
  return schedule.a() / std::pow(static_cast<double>(k) + 1.0, schedule.beta());
}

bool NoiseConfig::noiseless() const {
  return gradient.kind == GradientNoise::Kind::None && !resource && !channel_lambda && !channel_z;
}

void NoiseConfig::validate() const {
  auto nonneg = [](double s, const char* what) {
    require(std::isfinite(s) && s >= 0.0, std::string("noise: ") + what + " must be a finite nonnegative std");
  };
  nonneg(gradient.sigma, "gradient sigma");
  nonneg(gradient.sigma_psi, "sigma_psi");
  nonneg(gradient.sigma_theta, "sigma_theta");
  if (resource) nonneg(*resource, "resource sigma");
  if (channel_lambda) nonneg(*channel_lambda, "channel_lambda sigma");
  if (channel_z) nonneg(*channel_z, "channel_z sigma");
}

double sampled_quadratic_envelope(int m, double sigma_psi, double sigma_theta) {
  return std::max(4.0 * m * sigma_psi * sigma_psi, m * sigma_theta * sigma_theta);
}

NoiseDraw NoiseDraw::zeros(int n, int m) {
  NoiseDraw d{AgentMatrix::Zero(n, m), AgentMatrix::Zero(n, m), {}, {}};
  d.zeta.assign(static_cast<std::size_t>(n), AgentMatrix::Zero(n, m));
  d.eps.assign(static_cast<std::size_t>(n), AgentMatrix::Zero(n, m));
  return d;
}

NoiseDraw draw_noise(const NoiseConfig& noise, const NetworkState& state,
                     const GraphSample& graph, const PathStream& stream) {
  const int n = static_cast<int>(state.X.rows());
  const int m = static_cast<int>(state.X.cols());
  const auto k = static_cast<std::uint64_t>(state.k);
  auto d = NoiseDraw::zeros(n, m);

  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::uint32_t>(i);
    switch (noise.gradient.kind) {
      case GradientNoise::Kind::None:
        break;
      case GradientNoise::Kind::Gaussian: {
        auto rng = stream.at(k, Channel::GradientNoise, ui);
        for (int c = 0; c < m; ++c) d.nu(i, c) = noise.gradient.sigma * rng.normal();
        break;
      }
      case GradientNoise::Kind::SampledQuadratic: {
        auto rng = stream.at(k, Channel::GradientNoise, ui);
        Matrix psi(m, m);
        for (int r = 0; r < m; ++r)
          for (int c = 0; c < m; ++c) psi(r, c) = noise.gradient.sigma_psi * rng.normal();
        Vector theta(m);
        for (int c = 0; c < m; ++c) theta(c) = noise.gradient.sigma_theta * rng.normal();
        d.nu.row(i) = (2.0 * psi * state.X.row(i).transpose() + theta).transpose();
        break;
      }
    }
    if (noise.resource) {
      auto rng = stream.at(k, Channel::ResourceNoise, ui);
      for (int c = 0; c < m; ++c) d.delta(i, c) = *noise.resource * rng.normal();
    }
    if (!noise.channel_lambda && !noise.channel_z) continue;
    for (int j = 0; j < n; ++j) {
      if (graph.adjacency(i, j) == 0.0) continue;
      const auto uj = static_cast<std::uint32_t>(j);
      if (noise.channel_lambda) {
        auto rng = stream.at(k, Channel::LambdaChannel, ui, uj);
        for (int c = 0; c < m; ++c) d.zeta[i](j, c) = *noise.channel_lambda * rng.normal();
      }
      if (noise.channel_z) {
        auto rng = stream.at(k, Channel::ZChannel, ui, uj);
        for (int c = 0; c < m; ++c) d.eps[i](j, c) = *noise.channel_z * rng.normal();
      }
    }
  }
  return d;
}

namespace {

/// Row i: Σ_j a_ij · noise[i].row(j).
AgentMatrix received_sum(const Matrix& adjacency, const std::vector<AgentMatrix>& noise, int m) {
  const auto n = adjacency.rows();
  AgentMatrix out(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    out.row(i) = adjacency.row(i) * noise[static_cast<std::size_t>(i)];
  return out;
}

}  // namespace

NetworkState sa_step(const NetworkState& state, const ProblemSpec& problem,
                     const GraphSample& graph, const NoiseDraw& noise, double alpha) {
  const int n = problem.n;
  const int m = problem.m;
  require(alpha > 0.0, "sa_step: alpha must be positive");
  require(state.X.rows() == n && state.X.cols() == m && state.Lambda.rows() == n &&
              state.Lambda.cols() == m && state.Z.rows() == n && state.Z.cols() == m,
          "sa_step: state dimensions do not match the problem");
  require(graph.n == n, "sa_step: graph size differs from agent count");

  const Matrix& L = graph.laplacian;
  const AgentMatrix zeta = received_sum(graph.adjacency, noise.zeta, m);
  const AgentMatrix eps = received_sum(graph.adjacency, noise.eps, m);
  // Σ_j a_ij(λ_i − (λ_j + ζ_ij)) = (LΛ)_i − ζ_i
  const AgentMatrix lambda_disagreement = L * state.Lambda - zeta;
  const AgentMatrix z_disagreement = L * state.Z - eps;

  NetworkState next;
  next.k = state.k + 1;
  next.X.resize(n, m);
  for (int i = 0; i < n; ++i) {
    const auto& agent = problem.agents[i];
    const Vector x = state.X.row(i).transpose();
    const Vector g = grad(agent.objective, x) + noise.nu.row(i).transpose();
    const Vector y = x + alpha * (state.Lambda.row(i).transpose() - g);
    next.X.row(i) = project(agent.set, y).transpose();
  }
  next.Lambda = state.Lambda + alpha * (problem.resources() + noise.delta - state.X -
                                        lambda_disagreement - z_disagreement);
  next.Z = state.Z + alpha * lambda_disagreement;
  return next;
}

NetworkState sa_step(const NetworkState& state, const ProblemSpec& problem,
                     const GraphSample& graph, const NoiseConfig& noise, double alpha,
                     const PathStream& stream) {
  return sa_step(state, problem, graph, draw_noise(noise, state, graph, stream), alpha);
}

StateBlocks aggregate_noise(const NetworkState& state, const GraphSample& graph,
                            const NoiseDraw& noise, const Matrix& mean_laplacian) {
  const auto m = static_cast<int>(state.X.cols());
  const AgentMatrix zeta = received_sum(graph.adjacency, noise.zeta, m);
  const AgentMatrix eps = received_sum(graph.adjacency, noise.eps, m);
  const Matrix dL = mean_laplacian - graph.laplacian;
  StateBlocks xi;
  xi.X = -noise.nu;
  xi.Lambda = dL * (state.Lambda + state.Z) + zeta + noise.delta + eps;  // e1 + e2
  xi.Z = -dL * state.Lambda - zeta;                                      // e3
  return xi;
}

// ---------------------------------------------------------------------------
// Metrics and traces
// ---------------------------------------------------------------------------

Metrics evaluate_metrics(const NetworkState& state, const ProblemSpec& problem,
                         const Matrix& mean_laplacian, const AgentMatrix* reference,
                         double alpha) {
  Metrics r;
  r.k = state.k;
  r.alpha = alpha;
  if (reference) r.dist = (state.X - *reference).norm();
  r.obj = objective_value(problem, state.X);
  r.consensus = (mean_laplacian * state.Lambda).norm();
  r.balance = (state.X.colwise().sum() - problem.total_resource().transpose()).norm();
  r.state_norm = state.norm();
  return r;
}

namespace {

void append_double(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

}  // namespace

std::string trace_to_csv(const Trace& trace) {
  std::string out = kTraceHeader;
  out += '\n';
  for (const auto& r : trace.records) {
    out += std::to_string(r.k);
    out += ',';
    append_double(out, r.alpha);
    out += ',';
    if (r.dist) append_double(out, *r.dist);
    for (double v : {r.obj, r.consensus, r.balance, r.state_norm}) {
      out += ',';
      append_double(out, v);
    }
    out += '\n';
  }
  return out;
}

Trace trace_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader)
    throw ConfigError("trace CSV: unexpected header '" + line + "'");
  Trace t;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 7) throw ConfigError("trace CSV line " + std::to_string(lineno) + ": expected 7 fields");
    try {
      Metrics r;
      r.k = std::stol(f[0]);
      r.alpha = std::stod(f[1]);
      if (!f[2].empty()) r.dist = std::stod(f[2]);
      r.obj = std::stod(f[3]);
      r.consensus = std::stod(f[4]);
      r.balance = std::stod(f[5]);
      r.state_norm = std::stod(f[6]);
      t.records.push_back(r);
    } catch (const std::logic_error&) {
      throw ConfigError("trace CSV line " + std::to_string(lineno) + ": malformed number");
    }
  }
  if (t.records.size() >= 2) t.cadence = t.records[1].k - t.records[0].k;
  return t;
}

// ---------------------------------------------------------------------------
// Paths
// ---------------------------------------------------------------------------

PathResult run_path(const ProblemSpec& problem, const GraphModel& model, const NoiseConfig& noise,
                    const StepSchedule& schedule, const RunConfig& config, std::uint64_t seed,
                    const AgentMatrix* reference) {
  require(config.iterations >= 1, "run_path: iterations must be at least 1");
  require(config.cadence >= 1, "run_path: cadence must be at least 1");
  require(model.n() == problem.n, "run_path: graph model size differs from agent count");
  for (const auto& [agent, comp] : config.tracked)
    require(agent >= 0 && agent < problem.n && comp >= 0 && comp < problem.m,
            "run_path: tracked allocation index out of range");
  noise.validate();

  const Matrix Lbar = mean_laplacian(model);
  const PathStream stream(seed);
  NetworkState state = config.initial ? *config.initial : default_initial_state(problem);
  state.k = 0;

  PathResult result;
  result.trace.cadence = config.cadence;
  result.trace.records.reserve(static_cast<std::size_t>((config.iterations + config.cadence - 1) / config.cadence));

  for (long k = 0; k < config.iterations; ++k) {
    const double alpha = step_size(schedule, k);
    if (k % config.cadence == 0) {
      result.trace.records.push_back(evaluate_metrics(state, problem, Lbar, reference, alpha));
      if (!config.tracked.empty()) {
        std::vector<double> row;
        row.reserve(config.tracked.size());
        for (const auto& [agent, comp] : config.tracked) row.push_back(state.X(agent, comp));
        result.tracked.push_back(std::move(row));
      }
    }
    auto rng = stream.at(static_cast<std::uint64_t>(k), Channel::Graph);
    const GraphSample graph = sample_graph(model, rng);
    state = sa_step(state, problem, graph, noise, alpha, stream);
    const double norm = state.norm();
    if (!(norm <= config.divergence_guard)) throw Diverged(state.k, norm);
    if (k == 0) result.first_step = evaluate_metrics(state, problem, Lbar, reference, step_size(schedule, 1));
  }
  result.final_metrics =
      evaluate_metrics(state, problem, Lbar, reference, step_size(schedule, config.iterations));
  result.final_state = std::move(state);
  return result;
}

MonteCarloResult monte_carlo(const ProblemSpec& problem, const GraphModel& model,
                             const NoiseConfig& noise, const StepSchedule& schedule,
                             const RunConfig& config, int paths, std::uint64_t master_seed,
                             const AgentMatrix* reference, int threads) {
  require(paths >= 1, "monte_carlo: paths must be at least 1");
  require(threads >= 1, "monte_carlo: threads must be at least 1");

  struct Slot {
    std::optional<PathResult> result;
    long diverged_at = -1;
    std::exception_ptr error;
  };
  std::vector<Slot> slots(static_cast<std::size_t>(paths));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int p = next++; p < paths; p = next++) {
      auto& slot = slots[static_cast<std::size_t>(p)];
      try {
        slot.result = run_path(problem, model, noise, schedule, config, path_key(master_seed, p),
                               reference);
      } catch (const Diverged& d) {
        slot.diverged_at = d.iteration();
      } catch (...) {
        slot.error = std::current_exception();
      }
    }
  };
  const int workers = std::min(threads, paths);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& s : slots)
    if (s.error) std::rethrow_exception(s.error);

  MonteCarloResult out;
  out.paths = paths;
  out.mean_trace.cadence = config.cadence;
  out.finals.resize(static_cast<std::size_t>(paths));
  for (int p = 0; p < paths; ++p) out.path_seeds.push_back(path_key(master_seed, p));

  // Ordered reduction: sums accumulate in path order regardless of threads.
  int completed = 0;
  for (int p = 0; p < paths; ++p) {
    const auto& slot = slots[static_cast<std::size_t>(p)];
    if (!slot.result) {
      out.diverged.push_back({p, slot.diverged_at});
      continue;
    }
    const auto& r = *slot.result;
    out.finals[static_cast<std::size_t>(p)] = r.final_metrics;
    if (completed == 0) {
      out.mean_trace.records = r.trace.records;
      out.mean_tracked = r.tracked;
    } else {
      for (std::size_t t = 0; t < r.trace.records.size(); ++t) {
        auto& acc = out.mean_trace.records[t];
        const auto& rec = r.trace.records[t];
        if (acc.dist && rec.dist) *acc.dist += *rec.dist;
        acc.obj += rec.obj;
        acc.consensus += rec.consensus;
        acc.balance += rec.balance;
        acc.state_norm += rec.state_norm;
      }
      for (std::size_t t = 0; t < r.tracked.size(); ++t)
        for (std::size_t j = 0; j < r.tracked[t].size(); ++j) out.mean_tracked[t][j] += r.tracked[t][j];
    }
    ++completed;
  }
  if (completed > 0) {
    const double inv = 1.0 / completed;
    for (auto& acc : out.mean_trace.records) {
      if (acc.dist) *acc.dist *= inv;
      acc.obj *= inv;
      acc.consensus *= inv;
      acc.balance *= inv;
      acc.state_norm *= inv;
    }
    for (auto& row : out.mean_tracked)
      for (double& v : row) v *= inv;
  }
  return out;
}

Quantiles summarize(std::vector<double> values) {
  Quantiles q;
  if (values.empty()) {
    q.mean = q.median = q.p90 = std::numeric_limits<double>::quiet_NaN();
    return q;
  }
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  q.mean = sum / static_cast<double>(values.size());
  // Linear interpolation between order statistics.
  auto quantile = [&](double p) {
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  q.median = quantile(0.5);
  q.p90 = quantile(0.9);
  return q;
}

}  // namespace rasa
