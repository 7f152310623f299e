#include "rasa/experiments.hpp"

#include "rasa/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace rasa {

Matrix demand_response_template() {
  Matrix R = Matrix::Zero(kTemplateRows, kDemandResponsePeriods);
  Eigen::RowVector3d rows[6] = {
      {1.0, 1.0, 1.0},   // total demand
      {1.0, -1.0, 0.0},  // ramp P1 − P2
      {0.0, 1.0, -1.0},  // ramp P2 − P3
      {1.0, 0.0, 0.0},   // level P1
      {0.0, 1.0, 0.0},   // level P2
      {0.0, 0.0, 1.0},   // level P3
  };
  for (int q = 0; q < 6; ++q) {
    R.row(2 * q) = -rows[q];
    R.row(2 * q + 1) = rows[q];
  }
  return R;
}

std::array<double, 6> load_response_quantities(const Vector& p) {
  require(p.size() == kDemandResponsePeriods, "load_response_quantities: need a 3-period profile");
  return {p.sum(), p(0) - p(1), p(1) - p(2), p(0), p(1), p(2)};
}

NoiseConfig demand_response_noise() {
  NoiseConfig nc;
  nc.gradient.kind = GradientNoise::Kind::SampledQuadratic;
  nc.gradient.sigma_psi = std::sqrt(0.5);
  nc.gradient.sigma_theta = std::sqrt(0.5);
  nc.resource = 1.0;
  nc.channel_lambda = 1.0;
  nc.channel_z = 1.0;
  return nc;
}

DemandResponseInstance demand_response_instance(std::uint64_t seed) {
  const int n = kDemandResponseAgents;
  const int T = kDemandResponsePeriods;
  const Matrix R = demand_response_template();
  for (std::uint64_t attempt = 0; attempt < 100; ++attempt) {
    CounterRng rng(splitmix64(seed) ^ splitmix64(0xD5ull + attempt));
    try {
      DemandResponseInstance inst;
      auto& spec = inst.spec;
      spec.noise = demand_response_noise();
      inst.problem.n = n;
      inst.problem.m = T;
      for (int i = 0; i < n; ++i) {
        Matrix Q = random_spd(rng, T, 0.5, 5.0);
        Vector c(T), nominal(T), gen(T);
        for (int t = 0; t < T; ++t) c(t) = rng.uniform(-1.0, 1.0);
        for (int t = 0; t < T; ++t) nominal(t) = rng.uniform(-1.0, 1.0);
        for (int t = 0; t < T; ++t) gen(t) = nominal(t) + rng.uniform(-0.15, 0.15);
        const auto q = load_response_quantities(nominal);
        Vector l(kTemplateRows);
        for (int k = 0; k < 6; ++k) {
          l(2 * k) = -(q[k] - rng.uniform(0.5, 1.5));
          l(2 * k + 1) = q[k] + rng.uniform(0.5, 1.5);
        }
        inst.problem.agents.push_back(AgentSpec{ObjectiveSpec::quadratic(std::move(Q), std::move(c)),
                                                LocalSet::polyhedron(R, l), gen});
        spec.generation.push_back(std::move(gen));
        spec.nominal.push_back(std::move(nominal));
        spec.bounds.push_back(std::move(l));
      }
      inst.problem.validate();
      inst.oracle = solve_dual(inst.problem);
      if (inst.oracle.kkt.passed) return inst;
    } catch (const InvalidArgument&) {
    } catch (const NumericalFailure&) {
    }
  }
  throw GenerationFailure("demand_response_instance: certification failed after 100 attempts");
}

std::uint64_t round_seed(std::uint64_t master_seed, int round, std::uint64_t salt) {
  return splitmix64(path_key(master_seed, static_cast<std::uint64_t>(round)) ^ salt);
}

namespace {

constexpr std::uint64_t kPoolSalt = 0x9001ull;
constexpr std::uint64_t kInstanceSalt = 0x1257ull;
constexpr std::uint64_t kPathSalt = 0x9a7full;

}  // namespace

Experiment1Report experiment1(const ExperimentConfig& config) {
  require(config.paths >= 1, "experiment1: paths must be at least 1");
  auto inst = demand_response_instance(config.instance_seed);
  auto pool = GraphModel::erdos_renyi_pool(inst.problem.n, config.pool_size, config.p_lo, config.p_hi,
                                           round_seed(config.master_seed, 0, kPoolSalt));
  const auto validation = validate_model(pool);
  if (!validation.passed) throw GenerationFailure("experiment1: graph pool fails " + validation.message);

  RunConfig run;
  run.iterations = config.iterations;
  run.cadence = config.cadence;
  run.tracked = config.tracked;
  auto mc = monte_carlo(inst.problem, pool, config.noise, config.schedule, run, config.paths,
                        config.master_seed, &inst.oracle.X_star, config.threads);
  return Experiment1Report{std::move(inst), std::move(pool), std::move(mc)};
}

std::vector<HistogramBin> log_histogram(const std::vector<double>& values, int bins) {
  require(bins >= 1, "log_histogram: need at least one bin");
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (double v : values)
    if (v > 0.0) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (!(hi > 0.0)) lo = hi = 1.0;
  if (hi <= lo) hi = lo * (1.0 + 1e-12) + 1e-300;
  const double llo = std::log10(lo);
  const double lhi = std::log10(hi);
  std::vector<HistogramBin> out(static_cast<std::size_t>(bins));
  for (int b = 0; b < bins; ++b) {
    out[b].lo = std::pow(10.0, llo + (lhi - llo) * b / bins);
    out[b].hi = std::pow(10.0, llo + (lhi - llo) * (b + 1) / bins);
  }
  out.front().lo = lo;
  out.back().hi = hi;
  for (double v : values) {
    int b = 0;
    if (v > 0.0) b = static_cast<int>(std::floor((std::log10(v) - llo) / (lhi - llo) * bins));
    out[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))].count += 1;
  }
  return out;
}

NamedHistograms final_metric_histograms(const std::vector<Metrics>& finals, int bins) {
  auto collect = [&](auto field) {
    std::vector<double> v;
    v.reserve(finals.size());
    for (const auto& m : finals) v.push_back(field(m));
    return log_histogram(v, bins);
  };
  return {
      {"dist", collect([](const Metrics& m) { return m.dist.value_or(0.0); })},
      {"obj", collect([](const Metrics& m) { return std::abs(m.obj); })},
      {"consensus", collect([](const Metrics& m) { return m.consensus; })},
      {"balance", collect([](const Metrics& m) { return m.balance; })},
  };
}

Experiment2Report experiment2(const ExperimentConfig& config) {
  require(config.rounds >= 1, "experiment2: rounds must be at least 1");
  Experiment2Report report;
  report.rounds.resize(static_cast<std::size_t>(config.rounds));

  RunConfig run;
  run.iterations = config.iterations;
  run.cadence = config.cadence;

  // Rounds are independent; each writes its own slot.
  std::atomic<int> next{0};
  std::atomic<int> resampled{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(config.rounds));
  auto worker = [&] {
    for (int r = next++; r < config.rounds; r = next++) {
      auto& out = report.rounds[static_cast<std::size_t>(r)];
      try {
        out.round = r;
        out.instance_seed = round_seed(config.master_seed, r, kInstanceSalt);
        out.path_seed = round_seed(config.master_seed, r, kPathSalt);
        auto inst = demand_response_instance(out.instance_seed);
        std::uint64_t pool_seed = round_seed(config.master_seed, r, kPoolSalt);
        for (int attempt = 0;; ++attempt) {
          // Pools are built with a connected union, which makes the mean
          // Laplacian connected; validation guards the remaining cases.
          auto pool = GraphModel::erdos_renyi_pool(inst.problem.n, config.pool_size, config.p_lo,
                                                   config.p_hi, pool_seed);
          if (validate_model(pool).passed) {
            out.pool_seed = pool_seed;
            try {
              auto path = run_path(inst.problem, pool, config.noise, config.schedule, run,
                                   out.path_seed, &inst.oracle.X_star);
              out.initial = path.trace.records.front();
              out.first_step = path.first_step;
              out.final = path.final_metrics;
            } catch (const Diverged& d) {
              out.diverged = true;
              out.final.k = d.iteration();
            }
            break;
          }
          if (attempt >= 100) throw GenerationFailure("experiment2: no valid graph pool");
          ++resampled;
          pool_seed = splitmix64(pool_seed);
        }
      } catch (...) {
        errors[static_cast<std::size_t>(r)] = std::current_exception();
      }
    }
  };
  const int workers = std::max(1, std::min(config.threads, config.rounds));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  report.resampled_pools = resampled;

  std::vector<Metrics> finals;
  for (const auto& r : report.rounds)
    if (!r.diverged) finals.push_back(r.final);
  report.histograms = final_metric_histograms(finals);
  return report;
}

}  // namespace rasa
