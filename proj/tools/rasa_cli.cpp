#include "rasa/experiments.hpp"
#include "rasa/io.hpp"
#include "rasa/ode_ref.hpp"
#include "rasa/rng.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace rasa;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNumeric = 1;
constexpr int kExitConfig = 2;

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> paths;
  std::optional<int> rounds;
  std::optional<long> iters;
  std::optional<int> threads;
  std::optional<long> cadence;
  std::optional<double> h;
  std::optional<long> steps;
  std::vector<std::string> sets;
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

Json default_config() {
  return {{"instance_seed", 1},
          {"graph", {{"kind", "erdos_renyi_pool"}, {"pool_size", 30}, {"p_lo", 0.05}, {"p_hi", 0.1}}},
          {"schedule", {{"kind", "power"}, {"a", 1.0}, {"beta", 0.6}}},
          {"run",
           {{"seed", 1},
            {"iterations", 8000},
            {"cadence", 10},
            {"paths", 200},
            {"rounds", 0},
            {"threads", 1},
            {"tracked", {{0, 0}, {1, 0}, {2, 0}}},
            {"h", 1e-3},
            {"steps", 100000},
            {"initial", "default"}}}};
}

void set_dotted(Json& root, const std::string& path, Json value) {
  Json* node = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const auto key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("override '" + path + "': empty path segment");
    if (!node->is_object()) {
      if (!node->is_null()) throw ConfigError("override '" + path + "': '" + key + "' is not inside an object");
      *node = Json::object();
    }
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

Json parse_override_value(const std::string& text) {
  const auto parsed = Json::parse(text, nullptr, false);
  return parsed.is_discarded() ? Json(text) : parsed;
}

Json load_config(const Flags& f) {
  Json cfg = default_config();
  if (!f.config.empty()) {
    const auto text = read_file(f.config);
    Json user;
    try {
      user = Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw ConfigError("config '" + f.config + "': " + e.what());
    }
    if (!user.is_object()) throw ConfigError("config '" + f.config + "': top level must be an object");
    // Explicit problems replace the default generator.
    if (user.contains("problem") || user.contains("random_instance")) cfg.erase("instance_seed");
    if (user.contains("graph")) cfg.erase("graph");
    cfg.merge_patch(user);
  }
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + s + "': expected key.path=value");
    set_dotted(cfg, s.substr(0, eq), parse_override_value(s.substr(eq + 1)));
  }
  if (f.seed) cfg["run"]["seed"] = *f.seed;
  if (f.paths) cfg["run"]["paths"] = *f.paths;
  if (f.rounds) cfg["run"]["rounds"] = *f.rounds;
  if (f.iters) cfg["run"]["iterations"] = *f.iters;
  if (f.threads) cfg["run"]["threads"] = *f.threads;
  if (f.cadence) cfg["run"]["cadence"] = *f.cadence;
  if (f.h) cfg["run"]["h"] = *f.h;
  if (f.steps) cfg["run"]["steps"] = *f.steps;
  return cfg;
}

template <typename T>
T run_field(const Json& cfg, const char* key) {
  const auto& run = cfg.at("run");
  if (!run.contains(key)) throw ConfigError(std::string("run.") + key + ": missing");
  try {
    return run.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(std::string("run.") + key + ": wrong type");
  }
}

struct Setup {
  ProblemSpec problem;
  std::optional<DemandResponseInstance> dr;
  std::optional<GraphModel> model;
  NoiseConfig noise;
  StepSchedule schedule = StepSchedule::power(1.0, 0.6);
  std::uint64_t seed = 1;
};

ProblemSpec build_problem(const Json& cfg, std::optional<DemandResponseInstance>& dr) {
  if (cfg.contains("problem")) return problem_from_json(cfg["problem"]);
  if (cfg.contains("random_instance")) {
    const auto& r = cfg["random_instance"];
    try {
      return random_instance(r.value("seed", std::uint64_t{1}), r.at("n").get<int>(), r.at("m").get<int>(),
                             parse_set_kind(r.value("set", std::string("box"))));
    } catch (const Json::exception& e) {
      throw ConfigError(std::string("random_instance: ") + e.what());
    }
  }
  if (cfg.contains("instance_seed")) {
    const auto& seed = cfg["instance_seed"];
    if (!seed.is_number_integer() || seed.get<long long>() < 0) throw ConfigError("instance_seed: expected a nonnegative integer");
    dr = demand_response_instance(cfg["instance_seed"].get<std::uint64_t>());
    return dr->problem;
  }
  throw ConfigError("config: one of 'problem', 'random_instance', 'instance_seed' is required");
}

/// Graph and noise are optional so `validate` can report partial results.
Setup build_setup(const Json& cfg, bool need_graph = true) {
  Setup s;
  if (!cfg.contains("run") || !cfg["run"].is_object()) throw ConfigError("run: expected an object");
  s.seed = run_field<std::uint64_t>(cfg, "seed");
  s.problem = build_problem(cfg, s.dr);
  if (cfg.contains("noise"))
    s.noise = noise_from_json(cfg["noise"]);
  else if (s.dr)
    s.noise = s.dr->spec.noise;
  s.schedule = schedule_from_json(cfg.value("schedule", Json()));
  if (need_graph) {
    if (!cfg.contains("graph")) throw ConfigError("graph: missing");
    Json g = cfg["graph"];
    if (!g.contains("n")) g["n"] = s.problem.n;
    if (!g.contains("seed")) g["seed"] = s.seed;
    s.model = graph_model_from_json(g);
    if (s.model->n() != s.problem.n) throw ConfigError("graph.n: differs from the agent count");
  }
  return s;
}

OracleSolution certified_oracle(const Setup& s) {
  if (s.dr) return s.dr->oracle;
  auto sol = solve_dual(s.problem);
  if (!sol.kkt.passed) throw ConvergenceFailure("oracle: KKT check failed", sol.kkt.stationarity);
  return sol;
}

RunConfig run_config(const Json& cfg) {
  RunConfig rc;
  rc.iterations = run_field<long>(cfg, "iterations");
  rc.cadence = run_field<long>(cfg, "cadence");
  if (rc.iterations < 1) throw ConfigError("run.iterations: must be at least 1");
  if (rc.cadence < 1) throw ConfigError("run.cadence: must be at least 1");
  if (cfg["run"].contains("tracked")) {
    try {
      rc.tracked = cfg["run"]["tracked"].get<std::vector<std::pair<int, int>>>();
    } catch (const Json::exception&) {
      throw ConfigError("run.tracked: expected [[agent, component], ...]");
    }
  }
  return rc;
}

// ---------------------------------------------------------------------------
// Output directories
// ---------------------------------------------------------------------------

/// Files are staged in a sibling directory that is renamed into place once
/// complete, so a reader never sees a partial output directory.
class OutputDir {
 public:
  explicit OutputDir(const std::string& out) : target_(out) {
    if (out.empty()) throw ConfigError("--out is required");
    if (fs::exists(target_)) throw ConfigError("--out '" + out + "' already exists");
    const auto parent = target_.parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    staging_ = target_;
    staging_ += ".partial";
    fs::remove_all(staging_);
    fs::create_directory(staging_);
  }
  OutputDir(const OutputDir&) = delete;
  OutputDir& operator=(const OutputDir&) = delete;
  ~OutputDir() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(staging_, ec);
    }
  }

  void write(const std::string& name, const std::string& content) { write_file(staging_ / name, content); }
  void write(const std::string& name, const Json& j) { write(name, j.dump(2) + "\n"); }

  void commit() {
    fs::rename(staging_, target_);
    committed_ = true;
  }

 private:
  fs::path target_;
  fs::path staging_;
  bool committed_ = false;
};

std::string version_string() { return std::string("rasa ") + RASA_VERSION; }

Json manifest(const std::string& sub, const Flags& f, const Json& cfg) {
  return {{"subcommand", sub},
          {"config_path", f.config},
          {"out", f.out},
          {"seed", cfg["run"]["seed"]},
          {"overrides", f.sets},
          {"version", version_string()}};
}

void write_common(OutputDir& dir, const std::string& sub, const Flags& f, const Json& cfg, const Setup& s) {
  dir.write("manifest.json", manifest(sub, f, cfg));
  dir.write("config.json", cfg);
  Json inst = to_json(s.problem);
  if (s.dr) {
    auto vecs = [](const std::vector<Vector>& vs) {
      Json a = Json::array();
      for (const auto& v : vs) a.push_back(std::vector<double>(v.data(), v.data() + v.size()));
      return a;
    };
    inst["demand_response"] = {{"generation", vecs(s.dr->spec.generation)},
                               {"nominal", vecs(s.dr->spec.nominal)},
                               {"bounds", vecs(s.dr->spec.bounds)},
                               {"c_range", {-1.0, 1.0}},
                               {"nominal_range", {-1.0, 1.0}},
                               {"generation_offset", 0.15}};
  }
  dir.write("instance.json", inst);
  if (s.model) dir.write("graph.json", to_json(*s.model));
}

std::string tracked_to_csv(const std::vector<std::pair<int, int>>& tracked,
                           const std::vector<std::vector<double>>& rows, long cadence) {
  std::string out = "k";
  for (const auto& [a, c] : tracked) out += ",x_" + std::to_string(a) + "_" + std::to_string(c);
  out += "\n";
  char buf[40];
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out += std::to_string(static_cast<long>(r) * cadence);
    for (double v : rows[r]) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

Trace as_trace(std::vector<Metrics> records) {
  Trace t;
  t.cadence = 1;
  t.records = std::move(records);
  return t;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_validate(const Flags& f) {
  const Json cfg = load_config(f);
  Json report = {{"passed", true}, {"checks", Json::array()}};
  auto check = [&](const std::string& name, bool ok, const std::string& message) {
    report["checks"].push_back({{"check", name}, {"passed", ok}, {"message", message}});
    if (!ok) report["passed"] = false;
    std::cerr << (ok ? "[pass] " : "[FAIL] ") << name << (message.empty() ? "" : ": " + message) << "\n";
  };

  std::optional<Setup> setup;
  try {
    setup = build_setup(cfg, false);
    check("problem", true, "Assumptions 1-2 certified for every agent");
  } catch (const AssumptionViolated& e) {
    check("problem", false, e.what());
  }
  if (setup) {
    try {
      const auto sol = certified_oracle(*setup);
      check("feasibility", true, "coupled problem solved, KKT residuals below 1e-6");
      report["oracle"] = to_json(sol);
    } catch (const NumericalFailure& e) {
      check("feasibility", false, e.what());
    }
    if (!cfg.contains("graph")) throw ConfigError("graph: missing");
    Json g = cfg["graph"];
    if (!g.contains("n")) g["n"] = setup->problem.n;
    if (!g.contains("seed")) g["seed"] = setup->seed;
    const auto model = graph_model_from_json(g);
    if (model.n() != setup->problem.n) throw ConfigError("graph.n: differs from the agent count");
    const auto v = validate_model(model);
    check("graph", v.passed, v.passed ? "Assumption 3 holds: s2 = " + std::to_string(v.s2) : v.message);
    report["graph"] = to_json(v);
    check("schedule", setup->schedule.convergent(),
          setup->schedule.convergent() ? "" : "constant step: non-convergent mode, diagnostics only");
  }
  std::cout << report.dump(2) << "\n";
  if (!f.out.empty()) {
    OutputDir dir(f.out);
    dir.write("manifest.json", manifest("validate", f, cfg));
    dir.write("config.json", cfg);
    dir.write("validation.json", report);
    dir.commit();
  }
  return report["passed"].get<bool>() ? kExitOk : kExitNumeric;
}

int cmd_solve(const Flags& f) {
  const Json cfg = load_config(f);
  const auto s = build_setup(cfg, false);
  const auto sol = certified_oracle(s);
  const Json j = to_json(sol);
  std::cout << j.dump(2) << "\n";
  if (!f.out.empty()) {
    OutputDir dir(f.out);
    write_common(dir, "solve", f, cfg, s);
    dir.write("oracle.json", j);
    dir.commit();
  }
  return kExitOk;
}

int cmd_run(const Flags& f) {
  const Json cfg = load_config(f);
  const auto s = build_setup(cfg);
  const auto sol = certified_oracle(s);
  const auto rc = run_config(cfg);
  OutputDir dir(f.out);
  const auto path = run_path(s.problem, *s.model, s.noise, s.schedule, rc, s.seed, &sol.X_star);
  write_common(dir, "run", f, cfg, s);
  dir.write("oracle.json", to_json(sol));
  dir.write("trace.csv", trace_to_csv(path.trace));
  dir.write("final.csv", trace_to_csv(as_trace({path.final_metrics})));
  if (!rc.tracked.empty()) dir.write("tracked.csv", tracked_to_csv(rc.tracked, path.tracked, rc.cadence));
  dir.commit();
  return kExitOk;
}

int cmd_mc_rounds(const Flags& f, const Json& cfg, int rounds) {
  if (!cfg.contains("instance_seed") || cfg.contains("problem") || cfg.contains("random_instance"))
    throw ConfigError("run.rounds: rounds draw fresh demand-response instances; drop 'problem'");
  ExperimentConfig ec;
  ec.rounds = rounds;
  ec.iterations = run_field<long>(cfg, "iterations");
  ec.cadence = run_field<long>(cfg, "cadence");
  ec.master_seed = run_field<std::uint64_t>(cfg, "seed");
  ec.threads = run_field<int>(cfg, "threads");
  ec.schedule = schedule_from_json(cfg.value("schedule", Json()));
  if (cfg.contains("noise")) ec.noise = noise_from_json(cfg["noise"]);
  const auto& g = cfg.at("graph");
  if (g.value("kind", std::string()) != "erdos_renyi_pool")
    throw ConfigError("graph.kind: rounds resample erdos_renyi_pool graphs");
  ec.pool_size = g.value("pool_size", ec.pool_size);
  ec.p_lo = g.value("p_lo", ec.p_lo);
  ec.p_hi = g.value("p_hi", ec.p_hi);
  if (ec.threads < 1) throw ConfigError("run.threads: must be at least 1");

  OutputDir dir(f.out);
  const auto rep = experiment2(ec);
  std::vector<Metrics> initial, first, finals;
  Json rounds_json = Json::array();
  for (const auto& r : rep.rounds) {
    rounds_json.push_back({{"round", r.round},
                           {"instance_seed", r.instance_seed},
                           {"pool_seed", r.pool_seed},
                           {"path_seed", r.path_seed},
                           {"diverged", r.diverged}});
    if (r.diverged) continue;
    initial.push_back(r.initial);
    first.push_back(r.first_step);
    finals.push_back(r.final);
  }
  dir.write("manifest.json", manifest("mc", f, cfg));
  dir.write("config.json", cfg);
  dir.write("rounds.json", {{"rounds", rounds_json}, {"resampled_pools", rep.resampled_pools}});
  dir.write("rounds_initial.csv", trace_to_csv(as_trace(initial)));
  dir.write("rounds_first_step.csv", trace_to_csv(as_trace(first)));
  dir.write("rounds_final.csv", trace_to_csv(as_trace(finals)));
  for (const auto& [name, bins] : rep.histograms) dir.write("hist_" + name + ".csv", histogram_to_csv(bins));
  dir.write("summary.json", {{"rounds", rounds}, {"diverged", rounds - static_cast<int>(finals.size())},
                             {"final", final_metric_summary(finals)}});
  dir.commit();
  return kExitOk;
}

int cmd_mc(const Flags& f) {
  const Json cfg = load_config(f);
  if (const int rounds = run_field<int>(cfg, "rounds"); rounds > 0) return cmd_mc_rounds(f, cfg, rounds);
  const auto s = build_setup(cfg);
  const auto v = validate_model(*s.model);
  if (!v.passed) throw ConfigError("graph: " + v.message);
  const auto sol = certified_oracle(s);
  const auto rc = run_config(cfg);
  const int paths = run_field<int>(cfg, "paths");
  const int threads = run_field<int>(cfg, "threads");
  if (paths < 1) throw ConfigError("run.paths: must be at least 1");
  if (threads < 1) throw ConfigError("run.threads: must be at least 1");
  OutputDir dir(f.out);
  const auto mc = monte_carlo(s.problem, *s.model, s.noise, s.schedule, rc, paths, s.seed, &sol.X_star, threads);
  std::vector<Metrics> finals;
  for (const auto& m : mc.finals)
    if (m) finals.push_back(*m);
  write_common(dir, "mc", f, cfg, s);
  dir.write("oracle.json", to_json(sol));
  dir.write("trace_mean.csv", trace_to_csv(mc.mean_trace));
  dir.write("finals.csv", trace_to_csv(as_trace(finals)));
  if (!rc.tracked.empty()) dir.write("tracked_mean.csv", tracked_to_csv(rc.tracked, mc.mean_tracked, rc.cadence));
  Json summary = monte_carlo_summary(mc);
  std::cout << summary.dump(2) << "\n";
  dir.write("summary.json", summary);
  dir.commit();
  return kExitOk;
}

int cmd_ode(const Flags& f) {
  const Json cfg = load_config(f);
  const auto s = build_setup(cfg);
  const auto sol = certified_oracle(s);
  const Matrix Lbar = mean_laplacian(*s.model);
  const auto eq = equilibrium_construct(s.problem, Lbar, sol.X_star, sol.lambda_star);

  FlowOptions fo;
  fo.h = run_field<double>(cfg, "h");
  fo.steps = run_field<long>(cfg, "steps");
  fo.record_every = run_field<long>(cfg, "cadence");
  if (!(fo.h > 0.0)) throw ConfigError("run.h: must be positive");
  if (fo.steps < 1) throw ConfigError("run.steps: must be at least 1");
  if (fo.record_every < 1) throw ConfigError("run.cadence: must be at least 1");
  if (!(flow_stability_number(s.problem, Lbar, fo.h) < 1.0))
    throw ConfigError("run.h: step too large for the flow stability bound");

  NetworkState initial = default_initial_state(s.problem);
  const auto init_kind = run_field<std::string>(cfg, "initial");
  if (init_kind == "random") {
    // Finite random start: X projected into Ω, Λ and Z standard normal.
    CounterRng rng(s.seed);
    for (int i = 0; i < s.problem.n; ++i) {
      Vector x(s.problem.m);
      for (auto& v : x) v = 2.0 * rng.normal();
      initial.X.row(i) = project(s.problem.agents[i].set, x).transpose();
    }
    for (auto& v : initial.Lambda.reshaped()) v = rng.normal();
    for (auto& v : initial.Z.reshaped()) v = rng.normal();
  } else if (init_kind != "default") {
    throw ConfigError("run.initial: expected 'default' or 'random'");
  }

  OutputDir dir(f.out);
  const auto fr = flow(initial, s.problem, Lbar, fo, eq.state);
  Trace trace;
  trace.cadence = fo.record_every;
  for (std::size_t t = 0; t < fr.trajectory.size(); ++t) {
    auto m = evaluate_metrics(fr.trajectory[t], s.problem, Lbar, &sol.X_star, fo.h);
    m.k = fr.trajectory[t].k;
    trace.records.push_back(m);
  }
  std::string lyap = "step,lyapunov\n";
  char buf[64];
  for (std::size_t t = 0; t < fr.lyapunov.size(); ++t) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", t, fr.lyapunov[t]);
    lyap += buf;
  }
  const long first_increase = first_lyapunov_increase(fr.lyapunov);
  const Json summary = {{"h", fo.h},
                        {"steps", fo.steps},
                        {"lyapunov_initial", fr.lyapunov.front()},
                        {"lyapunov_final", fr.lyapunov.back()},
                        {"first_lyapunov_increase", first_increase},
                        {"lyapunov_monotone", first_increase < 0},
                        {"final_dist", (fr.final_state.X - sol.X_star).norm()},
                        {"equilibrium_residual", eq.residual}};
  std::cout << summary.dump(2) << "\n";
  write_common(dir, "ode", f, cfg, s);
  dir.write("oracle.json", to_json(sol));
  dir.write("flow.csv", trace_to_csv(trace));
  dir.write("lyapunov.csv", lyap);
  dir.write("summary.json", summary);
  dir.commit();
  return kExitOk;
}

/// Rebuilds summaries from stored CSVs in an existing output directory.
int cmd_report(const Flags& f) {
  if (f.out.empty()) throw ConfigError("--out is required");
  const fs::path dir(f.out);
  if (!fs::is_directory(dir)) throw ConfigError("--out '" + f.out + "' is not a directory");
  Json report = {{"directory", f.out}, {"version", version_string()}};
  auto load = [&](const char* name) { return trace_from_csv(read_file(dir / name)).records; };
  auto endpoints = [](const std::vector<Metrics>& r) -> Json {
    if (r.empty()) return nullptr;
    auto row = [](const Metrics& m) {
      return Json{{"k", m.k},
                  {"dist", m.dist ? Json(*m.dist) : Json(nullptr)},
                  {"obj", m.obj},
                  {"consensus", m.consensus},
                  {"balance", m.balance},
                  {"state_norm", m.state_norm}};
    };
    return {{"first", row(r.front())}, {"last", row(r.back())}, {"records", r.size()}};
  };
  bool any = false;
  for (const char* name : {"trace.csv", "trace_mean.csv", "flow.csv"}) {
    if (!fs::exists(dir / name)) continue;
    report[name] = endpoints(load(name));
    any = true;
  }
  if (fs::exists(dir / "finals.csv")) {
    const auto finals = load("finals.csv");
    report["final"] = final_metric_summary(finals);
    any = true;
  }
  if (fs::exists(dir / "rounds_final.csv")) {
    const auto finals = load("rounds_final.csv");
    report["final"] = final_metric_summary(finals);
    for (const auto& [name, bins] : final_metric_histograms(finals))
      write_file(dir / ("hist_" + name + ".csv"), histogram_to_csv(bins));
    any = true;
  }
  if (!any) throw ConfigError("--out '" + f.out + "' holds no traces");
  write_file(dir / "report.json", report.dump(2) + "\n");
  std::cout << report.dump(2) << "\n";
  return kExitOk;
}

void emit_error(const char* kind, const std::string& message, int code) {
  std::cerr << Json{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed resource allocation by stochastic approximation over random graphs"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON config file");
    sub->add_option("--out", f.out, "Output directory (created atomically)");
    sub->add_option("--seed", f.seed, "Master seed (run.seed)");
    sub->add_option("--paths", f.paths, "Monte Carlo paths (run.paths)");
    sub->add_option("--iters", f.iters, "Iterations per path (run.iterations)");
    sub->add_option("--threads", f.threads, "Worker threads; results do not depend on it");
    sub->add_option("--cadence", f.cadence, "Trace cadence (run.cadence)");
    sub->add_option("--set", f.sets, "Override a config field: key.path=value")->take_all();
  };
  struct Entry {
    const char* name;
    const char* help;
    int (*fn)(const Flags&);
  };
  const Entry entries[] = {
      {"validate", "Check Assumptions 1-3 for a config", cmd_validate},
      {"solve", "Solve the instance centrally and certify KKT", cmd_solve},
      {"run", "Run one sample path", cmd_run},
      {"mc", "Monte Carlo over paths, or over fresh rounds with --rounds", cmd_mc},
      {"ode", "Integrate the projected mean ODE", cmd_ode},
      {"report", "Rebuild summaries from a stored output directory", cmd_report},
  };
  std::vector<std::pair<CLI::App*, int (*)(const Flags&)>> subs;
  for (const auto& e : entries) {
    auto* sub = app.add_subcommand(e.name, e.help);
    common(sub);
    subs.emplace_back(sub, e.fn);
    if (std::string(e.name) == "mc") sub->add_option("--rounds", f.rounds, "Fresh instance and pool per round");
    if (std::string(e.name) == "ode") {
      sub->set_help_flag("--help", "Print this help message and exit");
      sub->add_option("--h", f.h, "Euler step (run.h)");
      sub->add_option("--steps", f.steps, "Euler steps (run.steps)");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error("usage", e.what(), kExitConfig);
    return kExitConfig;
  }

  try {
    for (const auto& [sub, fn] : subs)
      if (sub->parsed()) return fn(f);
  } catch (const ConfigError& e) {
    emit_error("config", e.what(), kExitConfig);
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    emit_error("invalid_argument", e.what(), kExitConfig);
    return kExitConfig;
  } catch (const NumericalFailure& e) {
    emit_error("numerical", e.what(), kExitNumeric);
    return kExitNumeric;
  } catch (const Error& e) {
    emit_error("failure", e.what(), kExitNumeric);
    return kExitNumeric;
  } catch (const fs::filesystem_error& e) {
    emit_error("io", e.what(), kExitNumeric);
    return kExitNumeric;
  } catch (const Json::exception& e) {
    emit_error("config", e.what(), kExitConfig);
    return kExitConfig;
  }
  return kExitConfig;
}
