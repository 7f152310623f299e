#include "rasa/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rasa {

namespace {

const Json& field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    throw ConfigError(where + ": missing field '" + key + "'");
  return j.at(key);
}

double number(const Json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  return j.get<double>();
}

int integer(const Json& j, const std::string& where) {
  if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
  return j.get<int>();
}

Vector vector_from(const Json& j, Eigen::Index size, const std::string& where) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != size)
    throw ConfigError(where + ": expected an array of " + std::to_string(size) + " numbers");
  Vector v(size);
  for (Eigen::Index k = 0; k < size; ++k) v(k) = number(j[static_cast<std::size_t>(k)], where);
  return v;
}

Matrix matrix_from(const Json& j, Eigen::Index rows, Eigen::Index cols, const std::string& where) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows * cols)
    throw ConfigError(where + ": expected a row-major array of " + std::to_string(rows * cols) +
                      " numbers");
  Matrix M(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      M(r, c) = number(j[static_cast<std::size_t>(r * cols + c)], where);
  return M;
}

template <typename Derived>
Json flat(const Eigen::MatrixBase<Derived>& M) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r)
    for (Eigen::Index c = 0; c < M.cols(); ++c) a.push_back(M(r, c));
  return a;
}

Json set_to_json(const LocalSet& set) {
  struct {
    Json operator()(const Unconstrained&) const { return {{"kind", "unconstrained"}}; }
    Json operator()(const Box& b) const { return {{"kind", "box"}, {"lo", flat(b.lo)}, {"hi", flat(b.hi)}}; }
    Json operator()(const Polyhedron& p) const {
      return {{"kind", "polyhedron"}, {"rows", p.R.rows()}, {"R", flat(p.R)}, {"l", flat(p.l)}};
    }
  } v;
  return std::visit(v, set.kind());
}

LocalSet set_from_json(const Json& j, int m, const std::string& where) {
  const auto& kind = field(j, "kind", where);
  if (!kind.is_string()) throw ConfigError(where + ".kind: expected a string");
  const auto name = kind.get<std::string>();
  try {
    if (name == "unconstrained") return LocalSet::unconstrained(m);
    if (name == "box")
      return LocalSet::box(vector_from(field(j, "lo", where), m, where + ".lo"),
                           vector_from(field(j, "hi", where), m, where + ".hi"));
    if (name == "polyhedron") {
      const auto& lj = field(j, "l", where);
      if (!lj.is_array() || lj.empty()) throw ConfigError(where + ".l: expected a nonempty array");
      const auto rows = static_cast<Eigen::Index>(lj.size());
      return LocalSet::polyhedron(matrix_from(field(j, "R", where), rows, m, where + ".R"),
                                  vector_from(lj, rows, where + ".l"));
    }
  } catch (const AssumptionViolated&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  throw ConfigError(where + ".kind: unknown set kind '" + name + "'");
}

}  // namespace

Json to_json(const ProblemSpec& problem) {
  Json agents = Json::array();
  for (const auto& a : problem.agents) {
    const auto* q = a.objective.as_quadratic();
    if (!q) throw InvalidArgument("to_json: custom objectives cannot be serialized");
    agents.push_back({{"Q", flat(q->Q)}, {"c", flat(q->c)}, {"set", set_to_json(a.set)}, {"d", flat(a.resource)}});
  }
  return {{"n", problem.n}, {"m", problem.m}, {"agents", agents}};
}

ProblemSpec problem_from_json(const Json& j) {
  ProblemSpec p;
  p.n = integer(field(j, "n", "problem"), "problem.n");
  p.m = integer(field(j, "m", "problem"), "problem.m");
  if (p.n < 2) throw ConfigError("problem.n: need at least two agents");
  if (p.m < 1) throw ConfigError("problem.m: must be positive");
  const auto& agents = field(j, "agents", "problem");
  if (!agents.is_array() || static_cast<int>(agents.size()) != p.n)
    throw ConfigError("problem.agents: expected an array of n agents");
  for (int i = 0; i < p.n; ++i) {
    const std::string where = "problem.agents[" + std::to_string(i) + "]";
    const auto& a = agents[static_cast<std::size_t>(i)];
    Matrix Q = matrix_from(field(a, "Q", where), p.m, p.m, where + ".Q");
    Vector c = vector_from(field(a, "c", where), p.m, where + ".c");
    Vector d = vector_from(field(a, "d", where), p.m, where + ".d");
    std::optional<double> hint;
    if (a.contains("lipschitz_hint")) hint = number(a["lipschitz_hint"], where + ".lipschitz_hint");
    ObjectiveSpec obj = [&] {
      try {
        return ObjectiveSpec::quadratic(std::move(Q), std::move(c), hint);
      } catch (const AssumptionViolated&) {
        throw;
      } catch (const InvalidArgument& e) {
        throw ConfigError(where + ": " + e.what());
      }
    }();
    p.agents.push_back(AgentSpec{std::move(obj), set_from_json(field(a, "set", where), p.m, where + ".set"),
                                 std::move(d)});
  }
  try {
    p.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return p;
}

Json to_json(const GraphModel& model) {
  Json j = {{"n", model.n()}, {"kind", model.kind_name()}};
  if (const auto* pool = model.pool()) {
    Json graphs = Json::array();
    for (const auto& g : *pool) graphs.push_back(flat(g));
    j["graphs"] = graphs;
  }
  if (const auto* e = std::get_if<ErdosRenyiPool>(&model.kind())) {
    j["p_lo"] = e->p_lo;
    j["p_hi"] = e->p_hi;
    j["pool_size"] = e->pool_size;
  }
  if (const auto* g = std::get_if<Gossip>(&model.kind())) j["base"] = flat(g->base);
  if (const auto* b = std::get_if<Broadcast>(&model.kind())) j["base"] = flat(b->base);
  return j;
}

GraphModel graph_model_from_json(const Json& j) {
  const int n = integer(field(j, "n", "graph"), "graph.n");
  const auto& kind = field(j, "kind", "graph");
  if (!kind.is_string()) throw ConfigError("graph.kind: expected a string");
  const auto name = kind.get<std::string>();
  auto graphs = [&] {
    const auto& gj = field(j, "graphs", "graph");
    if (!gj.is_array() || gj.empty()) throw ConfigError("graph.graphs: expected a nonempty array");
    std::vector<Matrix> out;
    for (std::size_t g = 0; g < gj.size(); ++g)
      out.push_back(matrix_from(gj[g], n, n, "graph.graphs[" + std::to_string(g) + "]"));
    return out;
  };
  auto base = [&]() -> Matrix {
    if (!j.contains("base")) return {};
    return matrix_from(j["base"], n, n, "graph.base");
  };
  try {
    if (name == "fixed_pool") return GraphModel::fixed_pool(graphs());
    if (name == "erdos_renyi_pool") {
      // A stored pool is reused verbatim; otherwise one is drawn from `seed`.
      if (j.contains("graphs")) return GraphModel::fixed_pool(graphs());
      const std::uint64_t seed = j.value("seed", std::uint64_t{1});
      return GraphModel::erdos_renyi_pool(n, integer(field(j, "pool_size", "graph"), "graph.pool_size"),
                                          number(field(j, "p_lo", "graph"), "graph.p_lo"),
                                          number(field(j, "p_hi", "graph"), "graph.p_hi"), seed);
    }
    if (name == "gossip") return GraphModel::gossip(n, base());
    if (name == "broadcast") return GraphModel::broadcast(n, base());
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("graph: ") + e.what());
  }
  throw ConfigError("graph.kind: unknown graph kind '" + name + "'");
}

Json to_json(const KktReport& r) {
  return {{"stationarity", r.stationarity},
          {"balance", r.balance},
          {"membership", r.membership},
          {"stationarity_per_agent", r.stationarity_per_agent},
          {"all_agents_active", r.all_agents_active},
          {"passed", r.passed}};
}

Json to_json(const OracleSolution& sol) {
  Json lambda = Json::array();
  for (Eigen::Index k = 0; k < sol.lambda_star.size(); ++k) {
    const double v = sol.lambda_star(k);
    lambda.push_back(std::isnan(v) ? Json(nullptr) : Json(v));
  }
  return {{"X", flat(sol.X_star)},
          {"lambda", lambda},
          {"residuals", {{"dual", sol.dual_residual}, {"stationarity", sol.stationarity_residuals}, {"kkt", to_json(sol.kkt)}}},
          {"iterations", sol.iterations_used}};
}

OracleSolution oracle_solution_from_json(const Json& j, int n, int m) {
  OracleSolution sol;
  sol.X_star = matrix_from(field(j, "X", "oracle"), n, m, "oracle.X");
  const auto& lj = field(j, "lambda", "oracle");
  if (!lj.is_array() || static_cast<int>(lj.size()) != m) throw ConfigError("oracle.lambda: wrong size");
  sol.lambda_star.resize(m);
  for (int k = 0; k < m; ++k)
    sol.lambda_star(k) = lj[static_cast<std::size_t>(k)].is_null()
                             ? std::numeric_limits<double>::quiet_NaN()
                             : number(lj[static_cast<std::size_t>(k)], "oracle.lambda");
  if (j.contains("residuals") && j["residuals"].contains("dual"))
    sol.dual_residual = number(j["residuals"]["dual"], "oracle.residuals.dual");
  sol.iterations_used = j.value("iterations", 0L);
  return sol;
}

Json to_json(const NoiseConfig& noise) {
  Json g;
  switch (noise.gradient.kind) {
    case GradientNoise::Kind::None: g = {{"kind", "none"}}; break;
    case GradientNoise::Kind::Gaussian: g = {{"kind", "gaussian"}, {"sigma", noise.gradient.sigma}}; break;
    case GradientNoise::Kind::SampledQuadratic:
      g = {{"kind", "sampled_quadratic"}, {"sigma_psi", noise.gradient.sigma_psi}, {"sigma_theta", noise.gradient.sigma_theta}};
      break;
  }
  auto channel = [](const std::optional<double>& s) -> Json {
    if (!s) return {{"kind", "none"}};
    return {{"kind", "gaussian"}, {"sigma", *s}};
  };
  return {{"gradient", g},
          {"resource", channel(noise.resource)},
          {"channel_lambda", channel(noise.channel_lambda)},
          {"channel_z", channel(noise.channel_z)}};
}

NoiseConfig noise_from_json(const Json& j) {
  NoiseConfig nc;
  if (j.is_null()) return nc;
  if (!j.is_object()) throw ConfigError("noise: expected an object");
  auto kind_of = [](const Json& c, const std::string& where) {
    const auto& k = field(c, "kind", where);
    if (!k.is_string()) throw ConfigError(where + ".kind: expected a string");
    return k.get<std::string>();
  };
  if (j.contains("gradient")) {
    const auto& g = j["gradient"];
    const auto kind = kind_of(g, "noise.gradient");
    if (kind == "gaussian") {
      nc.gradient.kind = GradientNoise::Kind::Gaussian;
      nc.gradient.sigma = number(field(g, "sigma", "noise.gradient"), "noise.gradient.sigma");
    } else if (kind == "sampled_quadratic") {
      nc.gradient.kind = GradientNoise::Kind::SampledQuadratic;
      nc.gradient.sigma_psi = number(field(g, "sigma_psi", "noise.gradient"), "noise.gradient.sigma_psi");
      nc.gradient.sigma_theta = number(field(g, "sigma_theta", "noise.gradient"), "noise.gradient.sigma_theta");
    } else if (kind != "none") {
      throw ConfigError("noise.gradient.kind: unknown kind '" + kind + "'");
    }
  }
  auto channel = [&](const char* key, std::optional<double>& out) {
    if (!j.contains(key)) return;
    const std::string where = std::string("noise.") + key;
    const auto kind = kind_of(j[key], where);
    if (kind == "gaussian")
      out = number(field(j[key], "sigma", where), where + ".sigma");
    else if (kind != "none")
      throw ConfigError(where + ".kind: unknown kind '" + kind + "'");
  };
  channel("resource", nc.resource);
  channel("channel_lambda", nc.channel_lambda);
  channel("channel_z", nc.channel_z);
  try {
    nc.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return nc;
}

Json to_json(const StepSchedule& s) {
  if (s.kind() == StepSchedule::Kind::Constant) return {{"kind", "constant"}, {"a", s.a()}};
  return {{"kind", "power"}, {"a", s.a()}, {"beta", s.beta()}};
}

StepSchedule schedule_from_json(const Json& j) {
  if (j.is_null()) return StepSchedule::power(1.0, 0.6);
  const auto& k = field(j, "kind", "schedule");
  if (!k.is_string()) throw ConfigError("schedule.kind: expected a string");
  const auto kind = k.get<std::string>();
  try {
    if (kind == "power")
      return StepSchedule::power(j.contains("a") ? number(j["a"], "schedule.a") : 1.0,
                                 j.contains("beta") ? number(j["beta"], "schedule.beta") : 0.6);
    if (kind == "constant") return StepSchedule::constant(number(field(j, "a", "schedule"), "schedule.a"));
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("schedule.kind: unknown kind '" + kind + "'");
}

Json to_json(const ValidationReport& r) {
  return {{"symmetry_defect", r.symmetry_defect}, {"s2", r.s2}, {"passed", r.passed}, {"message", r.message}};
}

Json final_metric_summary(const std::vector<Metrics>& finals) {
  std::vector<double> dist, obj, consensus, balance, norm;
  for (const auto& f : finals) {
    if (f.dist) dist.push_back(*f.dist);
    obj.push_back(f.obj);
    consensus.push_back(f.consensus);
    balance.push_back(f.balance);
    norm.push_back(f.state_norm);
  }
  auto q = [](std::vector<double> v) -> Json {
    if (v.empty()) return nullptr;
    const auto s = summarize(std::move(v));
    return {{"mean", s.mean}, {"median", s.median}, {"p90", s.p90}};
  };
  return {{"dist", q(dist)}, {"obj", q(obj)}, {"consensus", q(consensus)}, {"balance", q(balance)}, {"state_norm", q(norm)}};
}

Json monte_carlo_summary(const MonteCarloResult& mc) {
  std::vector<Metrics> finals;
  for (const auto& f : mc.finals)
    if (f) finals.push_back(*f);
  Json diverged_paths = Json::array();
  for (const auto& d : mc.diverged) diverged_paths.push_back({{"path", d.path}, {"iteration", d.iteration}});
  return {{"paths", mc.paths},
          {"diverged", mc.diverged.size()},
          {"diverged_paths", diverged_paths},
          {"final", final_metric_summary(finals)}};
}

std::string histogram_to_csv(const std::vector<HistogramBin>& bins) {
  std::string out = "bin_lo,bin_hi,count\n";
  char buf[96];
  for (const auto& b : bins) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%ld\n", b.lo, b.hi, b.count);
    out += buf;
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp + "'");
    out << content;
    if (!out) throw Error("write failed for '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace rasa
