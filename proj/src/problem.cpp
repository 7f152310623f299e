#include "rasa/problem.hpp"

#include "rasa/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rasa {

// ---------------------------------------------------------------------------
// Objectives
// ---------------------------------------------------------------------------

ObjectiveSpec ObjectiveSpec::quadratic(Matrix Q, Vector c, std::optional<double> lipschitz_hint) {
  require(Q.rows() == Q.cols(), "quadratic objective: Q must be square");
  require(Q.rows() == c.size(), "quadratic objective: Q and c dimensions differ");
  require(Q.rows() >= 1, "quadratic objective: empty Q");
  if (!((Q - Q.transpose()).cwiseAbs().maxCoeff() <= 1e-9))
    throw AssumptionViolated(1, "quadratic objective: Q is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(Q, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues().minCoeff() > 0.0))
    throw AssumptionViolated(1, "quadratic objective: Q is not positive definite");
  const double lip = 2.0 * es.eigenvalues().maxCoeff();
  if (lipschitz_hint) {
    require(*lipschitz_hint >= 0.0, "quadratic objective: negative Lipschitz hint");
    if (!(lip <= *lipschitz_hint * (1.0 + 1e-12)))
      throw AssumptionViolated(1, "quadratic objective: 2*lambda_max(Q) exceeds the Lipschitz hint");
  }
  return ObjectiveSpec(QuadraticObjective{std::move(Q), std::move(c)}, lipschitz_hint);
}

ObjectiveSpec ObjectiveSpec::custom(CustomObjective obj, std::optional<double> lipschitz_hint) {
  require(obj.dim >= 1, "custom objective: dimension must be positive");
  require(static_cast<bool>(obj.gradient), "custom objective: missing gradient oracle");
  return ObjectiveSpec(std::move(obj), lipschitz_hint);
}

Eigen::Index ObjectiveSpec::dim() const {
  return std::visit(
      [](const auto& k) -> Eigen::Index {
        if constexpr (std::is_same_v<std::decay_t<decltype(k)>, QuadraticObjective>)
          return k.c.size();
        else
          return k.dim;
      },
      kind_);
}

double ObjectiveSpec::lipschitz() const {
  if (const auto* q = as_quadratic()) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(q->Q, Eigen::EigenvaluesOnly);
    return 2.0 * es.eigenvalues().maxCoeff();
  }
  if (hint_) return *hint_;
  throw InvalidArgument("custom objective has no Lipschitz hint");
}

Vector grad(const ObjectiveSpec& obj, const Vector& x) {
  require(x.size() == obj.dim(), "grad: dimension mismatch");
  if (const auto* q = obj.as_quadratic()) return 2.0 * (q->Q * x) + q->c;
  return std::get<CustomObjective>(obj.kind()).gradient(x);
}

double value(const ObjectiveSpec& obj, const Vector& x) {
  require(x.size() == obj.dim(), "value: dimension mismatch");
  if (const auto* q = obj.as_quadratic()) return x.dot(q->Q * x) + q->c.dot(x);
  const auto& c = std::get<CustomObjective>(obj.kind());
  if (!c.value) throw InvalidArgument("custom objective has no value oracle");
  return c.value(x);
}

// ---------------------------------------------------------------------------
// Sets
// ---------------------------------------------------------------------------

LocalSet LocalSet::unconstrained(Eigen::Index dim) {
  require(dim >= 1, "unconstrained set: dimension must be positive");
  return LocalSet(Unconstrained{dim});
}

LocalSet LocalSet::box(Vector lo, Vector hi) {
  require(lo.size() == hi.size() && lo.size() >= 1, "box: lo/hi dimension mismatch");
  if (!(lo.array() <= hi.array()).all()) throw AssumptionViolated(2, "box: lo must not exceed hi");
  return LocalSet(Box{std::move(lo), std::move(hi)});
}

LocalSet LocalSet::polyhedron(Matrix R, Vector l) {
  require(R.rows() == l.size() && R.rows() >= 1 && R.cols() >= 1,
          "polyhedron: R and l dimensions differ");
  for (Eigen::Index j = 0; j < R.rows(); ++j)
    require(R.row(j).norm() > 0.0, "polyhedron: zero constraint row");
  auto cert = find_interior_point(R, l);
  if (!(cert.slack > kInteriorSlack))
    throw AssumptionViolated(2, "polyhedron: no interior point with slack > 1e-6; best slack " +
                                    std::to_string(cert.slack));
  return LocalSet(Polyhedron{std::move(R), std::move(l), std::move(cert.point), cert.slack});
}

Eigen::Index LocalSet::dim() const {
  struct {
    Eigen::Index operator()(const Unconstrained& u) const { return u.dim; }
    Eigen::Index operator()(const Box& b) const { return b.lo.size(); }
    Eigen::Index operator()(const Polyhedron& p) const { return p.R.cols(); }
  } v;
  return std::visit(v, kind_);
}

std::string LocalSet::kind_name() const {
  switch (kind_.index()) {
    case 0: return "unconstrained";
    case 1: return "box";
    default: return "polyhedron";
  }
}

InteriorCertificate find_interior_point(const Matrix& R, const Vector& l, int iterations) {
  const Vector row_norm = R.rowwise().norm();
  auto slack_of = [&](const Vector& x, Eigen::Index& arg) {
    const Vector s = (l - R * x).cwiseQuotient(row_norm);
    return s.minCoeff(&arg);
  };
  const double scale = 1.0 + (l.cwiseQuotient(row_norm)).cwiseAbs().maxCoeff();
  const double radius = 1e6 * scale;

  Vector x = Vector::Zero(R.cols());
  InteriorCertificate best{x, -std::numeric_limits<double>::infinity()};
  for (int t = 0; t < iterations; ++t) {
    Eigen::Index j;
    const double s = slack_of(x, j);
    if (s > best.slack) best = {x, s};
    // Supergradient of the min-slack function is −r_j/‖r_j‖ at the active facet.
    x -= (scale / std::sqrt(t + 1.0)) * R.row(j).transpose() / row_norm(j);
    const double nx = x.norm();
    if (nx > radius) x *= radius / nx;
  }
  Eigen::Index j;
  const double s = slack_of(x, j);
  if (s > best.slack) best = {x, s};
  return best;
}

namespace {

Vector project_polyhedron(const Polyhedron& p, const Vector& y, const ProjectionOptions& opts) {
  const Eigen::Index rows = p.R.rows();
  if (((p.R * y - p.l).array() <= 0.0).all()) return y;

  const Vector row_sq = p.R.rowwise().squaredNorm();
  Vector mu = Vector::Zero(rows);  // Dykstra corrections, one per halfspace
  Vector x = y;

  // Exact projection for a candidate active set: x = y − R_Aᵀν with
  // R_A x = l_A. Accepted only if ν ≥ 0 and x is feasible (KKT).
  auto polish = [&](Vector& out) {
    std::vector<Eigen::Index> active;
    for (Eigen::Index j = 0; j < rows; ++j)
      if (mu(j) > 0.0) active.push_back(j);
    if (active.empty() || static_cast<Eigen::Index>(active.size()) > p.R.cols()) return false;
    const auto k = static_cast<Eigen::Index>(active.size());
    Matrix RA(k, p.R.cols());
    Vector lA(k);
    for (Eigen::Index a = 0; a < k; ++a) {
      RA.row(a) = p.R.row(active[a]);
      lA(a) = p.l(active[a]);
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(RA * RA.transpose());
    if (qr.rank() < k) return false;
    const Vector nu = qr.solve(RA * y - lA);
    if ((nu.array() < 0.0).any()) return false;
    Vector cand = y - RA.transpose() * nu;
    const double viol = (p.R * cand - p.l).maxCoeff();
    if (viol > 1e-12 * (1.0 + p.l.cwiseAbs().maxCoeff())) return false;
    out = std::move(cand);
    return true;
  };

  double residual = 0.0;
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    double moved = 0.0;
    for (Eigen::Index j = 0; j < rows; ++j) {
      const double g = p.R.row(j).dot(x) - p.l(j);
      const double next = std::max(0.0, mu(j) + g / row_sq(j));
      const double delta = next - mu(j);
      if (delta != 0.0) {
        x -= delta * p.R.row(j).transpose();
        moved = std::max(moved, std::abs(delta) * std::sqrt(row_sq(j)));
        mu(j) = next;
      }
    }
    const double viol = std::max(0.0, (p.R * x - p.l).maxCoeff());
    residual = std::max(moved, viol);
    if (sweep % 4 == 0 || residual < opts.tol) {
      Vector exact;
      if (polish(exact)) return exact;
    }
    if (residual < opts.tol) return x;
  }
  throw NumericalFailure("polyhedron projection did not converge within " +
                             std::to_string(opts.max_sweeps) + " sweeps",
                         residual);
}

}  // namespace

Vector project(const LocalSet& set, const Vector& y, const ProjectionOptions& opts) {
  require(y.size() == set.dim(), "project: dimension mismatch");
  struct {
    const Vector& y;
    const ProjectionOptions& opts;
    Vector operator()(const Unconstrained&) const { return y; }
    Vector operator()(const Box& b) const { return y.cwiseMax(b.lo).cwiseMin(b.hi); }
    Vector operator()(const Polyhedron& p) const { return project_polyhedron(p, y, opts); }
  } v{y, opts};
  return std::visit(v, set.kind());
}

double violation(const LocalSet& set, const Vector& x) {
  require(x.size() == set.dim(), "violation: dimension mismatch");
  struct {
    const Vector& x;
    double operator()(const Unconstrained&) const { return 0.0; }
    double operator()(const Box& b) const {
      return std::max({0.0, (b.lo - x).maxCoeff(), (x - b.hi).maxCoeff()});
    }
    double operator()(const Polyhedron& p) const {
      return std::max(0.0, (p.R * x - p.l).maxCoeff());
    }
  } v{x};
  return std::visit(v, set.kind());
}

bool contains(const LocalSet& set, const Vector& x, double tol) {
  require(tol >= 0.0, "contains: negative tolerance");
  return violation(set, x) <= tol;
}

// ---------------------------------------------------------------------------
// Problems
// ---------------------------------------------------------------------------

void ProblemSpec::validate() const {
  require(n >= 2, "problem: need at least two agents");
  require(m >= 1, "problem: allocation dimension must be positive");
  require(static_cast<int>(agents.size()) == n, "problem: agent count differs from n");
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto& a = agents[i];
    const std::string who = "problem: agent " + std::to_string(i);
    require(a.objective.dim() == m, who + " objective dimension differs from m");
    require(a.set.dim() == m, who + " set dimension differs from m");
    require(a.resource.size() == m, who + " resource dimension differs from m");
  }
}

AgentMatrix ProblemSpec::resources() const {
  AgentMatrix D(n, m);
  for (int i = 0; i < n; ++i) D.row(i) = agents[i].resource.transpose();
  return D;
}

Vector ProblemSpec::total_resource() const {
  Vector s = Vector::Zero(m);
  for (const auto& a : agents) s += a.resource;
  return s;
}

double stationarity_residual(const AgentSpec& agent, const Vector& x, const Vector& lambda) {
  require(x.size() == agent.dim() && lambda.size() == agent.dim(),
          "stationarity_residual: dimension mismatch");
  const Vector g = grad(agent.objective, x) - lambda;
  return (x - project(agent.set, x - g)).norm();
}

double objective_value(const ProblemSpec& problem, const AgentMatrix& X) {
  double total = 0.0;
  for (int i = 0; i < problem.n; ++i)
    total += value(problem.agents[i].objective, X.row(i).transpose());
  return total;
}

SetKind parse_set_kind(const std::string& name) {
  if (name == "unconstrained") return SetKind::Unconstrained;
  if (name == "box") return SetKind::Box;
  if (name == "polyhedron") return SetKind::Polyhedron;
  throw InvalidArgument("unknown set kind '" + name + "'");
}

Matrix random_spd(CounterRng& rng, int m, double lo, double hi) {
  Matrix G(m, m);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) G(r, c) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix U = qr.householderQ();
  // Sign fix on R's diagonal makes U Haar-distributed.
  const Matrix Rm = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int c = 0; c < m; ++c)
    if (Rm(c, c) < 0.0) U.col(c) *= -1.0;
  Vector s(m);
  for (int k = 0; k < m; ++k) s(k) = rng.uniform(lo, hi);
  Matrix Q = U * s.asDiagonal() * U.transpose();
  return 0.5 * (Q + Q.transpose());
}

namespace {

Vector uniform_vector(CounterRng& rng, int m, double lo, double hi) {
  Vector v(m);
  for (int k = 0; k < m; ++k) v(k) = rng.uniform(lo, hi);
  return v;
}

AgentSpec random_agent(CounterRng& rng, int m, SetKind kind) {
  Matrix Q = random_spd(rng, m, 0.5, 5.0);
  Vector c = uniform_vector(rng, m, -1.0, 1.0);
  Vector d = uniform_vector(rng, m, -1.0, 1.0);
  auto objective = ObjectiveSpec::quadratic(std::move(Q), std::move(c));
  switch (kind) {
    case SetKind::Unconstrained:
      return AgentSpec{std::move(objective), LocalSet::unconstrained(m), std::move(d)};
    case SetKind::Box: {
      Vector lo = d - uniform_vector(rng, m, 0.5, 1.5);
      Vector hi = d + uniform_vector(rng, m, 0.5, 1.5);
      return AgentSpec{std::move(objective), LocalSet::box(std::move(lo), std::move(hi)), std::move(d)};
    }
    case SetKind::Polyhedron: {
      // 2m random facets plus a bounding box, all at margin [0.5, 1.5] from d.
      const int rows = 4 * m;
      Matrix R = Matrix::Zero(rows, m);
      for (int j = 0; j < 2 * m; ++j) {
        Vector r(m);
        for (int k = 0; k < m; ++k) r(k) = rng.normal();
        R.row(j) = r.normalized().transpose();
      }
      for (int k = 0; k < m; ++k) {
        R(2 * m + 2 * k, k) = 1.0;
        R(2 * m + 2 * k + 1, k) = -1.0;
      }
      Vector l = R * d + uniform_vector(rng, rows, 0.5, 1.5);
      return AgentSpec{std::move(objective), LocalSet::polyhedron(std::move(R), std::move(l)),
                       std::move(d)};
    }
  }
  throw InvalidArgument("unknown set kind");
}

}  // namespace

ProblemSpec random_instance(std::uint64_t seed, int n, int m, SetKind kind) {
  require(n >= 2, "random_instance: n must be at least 2");
  require(m >= 1, "random_instance: m must be at least 1");
  for (std::uint64_t attempt = 0; attempt < 100; ++attempt) {
    CounterRng rng(splitmix64(seed) ^ splitmix64(attempt + 0x5eed));
    try {
      ProblemSpec p;
      p.n = n;
      p.m = m;
      p.agents.reserve(n);
      for (int i = 0; i < n; ++i) p.agents.push_back(random_agent(rng, m, kind));
      p.validate();
      bool feasible = true;  // X = D must be a feasible coupled allocation
      for (const auto& a : p.agents) feasible = feasible && contains(a.set, a.resource, 0.0);
      if (feasible) return p;
    } catch (const InvalidArgument&) {
      // degenerate draw; try the next attempt
    }
  }
  throw GenerationFailure("random_instance: no feasible instance within 100 attempts");
}

}  // namespace rasa
