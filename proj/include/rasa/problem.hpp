#pragma once

#include "rasa/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace rasa {

// ---------------------------------------------------------------------------
// Objectives
// ---------------------------------------------------------------------------

/// f(x) = xᵀQx + cᵀx with Q symmetric positive definite.
struct QuadraticObjective {
  Matrix Q;
  Vector c;
};

/// Objective supplied as callables. Not serializable.
struct CustomObjective {
  Eigen::Index dim = 0;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::string descriptor;
};

class ObjectiveSpec {
 public:
  using Kind = std::variant<QuadraticObjective, CustomObjective>;

  /// Throws InvalidArgument unless Q is symmetric (1e-9) and positive definite,
  /// and 2·λmax(Q) ≤ lipschitz_hint when a hint is given.
  static ObjectiveSpec quadratic(Matrix Q, Vector c, std::optional<double> lipschitz_hint = {});
  static ObjectiveSpec custom(CustomObjective obj, std::optional<double> lipschitz_hint = {});

  const Kind& kind() const { return kind_; }
  const QuadraticObjective* as_quadratic() const { return std::get_if<QuadraticObjective>(&kind_); }
  Eigen::Index dim() const;
  std::optional<double> lipschitz_hint() const { return hint_; }
  /// Gradient Lipschitz constant: 2·λmax(Q) for quadratics, else the hint
  /// (throws when neither is known).
  double lipschitz() const;

 private:
  ObjectiveSpec(Kind kind, std::optional<double> hint) : kind_(std::move(kind)), hint_(hint) {}
  Kind kind_;
  std::optional<double> hint_;
};

Vector grad(const ObjectiveSpec& obj, const Vector& x);
double value(const ObjectiveSpec& obj, const Vector& x);

// ---------------------------------------------------------------------------
// Local feasibility sets
// ---------------------------------------------------------------------------

struct Unconstrained {
  Eigen::Index dim = 0;
};

struct Box {
  Vector lo;
  Vector hi;
};

/// {x : Rx ≤ l}. `interior` is a certified point with normalized slack
/// `slack` (distance to the nearest facet), filled in at construction.
struct Polyhedron {
  Matrix R;
  Vector l;
  Vector interior;
  double slack = 0.0;
};

class LocalSet {
 public:
  using Kind = std::variant<Unconstrained, Box, Polyhedron>;

  static LocalSet unconstrained(Eigen::Index dim);
  /// Throws InvalidArgument unless lo ≤ hi componentwise.
  static LocalSet box(Vector lo, Vector hi);
  /// Certifies a strictly feasible point; throws InvalidArgument when no
  /// point with slack > kInteriorSlack is found.
  static LocalSet polyhedron(Matrix R, Vector l);

  const Kind& kind() const { return kind_; }
  Eigen::Index dim() const;
  std::string kind_name() const;

 private:
  explicit LocalSet(Kind kind) : kind_(std::move(kind)) {}
  Kind kind_;
};

inline constexpr double kInteriorSlack = 1e-6;

struct ProjectionOptions {
  int max_sweeps = 10000;
  double tol = 1e-10;
};

/// Euclidean projection. Boxes clamp; polyhedra run Dykstra's algorithm over
/// the halfspaces with a periodic active-set polish that makes the result
/// exact once the optimal active set has been identified.
/// Throws NumericalFailure when the sweep cap is hit.
Vector project(const LocalSet& set, const Vector& y, const ProjectionOptions& opts = {});

/// Largest violation of the defining inequalities (0 when inside).
double violation(const LocalSet& set, const Vector& x);
bool contains(const LocalSet& set, const Vector& x, double tol);

struct InteriorCertificate {
  Vector point;
  double slack = 0.0;
};

/// Maximizes min_j (l_j − r_jᵀx)/‖r_j‖ by projected subgradient ascent
/// (projection onto a large ball keeps unbounded sets well posed).
InteriorCertificate find_interior_point(const Matrix& R, const Vector& l, int iterations = 20000);

// ---------------------------------------------------------------------------
// Agents and problems
// ---------------------------------------------------------------------------

struct AgentSpec {
  ObjectiveSpec objective;
  LocalSet set;
  Vector resource;

  Eigen::Index dim() const { return resource.size(); }
};

struct ProblemSpec {
  int n = 0;
  int m = 0;
  std::vector<AgentSpec> agents;

  /// Structural checks: n ≥ 2, m ≥ 1, agent count and dimensions agree.
  void validate() const;
  /// D stacked row-wise (n×m).
  AgentMatrix resources() const;
  Vector total_resource() const;
};

/// ‖x − P_Ω(x − (∇f(x) − λ))‖; zero iff λ − ∇f(x) lies in the normal cone at x.
double stationarity_residual(const AgentSpec& agent, const Vector& x, const Vector& lambda);

/// Σ_i f_i(x_i) with x_i the rows of X.
double objective_value(const ProblemSpec& problem, const AgentMatrix& X);

class CounterRng;

/// U diag(s) Uᵀ with U Haar-random orthogonal and s_k ~ U[lo, hi].
Matrix random_spd(CounterRng& rng, int m, double lo, double hi);

enum class SetKind { Unconstrained, Box, Polyhedron };

SetKind parse_set_kind(const std::string& name);

/// Random quadratic instance: Q_i = U diag(s) Uᵀ with Haar-random U and
/// s ∈ [0.5, 5]; c_i, d_i ∈ [−1, 1]^m; sets contain d_i in their interior, so
/// X = D is a strictly feasible coupled allocation. Deterministic in seed.
ProblemSpec random_instance(std::uint64_t seed, int n, int m, SetKind kind = SetKind::Box);

}  // namespace rasa
