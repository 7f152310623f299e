#pragma once

#include "rasa/experiments.hpp"
#include "rasa/network.hpp"
#include "rasa/ode_ref.hpp"
#include "rasa/oracle.hpp"
#include "rasa/problem.hpp"
#include "rasa/rng.hpp"
#include "rasa/sa_engine.hpp"

#include <cmath>
#include <vector>

namespace rasa::testing {

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out(k++) = x;
  return out;
}

inline Vector gaussian_vector(CounterRng& rng, Eigen::Index m, double scale = 1.0) {
  Vector v(m);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

/// A random set of the given kind around a random center: boxes of half
/// width U[0.2, 2], polyhedra of 2m random halfspaces at slack U[0.3, 1.5]
/// plus a bounding box so that grid searches stay finite.
inline LocalSet random_set(CounterRng& rng, int m, SetKind kind) {
  const Vector center = gaussian_vector(rng, m);
  switch (kind) {
    case SetKind::Unconstrained:
      return LocalSet::unconstrained(m);
    case SetKind::Box: {
      Vector lo(m), hi(m);
      for (int c = 0; c < m; ++c) {
        lo(c) = center(c) - rng.uniform(0.2, 2.0);
        hi(c) = center(c) + rng.uniform(0.2, 2.0);
      }
      return LocalSet::box(lo, hi);
    }
    case SetKind::Polyhedron:
      break;
  }
  const int rows = 2 * m + 2 * m;
  Matrix R(rows, m);
  Vector l(rows);
  for (int j = 0; j < 2 * m; ++j) {
    Vector r = gaussian_vector(rng, m);
    r /= r.norm();
    R.row(j) = r.transpose();
    l(j) = r.dot(center) + rng.uniform(0.3, 1.5);
  }
  for (int c = 0; c < m; ++c) {
    R.row(2 * m + 2 * c) = -Matrix::Identity(m, m).row(c);
    l(2 * m + 2 * c) = -(center(c) - 3.0);
    R.row(2 * m + 2 * c + 1) = Matrix::Identity(m, m).row(c);
    l(2 * m + 2 * c + 1) = center(c) + 3.0;
  }
  return LocalSet::polyhedron(R, l);
}

/// A point of the set: the projection of a random point.
inline Vector random_member(CounterRng& rng, const LocalSet& set, double scale = 2.0) {
  return project(set, gaussian_vector(rng, set.dim(), scale));
}

/// Undirected cycle on n nodes.
inline Matrix ring(int n) {
  Matrix A = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    A(i, (i + 1) % n) = 1.0;
    A((i + 1) % n, i) = 1.0;
  }
  return A;
}

inline Matrix complete(int n) {
  Matrix A = Matrix::Ones(n, n);
  A.diagonal().setZero();
  return A;
}

/// n = 2, m = 1 problem with f_i(x) = q_i x² + c_i x on the given boxes.
inline ProblemSpec tiny_problem(double q1, double c1, double q2, double c2, double d1, double d2,
                                const LocalSet& s1, const LocalSet& s2) {
  ProblemSpec p;
  p.n = 2;
  p.m = 1;
  p.agents.push_back(AgentSpec{ObjectiveSpec::quadratic(Matrix::Constant(1, 1, q1), vec({c1})), s1, vec({d1})});
  p.agents.push_back(AgentSpec{ObjectiveSpec::quadratic(Matrix::Constant(1, 1, q2), vec({c2})), s2, vec({d2})});
  return p;
}

}  // namespace rasa::testing
