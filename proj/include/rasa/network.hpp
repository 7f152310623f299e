#pragma once

#include "rasa/rng.hpp"
#include "rasa/types.hpp"

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace rasa {

/// One realization of the communication graph. a_ij = 1 means agent i
/// receives from agent j at this step.
struct GraphSample {
  int n = 0;
  Matrix adjacency;
  Matrix laplacian;
};

/// Deg − A. Throws InvalidArgument on a nonzero diagonal or non-0/1 entries.
Matrix laplacian(const Matrix& adjacency);

/// Uniform draw from a fixed list of (possibly directed) graphs.
struct FixedPool {
  std::vector<Matrix> graphs;
};

/// Pool of Erdős–Rényi graphs, each with its own p ~ U[p_lo, p_hi]. The pool
/// is realized once; steps draw uniformly from it.
struct ErdosRenyiPool {
  int pool_size = 0;
  double p_lo = 0.0;
  double p_hi = 0.0;
  std::vector<Matrix> graphs;
};

/// One uniformly chosen edge of an undirected base graph per step.
struct Gossip {
  Matrix base;
};

/// One uniformly chosen node per step sends to its base-graph neighbors.
struct Broadcast {
  Matrix base;
};

class GraphModel {
 public:
  using Kind = std::variant<FixedPool, ErdosRenyiPool, Gossip, Broadcast>;

  static GraphModel fixed_pool(std::vector<Matrix> graphs);
  /// Draws pool_size graphs; when require_connected_union is set, redraws the
  /// whole pool (up to 1000 times) until the union graph is connected.
  static GraphModel erdos_renyi_pool(int n, int pool_size, double p_lo, double p_hi,
                                     std::uint64_t seed, bool require_connected_union = true);
  /// Empty base means the complete graph.
  static GraphModel gossip(int n, Matrix base = {});
  static GraphModel broadcast(int n, Matrix base = {});

  int n() const { return n_; }
  const Kind& kind() const { return kind_; }
  std::string kind_name() const;
  /// Graphs drawn uniformly for pool kinds; empty for gossip/broadcast.
  const std::vector<Matrix>* pool() const;

 private:
  GraphModel(int n, Kind kind) : n_(n), kind_(std::move(kind)) {}
  int n_;
  Kind kind_;
};

GraphSample sample_graph(const GraphModel& model, CounterRng& rng);

/// E[L(k)], closed form for every supported kind.
Matrix mean_laplacian(const GraphModel& model);

/// Weighted graph whose Laplacian is E[L(k)]; used for noiseless mean-field steps.
GraphSample mean_graph(const GraphModel& model);

struct MeanLaplacianEstimate {
  Matrix mean;
  Matrix standard_error;  // entrywise
  long draws = 0;
};

/// Monte Carlo estimate of E[L(k)] from `draws` independent samples.
MeanLaplacianEstimate estimate_mean_laplacian(const GraphModel& model, long draws,
                                              std::uint64_t seed);

/// Second-smallest eigenvalue. Throws InvalidArgument if L is not symmetric
/// within 1e-9.
double algebraic_connectivity(const Matrix& L);

struct ValidationReport {
  double symmetry_defect = 0.0;
  double s2 = 0.0;
  bool passed = false;
  std::string message;
};

/// Connectivity-in-mean check: pass iff the mean Laplacian is symmetric
/// (defect < 1e-8) and s₂ > 1e-8.
ValidationReport validate_model(const GraphModel& model);

/// Connectivity of the undirected union of a set of adjacency matrices.
bool union_connected(const std::vector<Matrix>& graphs);

}  // namespace rasa
