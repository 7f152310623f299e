#include "rasa/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rasa {

namespace {

void check_adjacency(const Matrix& A, int n, const std::string& who) {
  require(A.rows() == n && A.cols() == n, who + ": adjacency must be n x n");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double a = A(i, j);
      require(a == 0.0 || a == 1.0, who + ": adjacency entries must be 0 or 1");
      if (i == j) require(a == 0.0, who + ": adjacency diagonal must be zero");
    }
}

Matrix complete_graph(int n) {
  Matrix A = Matrix::Ones(n, n);
  A.diagonal().setZero();
  return A;
}

Matrix resolve_base(int n, Matrix base, const std::string& who) {
  require(n >= 2, who + ": need at least two nodes");
  if (base.size() == 0) return complete_graph(n);
  check_adjacency(base, n, who);
  return base;
}

}  // namespace

Matrix laplacian(const Matrix& adjacency) {
  require(adjacency.rows() == adjacency.cols(), "laplacian: adjacency must be square");
  check_adjacency(adjacency, static_cast<int>(adjacency.rows()), "laplacian");
  Matrix L = -adjacency;
  L.diagonal() = adjacency.rowwise().sum();
  return L;
}

GraphModel GraphModel::fixed_pool(std::vector<Matrix> graphs) {
  require(!graphs.empty(), "fixed_pool: empty pool");
  const int n = static_cast<int>(graphs.front().rows());
  require(n >= 2, "fixed_pool: need at least two nodes");
  for (const auto& g : graphs) check_adjacency(g, n, "fixed_pool");
  return GraphModel(n, FixedPool{std::move(graphs)});
}

GraphModel GraphModel::erdos_renyi_pool(int n, int pool_size, double p_lo, double p_hi,
                                        std::uint64_t seed, bool require_connected_union) {
  require(n >= 2, "erdos_renyi_pool: need at least two nodes");
  require(pool_size >= 1, "erdos_renyi_pool: pool_size must be positive");
  require(0.0 <= p_lo && p_lo <= p_hi && p_hi <= 1.0, "erdos_renyi_pool: need 0 <= p_lo <= p_hi <= 1");
  for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
    CounterRng rng(splitmix64(seed) ^ splitmix64(0xE1D05ull + attempt));
    std::vector<Matrix> graphs;
    graphs.reserve(pool_size);
    for (int g = 0; g < pool_size; ++g) {
      const double p = rng.uniform(p_lo, p_hi);
      Matrix A = Matrix::Zero(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
          if (rng.uniform() < p) A(i, j) = A(j, i) = 1.0;
      graphs.push_back(std::move(A));
    }
    if (!require_connected_union || union_connected(graphs))
      return GraphModel(n, ErdosRenyiPool{pool_size, p_lo, p_hi, std::move(graphs)});
  }
  throw GenerationFailure("erdos_renyi_pool: no pool with connected union within 1000 attempts");
}

GraphModel GraphModel::gossip(int n, Matrix base) {
  base = resolve_base(n, std::move(base), "gossip");
  require(base.isApprox(base.transpose()), "gossip: base graph must be undirected");
  require(base.sum() > 0.0, "gossip: base graph has no edges");
  return GraphModel(n, Gossip{std::move(base)});
}

GraphModel GraphModel::broadcast(int n, Matrix base) {
  base = resolve_base(n, std::move(base), "broadcast");
  require(base.isApprox(base.transpose()), "broadcast: base graph must be undirected");
  return GraphModel(n, Broadcast{std::move(base)});
}

std::string GraphModel::kind_name() const {
  switch (kind_.index()) {
    case 0: return "fixed_pool";
    case 1: return "erdos_renyi_pool";
    case 2: return "gossip";
    default: return "broadcast";
  }
}

const std::vector<Matrix>* GraphModel::pool() const {
  if (const auto* f = std::get_if<FixedPool>(&kind_)) return &f->graphs;
  if (const auto* e = std::get_if<ErdosRenyiPool>(&kind_)) return &e->graphs;
  return nullptr;
}

GraphSample sample_graph(const GraphModel& model, CounterRng& rng) {
  const int n = model.n();
  Matrix A;
  if (const auto* pool = model.pool()) {
    A = (*pool)[rng.index(pool->size())];
  } else if (const auto* g = std::get_if<Gossip>(&model.kind())) {
    // Uniform over undirected edges {i<j}.
    const auto edges = static_cast<std::uint64_t>(g->base.sum() / 2.0);
    std::uint64_t pick = rng.index(edges);
    A = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (g->base(i, j) == 1.0 && pick-- == 0) A(i, j) = A(j, i) = 1.0;
  } else {
    const auto& b = std::get<Broadcast>(model.kind());
    const auto sender = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n)));
    A = Matrix::Zero(n, n);
    A.col(sender) = b.base.col(sender);  // receivers j hear sender: a_{j,sender} = 1
  }
  Matrix L = laplacian(A);
  return GraphSample{n, std::move(A), std::move(L)};
}

Matrix mean_laplacian(const GraphModel& model) {
  if (const auto* pool = model.pool()) {
    Matrix sum = Matrix::Zero(model.n(), model.n());
    for (const auto& g : *pool) sum += laplacian(g);
    return sum / static_cast<double>(pool->size());
  }
  if (const auto* g = std::get_if<Gossip>(&model.kind())) {
    const double edges = g->base.sum() / 2.0;
    return laplacian(g->base) / edges;
  }
  const auto& b = std::get<Broadcast>(model.kind());
  return laplacian(b.base) / static_cast<double>(model.n());
}

GraphSample mean_graph(const GraphModel& model) {
  GraphSample g;
  g.n = model.n();
  g.laplacian = mean_laplacian(model);
  g.adjacency = -g.laplacian;
  g.adjacency.diagonal().setZero();
  return g;
}

MeanLaplacianEstimate estimate_mean_laplacian(const GraphModel& model, long draws,
                                              std::uint64_t seed) {
  require(draws >= 2, "estimate_mean_laplacian: need at least two draws");
  const int n = model.n();
  Matrix sum = Matrix::Zero(n, n);
  Matrix sum_sq = Matrix::Zero(n, n);
  const PathStream stream(splitmix64(seed));
  for (long k = 0; k < draws; ++k) {
    auto rng = stream.at(static_cast<std::uint64_t>(k), Channel::Graph);
    const auto s = sample_graph(model, rng);
    sum += s.laplacian;
    sum_sq += s.laplacian.cwiseAbs2();
  }
  const double N = static_cast<double>(draws);
  Matrix mean = sum / N;
  Matrix var = ((sum_sq / N) - mean.cwiseAbs2()) * (N / (N - 1.0));
  Matrix se = (var.cwiseMax(0.0) / N).cwiseSqrt();
  return MeanLaplacianEstimate{std::move(mean), std::move(se), draws};
}

double algebraic_connectivity(const Matrix& L) {
  require(L.rows() == L.cols() && L.rows() >= 2, "algebraic_connectivity: need a square matrix, n >= 2");
  require((L - L.transpose()).cwiseAbs().maxCoeff() <= 1e-9,
          "algebraic_connectivity: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (L + L.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(1);  // ascending order
}

ValidationReport validate_model(const GraphModel& model) {
  ValidationReport r;
  const Matrix Lbar = mean_laplacian(model);
  r.symmetry_defect = (Lbar - Lbar.transpose()).cwiseAbs().maxCoeff();
  if (r.symmetry_defect >= 1e-8) {
    r.passed = false;
    r.message = "Assumption 3 violated: mean Laplacian is not symmetric";
    return r;
  }
  r.s2 = algebraic_connectivity(Lbar);
  r.passed = r.s2 > 1e-8;
  r.message = r.passed ? "mean graph is undirected and connected"
                       : "Assumption 3 violated: s2(mean Laplacian) is not positive";
  return r;
}

bool union_connected(const std::vector<Matrix>& graphs) {
  if (graphs.empty()) return false;
  const auto n = graphs.front().rows();
  Matrix U = Matrix::Zero(n, n);
  for (const auto& g : graphs) U += g + g.transpose();
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::vector<Eigen::Index> stack{0};
  seen[0] = 1;
  while (!stack.empty()) {
    const auto v = stack.back();
    stack.pop_back();
    for (Eigen::Index w = 0; w < n; ++w)
      if (U(v, w) > 0.0 && !seen[w]) {
        seen[w] = 1;
        stack.push_back(w);
      }
  }
  return std::all_of(seen.begin(), seen.end(), [](char s) { return s != 0; });
}

}  // namespace rasa
