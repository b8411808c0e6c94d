#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <random>
#include <vector>

#include "stgcgrn/tensor.hpp"

namespace stgcgrn::graph {

struct Edge {
  std::size_t from = 0;
  std::size_t to = 0;
  double dist = 0.0;
};

// Undirected sensor graph. `kappa` thresholds the squared distance and has
// no default; pass +inf to disable thresholding. When `sigma` is empty it is
// derived from the listed distances (see kernel_sigma).
struct GraphSpec {
  std::size_t n_nodes = 0;
  std::vector<Edge> edges;
  double kappa = 0.0;
  std::optional<double> sigma;
};

enum class AdjacencyKind { predefined, adaptive_head };

struct NormalizedAdjacency {
  Tensor matrix;  // [N x N], rows sum to one
  AdjacencyKind kind = AdjacencyKind::predefined;
};

// Trainable per-head node embeddings, each [N x n_head x d_e].
struct NodeEmbeddings {
  Tensor e1;
  Tensor e2;

  std::size_t n_nodes() const { return e1.dim(0); }
  std::size_t n_head() const { return e1.dim(1); }
  std::size_t d_e() const { return e1.dim(2); }

  // Uniform in [-1/sqrt(d_e), 1/sqrt(d_e)].
  static NodeEmbeddings random(std::size_t n_nodes, std::size_t n_head, std::size_t d_e, std::mt19937_64& rng);
};

void validate(const GraphSpec& spec);

// Population standard deviation of the listed distances. A zero spread
// (all distances equal) falls back to that common distance, or 1 if it is 0.
double kernel_sigma(const GraphSpec& spec);

// Thresholded Gaussian kernel, applied symmetrically for every listed edge.
Tensor build_predefined(const GraphSpec& spec);

// Row-stochastic normalization; zero rows become the unit row e_i.
NormalizedAdjacency row_normalize(const Tensor& a);

// softmax_rows(relu(E1_h . E2_h^T) / d_e) for one head, recorded on the tape.
NormalizedAdjacency adaptive_adjacency(const NodeEmbeddings& emb, std::size_t head);

// Edge list text: `i,j,dist` per line, optional `from,to,cost` header.
std::vector<Edge> read_edge_list(const std::filesystem::path& path);
void write_edge_list(const std::filesystem::path& path, const std::vector<Edge>& edges);

}  // namespace stgcgrn::graph
