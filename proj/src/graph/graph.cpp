#include "stgcgrn/graph.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "stgcgrn/errors.hpp"
#include "stgcgrn/ops.hpp"

namespace stgcgrn::graph {

NodeEmbeddings NodeEmbeddings::random(std::size_t n_nodes, std::size_t n_head, std::size_t d_e,
                                      std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_e));
  std::uniform_real_distribution<double> dist(-bound, bound);
  auto draw = [&] {
    std::vector<double> v(n_nodes * n_head * d_e);
    for (auto& x : v) x = dist(rng);
    return Tensor({n_nodes, n_head, d_e}, std::move(v), true);
  };
  NodeEmbeddings emb;
  emb.e1 = draw();
  emb.e2 = draw();
  return emb;
}

void validate(const GraphSpec& spec) {
  if (spec.n_nodes == 0) throw DataError("graph must have at least one node");
  for (const auto& e : spec.edges) {
    if (e.from >= spec.n_nodes || e.to >= spec.n_nodes)
      throw DataError("edge (" + std::to_string(e.from) + ", " + std::to_string(e.to) + ") out of range for " +
                      std::to_string(spec.n_nodes) + " nodes");
    if (!(e.dist >= 0.0) || !std::isfinite(e.dist))
      throw DataError("edge (" + std::to_string(e.from) + ", " + std::to_string(e.to) + ") has invalid distance");
  }
  if (std::isnan(spec.kappa) || spec.kappa < 0.0) throw ConfigError("graph.kappa must be a nonnegative number");
  if (spec.sigma && !(*spec.sigma > 0.0)) throw ConfigError("graph.sigma must be positive");
}

double kernel_sigma(const GraphSpec& spec) {
  if (spec.sigma) return *spec.sigma;
  if (spec.edges.empty()) return 1.0;
  double mean = 0.0;
  for (const auto& e : spec.edges) mean += e.dist;
  mean /= static_cast<double>(spec.edges.size());
  double var = 0.0;
  for (const auto& e : spec.edges) var += (e.dist - mean) * (e.dist - mean);
  var /= static_cast<double>(spec.edges.size());
  if (var > 0.0) return std::sqrt(var);
  return mean > 0.0 ? mean : 1.0;
}

Tensor build_predefined(const GraphSpec& spec) {
  validate(spec);
  const std::size_t n = spec.n_nodes;
  const double sigma = kernel_sigma(spec);
  Tensor a = Tensor::zeros({n, n});
  auto v = a.mutable_values();
  for (const auto& e : spec.edges) {
    if (e.from == e.to) continue;
    const double d2 = e.dist * e.dist;
    const double w = d2 <= spec.kappa ? std::exp(-d2 / (sigma * sigma)) : 0.0;
    v[e.from * n + e.to] = w;
    v[e.to * n + e.from] = w;
  }
  return a;
}

NormalizedAdjacency row_normalize(const Tensor& a) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1)) throw ShapeError("row_normalize: expected square matrix");
  const std::size_t n = a.dim(0);
  Tensor out = a.clone();
  auto v = out.mutable_values();
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double x = v[i * n + j];
      if (x < 0.0 || std::isnan(x))
        throw std::invalid_argument("row_normalize: negative entry at (" + std::to_string(i) + ", " +
                                    std::to_string(j) + ")");
      total += x;
    }
    if (total == 0.0) {
      v[i * n + i] = 1.0;
      continue;
    }
    for (std::size_t j = 0; j < n; ++j) v[i * n + j] /= total;
  }
  return {out, AdjacencyKind::predefined};
}

NormalizedAdjacency adaptive_adjacency(const NodeEmbeddings& emb, std::size_t head) {
  const std::size_t n = emb.n_nodes(), heads = emb.n_head(), de = emb.d_e();
  if (head >= heads) throw std::out_of_range("adaptive_adjacency: head index out of range");
  const Tensor e1 = ops::slice(ops::reshape(emb.e1, {n, heads * de}), 1, head * de, (head + 1) * de);
  const Tensor e2 = ops::slice(ops::reshape(emb.e2, {n, heads * de}), 1, head * de, (head + 1) * de);
  Tensor logits = ops::affine(ops::relu(ops::matmul(e1, ops::transpose(e2))), 1.0 / static_cast<double>(de));
  return {ops::softmax(logits, 1), AdjacencyKind::adaptive_head};
}

std::vector<Edge> read_edge_list(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open edge list " + path.string());
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (lineno == 1 && line.find_first_of("0123456789") == std::string::npos) continue;  // header
    std::istringstream ls(line);
    std::string a, b, c;
    if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',') || !std::getline(ls, c))
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected i,j,dist");
    try {
      Edge e;
      const long long from = std::stoll(a);
      const long long to = std::stoll(b);
      if (from < 0 || to < 0) throw std::invalid_argument("negative index");
      e.from = static_cast<std::size_t>(from);
      e.to = static_cast<std::size_t>(to);
      e.dist = std::stod(c);
      edges.push_back(e);
    } catch (const std::exception&) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": cannot parse '" + line + "'");
    }
  }
  return edges;
}

void write_edge_list(const std::filesystem::path& path, const std::vector<Edge>& edges) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os << "from,to,cost\n" << std::setprecision(17);
  for (const auto& e : edges) os << e.from << ',' << e.to << ',' << e.dist << '\n';
}

}  // namespace stgcgrn::graph
