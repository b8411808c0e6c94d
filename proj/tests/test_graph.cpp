#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "stgcgrn/errors.hpp"
#include "stgcgrn/gradcheck.hpp"
#include "stgcgrn/graph.hpp"
#include "stgcgrn/ops.hpp"

using namespace stgcgrn;
using graph::Edge;
using graph::GraphSpec;

namespace {

GraphSpec path3() {
  GraphSpec g;
  g.n_nodes = 3;
  g.edges = {{0, 1, 1.0}, {1, 2, 2.0}};
  g.kappa = 4.0;
  g.sigma = 1.0;
  return g;
}

graph::NodeEmbeddings fixed_embeddings(const std::vector<double>& e1, const std::vector<double>& e2, std::size_t n,
                                       std::size_t heads, std::size_t de) {
  return {Tensor({n, heads, de}, e1), Tensor({n, heads, de}, e2)};
}

double row_sum(const Tensor& m, std::size_t i) {
  double s = 0;
  for (std::size_t j = 0; j < m.dim(1); ++j) s += m.at({i, j});
  return s;
}

}  // namespace

TEST(Graph, PathGraphKernelValues) {
  auto a = graph::build_predefined(path3());
  EXPECT_NEAR(a.at({0, 1}), 0.367879, 1e-6);
  EXPECT_NEAR(a.at({1, 2}), 0.018316, 1e-6);
  EXPECT_DOUBLE_EQ(a.at({0, 1}), std::exp(-1.0));
  EXPECT_DOUBLE_EQ(a.at({1, 2}), std::exp(-4.0));
  EXPECT_EQ(a.at({0, 2}), 0.0);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a.at({i, i}), 0.0);
}

TEST(Graph, ZeroDistanceGivesUnitWeight) {
  GraphSpec g;
  g.n_nodes = 2;
  g.edges = {{0, 1, 0.0}};
  g.kappa = 1.0;
  g.sigma = 1.0;
  EXPECT_EQ(graph::build_predefined(g).at({0, 1}), 1.0);
}

TEST(Graph, ThresholdGivesExactZeros) {
  auto g = path3();
  g.kappa = 3.99;
  auto a = graph::build_predefined(g);
  EXPECT_EQ(a.at({1, 2}), 0.0);
  EXPECT_EQ(a.at({2, 1}), 0.0);
  EXPECT_GT(a.at({0, 1}), 0.0);
}

TEST(Graph, PredefinedIsSymmetricAndRespectsThreshold) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(0.1, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    GraphSpec g;
    g.n_nodes = 7;
    g.kappa = 6.0;
    for (std::size_t i = 0; i < 7; ++i)
      for (std::size_t j = i + 1; j < 7; ++j)
        if ((i * 7 + j + trial) % 3) g.edges.push_back({trial % 2 ? j : i, trial % 2 ? i : j, dist(rng)});
    auto a = graph::build_predefined(g);
    for (std::size_t i = 0; i < 7; ++i)
      for (std::size_t j = 0; j < 7; ++j) EXPECT_EQ(a.at({i, j}), a.at({j, i}));
    for (const auto& e : g.edges)
      if (e.dist * e.dist > g.kappa) {
        EXPECT_EQ(a.at({e.from, e.to}), 0.0);
      }
  }
}

TEST(Graph, SigmaDefaultsToDistanceStd) {
  GraphSpec g = path3();
  g.sigma.reset();
  EXPECT_DOUBLE_EQ(graph::kernel_sigma(g), 0.5);
  // Equal distances have zero spread; the common distance is used instead.
  GraphSpec ring;
  ring.n_nodes = 3;
  ring.edges = {{0, 1, 1.0}, {1, 2, 1.0}, {2, 0, 1.0}};
  ring.kappa = std::numeric_limits<double>::infinity();
  EXPECT_DOUBLE_EQ(graph::kernel_sigma(ring), 1.0);
}

TEST(Graph, ValidationRejectsBadSpecs) {
  GraphSpec g = path3();
  g.edges.push_back({0, 3, 1.0});
  EXPECT_THROW(graph::validate(g), DataError);
  g = path3();
  g.edges.push_back({0, 2, -1.0});
  EXPECT_THROW(graph::validate(g), DataError);
}

TEST(Graph, RowNormalizeExamples) {
  auto n = graph::row_normalize(Tensor({2, 2}, {0, 2, 2, 0})).matrix;
  EXPECT_EQ(std::vector<double>(n.values().begin(), n.values().end()), (std::vector<double>{0, 1, 1, 0}));
  auto z = graph::row_normalize(Tensor({3, 3}, {0, 1, 1, 0, 0, 0, 2, 0, 0})).matrix;
  EXPECT_EQ(z.at({1, 1}), 1.0);
  EXPECT_EQ(row_sum(z, 1), 1.0);
  EXPECT_THROW(graph::row_normalize(Tensor({2, 2}, {0, -1, 1, 0})), std::invalid_argument);
}

TEST(Graph, NormalizedRowsSumToOneOverManyTrials) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + trial % 9;
    std::vector<double> v(n * n);
    for (auto& x : v) x = u(rng) < 0.3 ? 0.0 : u(rng) * 10;
    auto m = graph::row_normalize(Tensor({n, n}, v)).matrix;
    for (std::size_t i = 0; i < n; ++i) ASSERT_NEAR(row_sum(m, i), 1.0, 1e-12);
  }
}

TEST(Graph, AdaptiveZeroEmbeddingsAreUniform) {
  auto emb = fixed_embeddings(std::vector<double>(8, 0.0), std::vector<double>(8, 0.0), 4, 1, 2);
  auto a = graph::adaptive_adjacency(emb, 0).matrix;
  for (double x : a.values()) EXPECT_DOUBLE_EQ(x, 0.25);
}

TEST(Graph, AdaptiveHandExample) {
  // N=3, d_e=1: row 0 logits relu([1,1,1]) -> uniform; rows 1 and 2 logits 0 -> uniform.
  auto emb = fixed_embeddings({1, 1, 0, 0, 0, 0}, {1, 1, 1, 1, 1, 1}, 3, 2, 1);
  for (std::size_t h = 0; h < 2; ++h) {
    auto a = graph::adaptive_adjacency(emb, h).matrix;
    for (double x : a.values()) EXPECT_NEAR(x, 1.0 / 3.0, 1e-15);
  }
  EXPECT_THROW(graph::adaptive_adjacency(emb, 2), std::out_of_range);
}

TEST(Graph, AdaptiveRowsArePositiveDistributions) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + trial % 7, heads = 1 + trial % 4, de = 1 + trial % 5;
    auto emb = graph::NodeEmbeddings::random(n, heads, de, rng);
    for (auto& x : emb.e1.mutable_values()) x *= 1 + trial % 10;  // spread the logits
    for (std::size_t h = 0; h < heads; ++h) {
      auto a = graph::adaptive_adjacency(emb, h).matrix;
      for (std::size_t i = 0; i < n; ++i) ASSERT_NEAR(row_sum(a, i), 1.0, 1e-12);
      for (double x : a.values()) ASSERT_GT(x, 0.0);
    }
  }
}

TEST(Graph, AdaptiveDeadZoneIgnoresNegativeProducts) {
  // Row 0 products with nodes 1 and 2 are -4 and -1: both clamp to zero.
  auto base = fixed_embeddings({2, 1, 1}, {1, -2, -1}, 3, 1, 1);
  auto moved = fixed_embeddings({2, 1, 1}, {1, -1, -1}, 3, 1, 1);
  auto a = graph::adaptive_adjacency(base, 0).matrix;
  auto b = graph::adaptive_adjacency(moved, 0).matrix;
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(a.at({0, j}), b.at({0, j}));
}

TEST(Graph, AdaptiveGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  auto emb = graph::NodeEmbeddings::random(5, 3, 4, rng);
  for (auto& x : emb.e1.mutable_values()) x *= 4.0;
  Tensor w({5, 5}, std::vector<double>(25));
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& x : w.mutable_values()) x = u(rng);
  for (std::size_t h = 0; h < 3; ++h) {
    GradCheckOptions opts;
    opts.tolerance = 1e-5;
    auto via_e1 = [&](const Tensor& e1) {
      return ops::sum(ops::mul(graph::adaptive_adjacency({e1, emb.e2}, h).matrix, w));
    };
    auto via_e2 = [&](const Tensor& e2) {
      return ops::sum(ops::mul(graph::adaptive_adjacency({emb.e1, e2}, h).matrix, w));
    };
    auto r1 = finite_diff_check(via_e1, emb.e1, opts);
    auto r2 = finite_diff_check(via_e2, emb.e2, opts);
    EXPECT_TRUE(r1.passed) << r1.max_rel_error;
    EXPECT_TRUE(r2.passed) << r2.max_rel_error;
  }
}

TEST(Graph, EmbeddingInitRange) {
  std::mt19937_64 rng(1);
  auto emb = graph::NodeEmbeddings::random(6, 8, 10, rng);
  const double bound = 1.0 / std::sqrt(10.0);
  for (double x : emb.e1.values()) EXPECT_LE(std::abs(x), bound);
  for (double x : emb.e2.values()) EXPECT_LE(std::abs(x), bound);
  EXPECT_TRUE(emb.e1.requires_grad());
}

TEST(Graph, EdgeListRoundTripWithHeader) {
  const auto path = std::filesystem::temp_directory_path() / "stgcgrn_edges_test.csv";
  std::vector<Edge> edges{{0, 1, 1.5}, {2, 1, 0.25}};
  graph::write_edge_list(path, edges);
  auto back = graph::read_edge_list(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].from, 2u);
  EXPECT_EQ(back[1].dist, 0.25);
  {
    std::ofstream os(path);
    os << "3,4,2.5\n0,1,1\n";
  }
  EXPECT_EQ(graph::read_edge_list(path).size(), 2u);
  {
    std::ofstream os(path);
    os << "from,to,cost\n0,x,1\n";
  }
  EXPECT_THROW(graph::read_edge_list(path), DataError);
  std::filesystem::remove(path);
}
