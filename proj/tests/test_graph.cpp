#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "feedsim/errors.hpp"
#include "feedsim/graph.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace feedsim;
using feedsim::testing::pearson;
using feedsim::testing::TempDir;
using feedsim::testing::write_file;

namespace {

double pearson_of(const Network& net, const TraitAssignment& t) {
  std::vector<double> k, x;
  for (NodeId v = 0; v < net.node_count(); ++v) {
    k.push_back(net.in_degree(v));
    x.push_back(t.labels[v]);
  }
  return pearson(k, x);
}

}  // namespace

TEST_CASE("from_edges builds both adjacency directions") {
  const Network net = Network::from_edges(4, {{0, 1}, {0, 2}, {2, 1}, {0, 1}});
  CHECK(net.edge_count() == 3);
  CHECK(net.in_degree(1) == 2);
  CHECK(net.out_degree(0) == 2);
  CHECK(net.follows(2, 1));
  CHECK_FALSE(net.follows(1, 2));
  CHECK(std::vector<NodeId>(net.followers(1).begin(), net.followers(1).end()) ==
        std::vector<NodeId>{0, 2});
  CHECK(std::vector<NodeId>(net.core_users().begin(), net.core_users().end()) ==
        std::vector<NodeId>{0, 2});
  CHECK(net.core_index(2) == 1);
  CHECK_FALSE(net.is_core(3));
  CHECK_THROWS_AS(Network::from_edges(2, {{1, 1}}), Error);
}

TEST_CASE("load_edge_list deduplicates") {
  TempDir dir;
  write_file(dir / "g.tsv", "1\t2\n2\t3\n1\t2\n");
  LoadReport report;
  const Network net = load_edge_list(dir / "g.tsv", &report);
  CHECK(net.node_count() == 3);
  CHECK(net.edge_count() == 2);
  CHECK(report.duplicate_edges == 1);
}

TEST_CASE("load_edge_list rejects degenerate input") {
  TempDir dir;
  write_file(dir / "empty.tsv", "");
  try {
    load_edge_list(dir / "empty.tsv");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("no edges") != std::string::npos);
  }

  write_file(dir / "bad.tsv", "1\t2\n3 4\n");
  try {
    load_edge_list(dir / "bad.tsv");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }

  write_file(dir / "loop.tsv", "1\t1\n1\t2\n");
  LoadReport report;
  const Network net = load_edge_list(dir / "loop.tsv", &report);
  CHECK(net.edge_count() == 1);
  CHECK(report.self_loop_lines == std::vector<std::size_t>{1});
}

TEST_CASE("core header selects core users") {
  TempDir dir;
  write_file(dir / "g.tsv", "#core: 20,10\n10\t20\n20\t30\n30\t10\n");
  const Network net = load_edge_list(dir / "g.tsv");
  REQUIRE(net.core_users().size() == 2);
  CHECK(net.external_id(net.core_users()[0]) == 10);
  CHECK(net.external_id(net.core_users()[1]) == 20);

  write_edge_list(net, dir / "out.tsv");
  const Network again = load_edge_list(dir / "out.tsv");
  CHECK(again.edges() == net.edges());
  CHECK(again.core_users().size() == 2);
}

TEST_CASE("large edge list matches a sort-unique count") {
  TempDir dir;
  std::mt19937_64 gen(11);
  std::uniform_int_distribution<int> node(0, 199999);
  std::vector<std::pair<int, int>> pairs;
  {
    std::ofstream out(dir / "big.tsv");
    for (int i = 0; i < 1500000; ++i) {
      const int a = node(gen);
      int b = node(gen);
      if (a == b) b = (b + 1) % 200000;
      // Every fifth line repeats an earlier edge.
      if (i % 5 == 4) {
        const auto& p = pairs[static_cast<std::size_t>(i) / 2];
        out << p.first << '\t' << p.second << '\n';
        pairs.push_back(p);
        continue;
      }
      out << a << '\t' << b << '\n';
      pairs.emplace_back(a, b);
    }
  }
  std::sort(pairs.begin(), pairs.end());
  const auto distinct = static_cast<std::size_t>(
      std::unique(pairs.begin(), pairs.end()) - pairs.begin());
  const Network net = load_edge_list(dir / "big.tsv");
  CHECK(net.edge_count() == distinct);
}

TEST_CASE("generate_synthetic honours the counts") {
  const Network net = generate_synthetic(10, 20, 3, 42);
  CHECK(net.node_count() == 10);
  CHECK(net.edge_count() == 20);
  CHECK(net.core_users().size() == 3);

  const Network dense = generate_synthetic(6, 30, 2, 1);
  CHECK(dense.edge_count() == 30);
  CHECK_THROWS_AS(generate_synthetic(5, 21, 1, 1), Error);
  CHECK_THROWS_AS(generate_synthetic(5, 4, 6, 1), Error);
}

TEST_CASE("generate_synthetic is deterministic per seed") {
  const Network a = generate_synthetic(2000, 16000, 100, 9);
  const Network b = generate_synthetic(2000, 16000, 100, 9);
  const Network c = generate_synthetic(2000, 16000, 100, 10);
  CHECK(a.edges() == b.edges());
  CHECK(std::vector<NodeId>(a.core_users().begin(), a.core_users().end()) ==
        std::vector<NodeId>(b.core_users().begin(), b.core_users().end()));
  CHECK(a.edges() != c.edges());
}

TEST_CASE("core users have the highest out-degrees") {
  const Network net = generate_synthetic(3000, 24000, 300, 4);
  std::uint32_t min_core = UINT32_MAX;
  std::uint32_t max_other = 0;
  for (NodeId v = 0; v < net.node_count(); ++v) {
    if (net.is_core(v)) min_core = std::min(min_core, net.out_degree(v));
    else max_other = std::max(max_other, net.out_degree(v));
  }
  CHECK(min_core >= max_other);
}

TEST_CASE("synthetic in-degrees are heavy tailed") {
  const Network net = generate_synthetic(10000, 80000, 500, 7);
  std::vector<std::uint32_t> deg(net.in_degrees().begin(), net.in_degrees().end());
  std::sort(deg.begin(), deg.end());
  const double median = deg[deg.size() / 2];
  CHECK(deg.back() >= 5.0 * std::max(median, 1.0));
}

TEST_CASE("degree_attribute_correlation hand values") {
  const std::vector<std::uint32_t> k{1, 1, 3, 3};
  const std::vector<std::uint8_t> x{0, 0, 1, 1};
  CHECK(degree_attribute_correlation(k, x) == doctest::Approx(1.0).epsilon(1e-12));
  const std::vector<std::uint8_t> flipped{1, 1, 0, 0};
  CHECK(degree_attribute_correlation(k, flipped) ==
        doctest::Approx(-1.0).epsilon(1e-12));
  const std::vector<std::uint8_t> constant{1, 1, 1, 1};
  CHECK_THROWS_AS(degree_attribute_correlation(k, constant), UndefinedCorrelation);
  const std::vector<std::uint32_t> flat{2, 2, 2, 2};
  CHECK_THROWS_AS(degree_attribute_correlation(flat, x), UndefinedCorrelation);
}

TEST_CASE("degree_attribute_correlation equals Pearson correlation") {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 10 + gen() % 991;
    std::vector<std::uint32_t> k(n);
    std::vector<std::uint8_t> x(n);
    for (std::size_t i = 0; i < n; ++i) {
      k[i] = static_cast<std::uint32_t>(gen() % 50);
      x[i] = static_cast<std::uint8_t>(gen() % 3 == 0);
    }
    x[0] = 0;
    x[1] = 1;
    k[0] = 0;
    k[1] = 1;
    const double rho = degree_attribute_correlation(k, x);
    CHECK(std::abs(rho - pearson({k.begin(), k.end()}, {x.begin(), x.end()})) < 1e-9);
    CHECK(std::abs(rho) <= 1.0 + 1e-12);
  }
}

TEST_CASE("uniform labels are nearly uncorrelated with degree") {
  std::mt19937_64 gen(8);
  std::vector<std::uint32_t> k(10000);
  for (auto& d : k) d = static_cast<std::uint32_t>(gen() % 200);
  const Network net = generate_synthetic(10000, 40000, 10, 2);
  const TraitAssignment t = assign_traits(net, 0.3, std::nullopt, 0.02, 5);
  CHECK(std::abs(degree_attribute_correlation(k, t.labels)) < 0.05);
}

TEST_CASE("assign_traits labels an exact count") {
  const Network net = generate_synthetic(100, 400, 10, 1);
  const TraitAssignment t = assign_traits(net, 0.5, std::nullopt, 0.02, 3);
  CHECK(std::count(t.labels.begin(), t.labels.end(), 1) == 50);
  CHECK(t.prevalence == 0.5);
  CHECK(t.realized_rho == doctest::Approx(pearson_of(net, t)).epsilon(1e-9));

  const TraitAssignment again = assign_traits(net, 0.5, std::nullopt, 0.02, 3);
  CHECK(again.labels == t.labels);
  CHECK_THROWS_AS(assign_traits(net, 0.0, std::nullopt, 0.02, 3), Error);
  CHECK_THROWS_AS(assign_traits(net, 0.5, 1.5, 0.02, 3), Error);
}

TEST_CASE("assign_traits reaches a correlation target") {
  const Network net = generate_synthetic(1000, 8000, 50, 6);
  const TraitAssignment zero = assign_traits(net, 0.15, 0.0, 0.05, 1);
  CHECK(zero.converged);
  CHECK(std::abs(pearson_of(net, zero)) <= 0.05);

  const TraitAssignment high = assign_traits(net, 0.15, 0.6, 0.02, 1);
  CHECK(high.converged);
  CHECK(std::abs(pearson_of(net, high) - 0.6) <= 0.02);
  CHECK(std::count(high.labels.begin(), high.labels.end(), 1) == 150);
}

TEST_CASE("unreachable targets report non-convergence") {
  const Network net = generate_synthetic(200, 800, 10, 6);
  const TraitAssignment t = assign_traits(net, 0.05, -0.99, 0.001, 1);
  CHECK_FALSE(t.converged);
  CHECK(std::count(t.labels.begin(), t.labels.end(), 1) == 10);
}

TEST_CASE("trait files round trip") {
  TempDir dir;
  const Network net = generate_synthetic(50, 200, 5, 1);
  const TraitAssignment t = assign_traits(net, 0.2, std::nullopt, 0.02, 2);
  write_traits(net, t, dir / "traits.tsv");
  const TraitAssignment back = load_traits(net, dir / "traits.tsv");
  CHECK(back.labels == t.labels);
  CHECK(back.realized_rho == doctest::Approx(t.realized_rho));
}
