#include <set>
#include <sstream>

#include "doctest.h"
#include "hetfraud/error.hpp"
#include "hetfraud/heterograph.hpp"
#include "hetfraud/verify.hpp"
#include "support.hpp"

using namespace hetfraud;

namespace {

FeatureTable three_rows() {
  return testing::small_table({"u1", "u1", "u2"}, {"m1", "m2", "m1"}, {10, 20, 30}, {0, 1, 0},
                              DenseMatrix{{1.0, 0.0}, {2.0, 4.0}, {3.0, 2.0}});
}

FeatureTable random_table(Rng& rng, std::size_t n) {
  std::vector<std::string> users, merchants;
  std::vector<double> times;
  std::vector<int> labels;
  for (std::size_t i = 0; i < n; ++i) {
    users.push_back("u" + std::to_string(rng.below(8)));
    merchants.push_back("m" + std::to_string(rng.below(5)));
    times.push_back(std::floor(rng.uniform(0, 1e6)));
    labels.push_back(rng.uniform() < 0.2 ? 1 : 0);
  }
  return testing::small_table(users, merchants, times, labels, testing::random_matrix(rng, n, 3));
}

std::size_t type_of(const HeteroGraph& g, const std::string& name) {
  const auto t = g.find_node_type(name);
  REQUIRE(t.has_value());
  return *t;
}

std::size_t rel_of(const HeteroGraph& g, const std::string& name) {
  const auto r = g.find_relation(name);
  REQUIRE(r.has_value());
  return *r;
}

std::size_t key_index(const HeteroGraph& g, std::size_t type, const std::string& key) {
  const auto& keys = g.node_keys(type);
  for (std::size_t i = 0; i < keys.size(); ++i)
    if (keys[i] == key) return i;
  FAIL("no node with key " << key);
  return 0;
}

}  // namespace

TEST_SUITE("heterograph") {
  TEST_CASE("single row gives three nodes and four directed edges") {
    const FeatureTable t = testing::small_table({"u1"}, {"m1"}, {42}, {1}, DenseMatrix{{0.5}});
    const auto [g, report] = build_graph(t);
    CHECK(g.total_nodes() == 3);
    CHECK(g.total_edges() == 4);
    CHECK(g.relation_count() == 4);
    for (std::size_t type = 0; type < g.node_type_count(); ++type) {
      CHECK(g.node_count(type) == 1);
      CHECK(g.node_timestamps(type)[0] == 42.0);
    }
    for (std::size_t r = 0; r < g.relation_count(); ++r) CHECK(g.adjacency(r).timestamps == std::vector<double>{42});
    CHECK(report.fraud_labels == 1);
  }

  TEST_CASE("three row hand construction") {
    const auto [g, report] = build_graph(three_rows());
    const std::size_t user = type_of(g, kUserType), merchant = type_of(g, kMerchantType);
    CHECK(g.node_count(user) == 2);
    CHECK(g.node_count(merchant) == 2);
    CHECK(g.transaction_count() == 3);
    const std::size_t u1 = key_index(g, user, "u1"), m1 = key_index(g, merchant, "m1");
    CHECK(g.node_timestamp({user, u1}) == 20.0);
    CHECK(g.node_timestamp({merchant, m1}) == 30.0);
    CHECK(g.features(user)(u1, 0) == 1.5);
    CHECK(g.features(user)(u1, 1) == 2.0);
    CHECK(g.features(merchant)(m1, 0) == 2.0);
    CHECK(report.duplicate_key_merges == 2);

    const auto at = g.neighbors({merchant, m1}, rel_of(g, "at"));
    CHECK(at == std::vector<Neighbor>{{0, 10.0}, {2, 30.0}});
    const auto made_by = g.neighbors({user, u1}, rel_of(g, "made_by"));
    CHECK(made_by == std::vector<Neighbor>{{0, 10.0}, {1, 20.0}});
  }

  TEST_CASE("duplicate keys merge into one node") {
    const FeatureTable t =
        testing::small_table({"a", "a", "a", "b"}, {"m", "m", "n", "n"}, {1, 2, 3, 4}, {0, 0, 1, 0}, DenseMatrix(4, 1));
    const auto [g, report] = build_graph(t);
    CHECK(g.node_count(type_of(g, kUserType)) == 2);
    CHECK(g.node_count(type_of(g, kMerchantType)) == 2);
    CHECK(report.duplicate_key_merges == 4);
  }

  TEST_CASE("empty table is a build error") {
    FeatureTable t;
    t.features = DenseMatrix(0, 2);
    t.feature_names = {"a", "b"};
    try {
      build_graph(t);
      FAIL("expected build error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::build);
    }
  }

  TEST_CASE("isolated node has no neighbors") {
    GraphBuilder b;
    const std::size_t tx = b.add_node_type(kTransactionType, DenseMatrix(2, 1), {1.0, 2.0});
    const std::size_t u = b.add_node_type(kUserType, DenseMatrix(2, 1), {0.0, 0.0});
    const std::size_t makes = b.add_relation("makes", u, tx, "made_by");
    b.set_transaction_type(tx, {0, 1});
    b.add_edge(makes, 0, 0, 1.0);
    b.derive_entity_state();
    const HeteroGraph g = b.build();
    CHECK(g.neighbors({u, 1}, rel_of(g, "made_by")).empty());
    CHECK(g.neighbors({tx, 1}, makes).empty());
    CHECK(validate(g).isolated_nodes == 2);
  }

  TEST_CASE("neighbor query on the wrong node type is a query error") {
    const auto [g, report] = build_graph(three_rows());
    try {
      g.neighbors({type_of(g, kUserType), 0}, rel_of(g, "at"));
      FAIL("expected query error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::query);
    }
  }

  TEST_CASE("decreasing offsets are an integrity error") {
    const auto [g, report] = build_graph(three_rows());
    GraphParts parts = g.parts();
    auto& off = parts.adjacency[rel_of(g, "at")].offsets;
    REQUIRE(off.size() == 3);
    off[1] = off.back() + 1;
    try {
      validate(HeteroGraph::from_parts(parts));
      FAIL("expected integrity error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::integrity);
      CHECK(std::string(e.what()).find("offsets monotone") != std::string::npos);
    }
  }

  TEST_CASE("mismatched edge timestamp is an integrity error") {
    const auto [g, report] = build_graph(three_rows());
    GraphParts parts = g.parts();
    parts.adjacency[rel_of(g, "makes")].timestamps[0] += 1.0;
    CHECK_THROWS_AS(validate(HeteroGraph::from_parts(parts)), Error);
  }

  TEST_CASE("graph without fraud labels validates with a warning") {
    const FeatureTable t = testing::small_table({"u1", "u2"}, {"m1", "m1"}, {1, 2}, {0, 0}, DenseMatrix(2, 1));
    const auto [g, report] = build_graph(t);
    const GraphBuildReport v = validate(g);
    CHECK(v.fraud_labels == 0);
    CHECK(v.warnings.size() == 1);
  }

  TEST_CASE("structural invariants on random tables") {
    Rng rng(31);
    for (int trial = 0; trial < 25; ++trial) {
      const FeatureTable t = random_table(rng, 1 + rng.below(60));
      const auto [g, report] = build_graph(t, RelationConfig{trial % 2 == 1});
      CHECK(g.transaction_count() == t.row_count());
      validate(g);

      if (trial % 2 == 0) {
        std::size_t undirected = 0;
        for (std::size_t r = 0; r < g.relation_count(); ++r) {
          const RelationType& rel = g.relation(r);
          CHECK(g.edge_count(r) == g.edge_count(rel.reverse));
          if (r < rel.reverse) undirected += g.edge_count(r);
        }
        CHECK(undirected == 2 * t.row_count());
        CHECK(g.total_edges() == 2 * undirected);
      }

      for (std::size_t r = 0; r < g.relation_count(); ++r) {
        const RelationType& rel = g.relation(r);
        for (std::size_t v = 0; v < g.node_count(rel.destination_type); ++v) {
          for (const Neighbor& u : g.neighbors({rel.destination_type, v}, r)) {
            CHECK(u.index < g.node_count(rel.source_type));
            const auto back = g.neighbors({rel.source_type, u.index}, rel.reverse);
            CHECK(std::find_if(back.begin(), back.end(), [&](const Neighbor& n) { return n.index == v; }) !=
                  back.end());
          }
        }
      }

      const auto again = build_graph(t, RelationConfig{trial % 2 == 1}).first;
      std::ostringstream a, b;
      write_graph_text(g, a);
      write_graph_text(again, b);
      CHECK(a.str() == b.str());
    }
  }

  TEST_CASE("graph text format round trips") {
    Rng rng(2);
    const auto [g, report] = build_graph(random_table(rng, 25));
    std::stringstream s;
    write_graph_text(g, s);
    const HeteroGraph back = read_graph_text(s);
    std::ostringstream again;
    write_graph_text(back, again);
    CHECK(again.str() == s.str());
    CHECK(back.labels() == g.labels());
  }

  TEST_CASE("self relation links each transaction to itself") {
    const auto [g, report] = build_graph(three_rows(), RelationConfig{true});
    const std::size_t self = rel_of(g, "self");
    CHECK(g.relation(self).reverse == self);
    for (std::size_t v = 0; v < 3; ++v)
      CHECK(g.neighbors({g.transaction_type(), v}, self) == std::vector<Neighbor>{{v, g.node_timestamp({g.transaction_type(), v})}});
  }

  TEST_CASE("random test graphs respect their size budget") {
    for (std::uint64_t s = 0; s < 30; ++s) {
      const HeteroGraph g = random_graph(s);
      CHECK(g.total_nodes() <= 50);
      CHECK(g.relation_count() == 3);
      const auto& y = g.labels();
      CHECK(std::count(y.begin(), y.end(), 1) >= 1);
      CHECK(std::count(y.begin(), y.end(), 0) >= 1);
      validate(g);
    }
  }
}
