#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hetfraud/ingest.hpp"
#include "hetfraud/matrix.hpp"

namespace hetfraud {

inline constexpr const char* kUserType = "user";
inline constexpr const char* kMerchantType = "merchant";
inline constexpr const char* kTransactionType = "transaction";
inline constexpr const char* kBankType = "bank";

struct RelationType {
  std::string name;
  std::size_t source_type = 0;
  std::size_t destination_type = 0;
  std::size_t reverse = 0;  // index of the reverse relation (itself when symmetric)
};

// Compressed rows keyed by destination: the sources of destination v are
// sources[offsets[v] .. offsets[v + 1]), sorted ascending.
struct RelationAdjacency {
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> sources;
  std::vector<double> timestamps;
};

struct NodeRef {
  std::size_t type = 0;
  std::size_t index = 0;
};

struct Neighbor {
  std::size_t index = 0;
  double timestamp = 0.0;
  bool operator==(const Neighbor&) const = default;
};

// Raw storage of a graph. HeteroGraph::from_parts takes these unchecked;
// validate() re-checks every invariant.
struct GraphParts {
  std::vector<std::string> node_types;
  std::vector<std::size_t> node_counts;
  std::vector<DenseMatrix> features;
  std::vector<std::vector<double>> node_timestamps;
  std::vector<std::vector<std::string>> node_keys;  // optional, per type
  std::vector<RelationType> relations;
  std::vector<RelationAdjacency> adjacency;
  std::size_t transaction_type = 0;
  std::vector<int> labels;  // transaction nodes
  // True when non-transaction features/timestamps are summaries of their
  // incident transactions and must be recomputed after edits.
  bool derived_entity_state = false;
  std::size_t duplicate_key_merges = 0;
};

class HeteroGraph {
 public:
  HeteroGraph() = default;
  static HeteroGraph from_parts(GraphParts parts);

  std::size_t node_type_count() const noexcept { return parts_.node_types.size(); }
  const std::string& node_type_name(std::size_t type) const { return parts_.node_types.at(type); }
  std::optional<std::size_t> find_node_type(const std::string& name) const;
  std::size_t node_count(std::size_t type) const { return parts_.node_counts.at(type); }
  std::size_t total_nodes() const;

  std::size_t relation_count() const noexcept { return parts_.relations.size(); }
  const RelationType& relation(std::size_t r) const { return parts_.relations.at(r); }
  std::optional<std::size_t> find_relation(const std::string& name) const;
  const RelationAdjacency& adjacency(std::size_t r) const { return parts_.adjacency.at(r); }
  std::size_t edge_count(std::size_t r) const { return parts_.adjacency.at(r).sources.size(); }
  std::size_t total_edges() const;
  // Destination index of every edge of r, in CSR order.
  const std::vector<std::size_t>& edge_destinations(std::size_t r) const { return edge_destinations_.at(r); }

  // Sources of relation r incident to v, index-sorted. Query error when v
  // is not of r's destination type or out of range.
  std::vector<Neighbor> neighbors(NodeRef v, std::size_t r) const;

  const DenseMatrix& features(std::size_t type) const { return parts_.features.at(type); }
  const std::vector<double>& node_timestamps(std::size_t type) const { return parts_.node_timestamps.at(type); }
  double node_timestamp(NodeRef v) const { return parts_.node_timestamps.at(v.type).at(v.index); }
  std::size_t transaction_type() const noexcept { return parts_.transaction_type; }
  std::size_t transaction_count() const { return node_count(parts_.transaction_type); }
  const std::vector<int>& labels() const noexcept { return parts_.labels; }
  const std::vector<std::string>& node_keys(std::size_t type) const { return parts_.node_keys.at(type); }

  const GraphParts& parts() const noexcept { return parts_; }

 private:
  GraphParts parts_;
  std::vector<std::vector<std::size_t>> edge_destinations_;
};

struct GraphBuildReport {
  std::vector<std::pair<std::string, std::size_t>> node_counts;
  std::vector<std::pair<std::string, std::size_t>> edge_counts;
  std::size_t isolated_nodes = 0;
  std::size_t duplicate_key_merges = 0;
  std::size_t fraud_labels = 0;
  std::vector<std::string> warnings;
};

// Mutable assembly of a HeteroGraph. Relations are registered in
// (forward, reverse) pairs and add_edge() inserts both directions.
class GraphBuilder {
 public:
  std::size_t add_node_type(std::string name, DenseMatrix features, std::vector<double> timestamps,
                            std::vector<std::string> keys = {});
  // Appends rows to an existing type; returns the index of the first new node.
  std::size_t append_nodes(std::size_t type, const DenseMatrix& features, const std::vector<double>& timestamps,
                           const std::vector<std::string>& keys = {});
  // Returns the forward relation id. A reverse_name equal to name registers
  // a single symmetric relation (source and destination types must match).
  std::size_t add_relation(const std::string& name, std::size_t source_type, std::size_t destination_type,
                           const std::string& reverse_name);
  void add_edge(std::size_t relation, std::size_t source, std::size_t destination, double timestamp);
  void set_transaction_type(std::size_t type, std::vector<int> labels);
  std::vector<int>& labels() { return parts_.labels; }
  void set_duplicate_key_merges(std::size_t n) { parts_.duplicate_key_merges = n; }

  // Recomputes every non-transaction node: timestamp = max incident edge
  // timestamp, features = mean of incident transaction feature rows.
  void derive_entity_state();

  std::size_t find_node_type(const std::string& name) const;
  const GraphParts& parts() const noexcept { return parts_; }

  HeteroGraph build() const;

  static GraphBuilder from_graph(const HeteroGraph& graph);

 private:
  struct Edge {
    std::size_t source;
    std::size_t destination;
    double timestamp;
  };
  GraphParts parts_;
  std::vector<std::vector<Edge>> edges_;
};

// Optional registry additions on top of the default user/merchant relations.
struct RelationConfig {
  // transaction -self-> transaction, so a transaction sees its own features.
  bool transaction_self = false;
};

// One transaction node per row, one user / merchant node per distinct key.
// Default relations: user -makes-> transaction, transaction -made_by-> user,
// transaction -at-> merchant, merchant -hosts-> transaction.
std::pair<HeteroGraph, GraphBuildReport> build_graph(const FeatureTable& features,
                                                     const RelationConfig& relations = {});

// Re-checks every invariant; integrity error naming the first violation.
GraphBuildReport validate(const HeteroGraph& graph);

// Text format, one section per node type and relation:
//   hetfraud-graph 1
//   transaction_type <name>
//   node_type <name> <count> <feature cols>
//   timestamps <values...>
//   features            (then <count> rows)
//   relation <name> <source> <destination> <reverse> <edges>
//   offsets <values...>
//   indices <values...>
//   edge_timestamps <values...>
//   labels <values...>
void write_graph_text(const HeteroGraph& graph, std::ostream& out);
HeteroGraph read_graph_text(std::istream& in);

}  // namespace hetfraud
