#include "hetfraud/heterograph.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "hetfraud/error.hpp"
#include "hetfraud/text.hpp"

namespace hetfraud {

namespace {

std::vector<std::size_t> expand_destinations(const RelationAdjacency& adj) {
  std::vector<std::size_t> out(adj.sources.size());
  for (std::size_t v = 0; v + 1 < adj.offsets.size(); ++v) {
    const std::size_t lo = std::min(adj.offsets[v], out.size());
    const std::size_t hi = std::min(adj.offsets[v + 1], out.size());
    for (std::size_t e = lo; e < hi; ++e) out[e] = v;
  }
  return out;
}

[[noreturn]] void integrity(const std::string& invariant, const std::string& detail) {
  throw Error(ErrorKind::integrity, invariant + ": " + detail);
}

}  // namespace

HeteroGraph HeteroGraph::from_parts(GraphParts parts) {
  HeteroGraph g;
  g.parts_ = std::move(parts);
  if (g.parts_.node_keys.size() < g.parts_.node_types.size()) g.parts_.node_keys.resize(g.parts_.node_types.size());
  for (const auto& adj : g.parts_.adjacency) g.edge_destinations_.push_back(expand_destinations(adj));
  return g;
}

std::optional<std::size_t> HeteroGraph::find_node_type(const std::string& name) const {
  for (std::size_t t = 0; t < parts_.node_types.size(); ++t)
    if (parts_.node_types[t] == name) return t;
  return std::nullopt;
}

std::optional<std::size_t> HeteroGraph::find_relation(const std::string& name) const {
  for (std::size_t r = 0; r < parts_.relations.size(); ++r)
    if (parts_.relations[r].name == name) return r;
  return std::nullopt;
}

std::size_t HeteroGraph::total_nodes() const {
  std::size_t n = 0;
  for (std::size_t c : parts_.node_counts) n += c;
  return n;
}

std::size_t HeteroGraph::total_edges() const {
  std::size_t n = 0;
  for (const auto& a : parts_.adjacency) n += a.sources.size();
  return n;
}

std::vector<Neighbor> HeteroGraph::neighbors(NodeRef v, std::size_t r) const {
  if (r >= relation_count()) throw Error(ErrorKind::query, "unknown relation " + std::to_string(r));
  const RelationType& rel = parts_.relations[r];
  if (v.type != rel.destination_type) {
    throw Error(ErrorKind::query, "relation " + rel.name + " ends at " + node_type_name(rel.destination_type) +
                                      ", not " + node_type_name(v.type));
  }
  if (v.index >= node_count(v.type)) throw Error(ErrorKind::query, "node index out of range");
  const RelationAdjacency& adj = parts_.adjacency[r];
  std::vector<Neighbor> out;
  for (std::size_t e = adj.offsets[v.index]; e < adj.offsets[v.index + 1]; ++e) {
    out.push_back({adj.sources[e], adj.timestamps[e]});
  }
  return out;
}

std::size_t GraphBuilder::add_node_type(std::string name, DenseMatrix features, std::vector<double> timestamps,
                                        std::vector<std::string> keys) {
  for (const auto& t : parts_.node_types)
    if (t == name) throw Error(ErrorKind::build, "duplicate node type " + name);
  if (features.rows() != timestamps.size()) throw Error(ErrorKind::build, "node type " + name + ": feature rows != timestamps");
  parts_.node_types.push_back(std::move(name));
  parts_.node_counts.push_back(timestamps.size());
  parts_.features.push_back(std::move(features));
  parts_.node_timestamps.push_back(std::move(timestamps));
  parts_.node_keys.push_back(std::move(keys));
  return parts_.node_types.size() - 1;
}

std::size_t GraphBuilder::append_nodes(std::size_t type, const DenseMatrix& features,
                                       const std::vector<double>& timestamps, const std::vector<std::string>& keys) {
  DenseMatrix& current = parts_.features.at(type);
  if (features.cols() != current.cols() || features.rows() != timestamps.size()) {
    throw Error(ErrorKind::build, "append_nodes: shape mismatch for " + parts_.node_types[type]);
  }
  const std::size_t first = parts_.node_counts[type];
  std::vector<double> values(current.values().begin(), current.values().end());
  values.insert(values.end(), features.values().begin(), features.values().end());
  current = DenseMatrix(first + features.rows(), current.cols(), std::move(values));
  auto& ts = parts_.node_timestamps[type];
  ts.insert(ts.end(), timestamps.begin(), timestamps.end());
  auto& k = parts_.node_keys[type];
  if (!k.empty() || !keys.empty()) {
    k.resize(first, "");
    k.insert(k.end(), keys.begin(), keys.end());
    k.resize(first + features.rows(), "");
  }
  parts_.node_counts[type] += features.rows();
  return first;
}

std::size_t GraphBuilder::add_relation(const std::string& name, std::size_t source_type,
                                       std::size_t destination_type, const std::string& reverse_name) {
  if (source_type >= parts_.node_types.size() || destination_type >= parts_.node_types.size()) {
    throw Error(ErrorKind::build, "relation " + name + " refers to an unknown node type");
  }
  for (const auto& r : parts_.relations) {
    if (r.name == name || r.name == reverse_name) throw Error(ErrorKind::build, "duplicate relation " + r.name);
  }
  const std::size_t forward = parts_.relations.size();
  if (reverse_name == name) {
    if (source_type != destination_type) throw Error(ErrorKind::build, "symmetric relation " + name + " needs one node type");
    parts_.relations.push_back({name, source_type, destination_type, forward});
    edges_.emplace_back();
    return forward;
  }
  parts_.relations.push_back({name, source_type, destination_type, forward + 1});
  parts_.relations.push_back({reverse_name, destination_type, source_type, forward});
  edges_.emplace_back();
  edges_.emplace_back();
  return forward;
}

void GraphBuilder::add_edge(std::size_t relation, std::size_t source, std::size_t destination, double timestamp) {
  const RelationType& rel = parts_.relations.at(relation);
  if (source >= parts_.node_counts[rel.source_type] || destination >= parts_.node_counts[rel.destination_type]) {
    throw Error(ErrorKind::build, "edge endpoint out of range in relation " + rel.name);
  }
  edges_[relation].push_back({source, destination, timestamp});
  if (rel.reverse != relation || source != destination) {
    edges_[rel.reverse].push_back({destination, source, timestamp});
  }
}

void GraphBuilder::set_transaction_type(std::size_t type, std::vector<int> labels) {
  if (labels.size() != parts_.node_counts.at(type)) throw Error(ErrorKind::build, "labels do not match transactions");
  parts_.transaction_type = type;
  parts_.labels = std::move(labels);
}

std::size_t GraphBuilder::find_node_type(const std::string& name) const {
  for (std::size_t t = 0; t < parts_.node_types.size(); ++t)
    if (parts_.node_types[t] == name) return t;
  throw Error(ErrorKind::build, "unknown node type " + name);
}

void GraphBuilder::derive_entity_state() {
  const std::size_t tx = parts_.transaction_type;
  const DenseMatrix& tx_features = parts_.features[tx];
  for (std::size_t t = 0; t < parts_.node_types.size(); ++t) {
    if (t == tx) continue;
    const std::size_t n = parts_.node_counts[t];
    DenseMatrix sums(n, tx_features.cols());
    std::vector<double> counts(n, 0.0);
    std::vector<double> latest(n, -std::numeric_limits<double>::infinity());
    for (std::size_t r = 0; r < parts_.relations.size(); ++r) {
      if (parts_.relations[r].destination_type != t) continue;
      const bool from_tx = parts_.relations[r].source_type == tx;
      for (const Edge& e : edges_[r]) {
        latest[e.destination] = std::max(latest[e.destination], e.timestamp);
        if (!from_tx) continue;
        counts[e.destination] += 1.0;
        double* dst = sums.row(e.destination).data();
        const double* src = tx_features.row(e.source).data();
        for (std::size_t c = 0; c < sums.cols(); ++c) dst[c] += src[c];
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (counts[i] > 0.0)
        for (double& v : sums.row(i)) v /= counts[i];
      if (!std::isfinite(latest[i])) latest[i] = 0.0;
    }
    parts_.features[t] = std::move(sums);
    parts_.node_timestamps[t] = std::move(latest);
  }
  parts_.derived_entity_state = true;
}

HeteroGraph GraphBuilder::build() const {
  GraphParts parts = parts_;
  parts.adjacency.clear();
  for (std::size_t r = 0; r < parts.relations.size(); ++r) {
    std::vector<Edge> edges = edges_[r];
    std::stable_sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
      return a.destination != b.destination ? a.destination < b.destination : a.source < b.source;
    });
    RelationAdjacency adj;
    adj.offsets.assign(parts.node_counts[parts.relations[r].destination_type] + 1, 0);
    for (const Edge& e : edges) ++adj.offsets[e.destination + 1];
    for (std::size_t v = 1; v < adj.offsets.size(); ++v) adj.offsets[v] += adj.offsets[v - 1];
    for (const Edge& e : edges) {
      adj.sources.push_back(e.source);
      adj.timestamps.push_back(e.timestamp);
    }
    parts.adjacency.push_back(std::move(adj));
  }
  return HeteroGraph::from_parts(std::move(parts));
}

GraphBuilder GraphBuilder::from_graph(const HeteroGraph& graph) {
  GraphBuilder b;
  b.parts_ = graph.parts();
  b.parts_.adjacency.clear();
  b.edges_.assign(b.parts_.relations.size(), {});
  for (std::size_t r = 0; r < graph.relation_count(); ++r) {
    const auto& adj = graph.adjacency(r);
    const auto& dst = graph.edge_destinations(r);
    for (std::size_t e = 0; e < adj.sources.size(); ++e) {
      b.edges_[r].push_back({adj.sources[e], dst[e], adj.timestamps[e]});
    }
  }
  return b;
}

std::pair<HeteroGraph, GraphBuildReport> build_graph(const FeatureTable& table, const RelationConfig& relations) {
  if (table.row_count() == 0) throw Error(ErrorKind::build, "cannot build a graph from an empty table");
  table.validate();

  auto index_keys = [](const std::vector<std::string>& keys, std::vector<std::string>& distinct) {
    std::unordered_map<std::string, std::size_t> ids;
    std::vector<std::size_t> out;
    out.reserve(keys.size());
    for (const auto& k : keys) {
      const auto [it, inserted] = ids.emplace(k, distinct.size());
      if (inserted) distinct.push_back(k);
      out.push_back(it->second);
    }
    return out;
  };
  std::vector<std::string> users, merchants;
  const auto user_of = index_keys(table.user_keys, users);
  const auto merchant_of = index_keys(table.merchant_keys, merchants);
  const std::size_t n = table.row_count();

  GraphBuilder b;
  const std::size_t user_t = b.add_node_type(kUserType, DenseMatrix(users.size(), table.features.cols()),
                                             std::vector<double>(users.size(), 0.0), users);
  const std::size_t merchant_t = b.add_node_type(
      kMerchantType, DenseMatrix(merchants.size(), table.features.cols()), std::vector<double>(merchants.size(), 0.0),
      merchants);
  const std::size_t tx_t = b.add_node_type(kTransactionType, table.features, table.timestamps, table.ids);
  b.set_transaction_type(tx_t, table.labels);

  const std::size_t makes = b.add_relation("makes", user_t, tx_t, "made_by");
  const std::size_t at = b.add_relation("at", tx_t, merchant_t, "hosts");
  for (std::size_t i = 0; i < n; ++i) {
    b.add_edge(makes, user_of[i], i, table.timestamps[i]);
    b.add_edge(at, i, merchant_of[i], table.timestamps[i]);
  }
  if (relations.transaction_self) {
    const std::size_t self = b.add_relation("self", tx_t, tx_t, "self");
    for (std::size_t i = 0; i < n; ++i) b.add_edge(self, i, i, table.timestamps[i]);
  }
  b.set_duplicate_key_merges((n - users.size()) + (n - merchants.size()));
  b.derive_entity_state();

  HeteroGraph g = b.build();
  GraphBuildReport report = validate(g);
  return {std::move(g), std::move(report)};
}

GraphBuildReport validate(const HeteroGraph& graph) {
  const GraphParts& p = graph.parts();
  const std::size_t types = p.node_types.size();
  if (p.node_counts.size() != types || p.features.size() != types || p.node_timestamps.size() != types) {
    integrity("per-type storage", "node type tables have different lengths");
  }
  for (std::size_t t = 0; t < types; ++t) {
    for (std::size_t u = 0; u < t; ++u)
      if (p.node_types[t] == p.node_types[u]) integrity("node types unique", p.node_types[t]);
    if (p.features[t].rows() != p.node_counts[t] || p.node_timestamps[t].size() != p.node_counts[t]) {
      integrity("per-type storage", p.node_types[t] + " counts disagree");
    }
  }
  if (p.transaction_type >= types) integrity("transaction type", "out of range");
  const std::size_t tx = p.transaction_type;
  if (p.labels.size() != p.node_counts[tx]) integrity("labels", "one label per transaction node required");
  for (int y : p.labels)
    if (y != 0 && y != 1) integrity("labels", "labels must be 0/1");
  if (p.adjacency.size() != p.relations.size()) integrity("relation registry", "adjacency count mismatch");

  for (std::size_t r = 0; r < p.relations.size(); ++r) {
    const RelationType& rel = p.relations[r];
    if (rel.source_type >= types || rel.destination_type >= types) integrity("relation registry", rel.name + " node types");
    for (std::size_t q = 0; q < r; ++q) {
      const RelationType& o = p.relations[q];
      if (o.name == rel.name) integrity("relations unique", rel.name);
    }
    if (rel.reverse >= p.relations.size()) integrity("reverse relation registered", rel.name);
    const RelationType& rev = p.relations[rel.reverse];
    if (rev.reverse != r || rev.source_type != rel.destination_type || rev.destination_type != rel.source_type) {
      integrity("reverse relation registered", rel.name + " / " + rev.name);
    }

    const RelationAdjacency& adj = p.adjacency[r];
    const std::size_t n_dst = p.node_counts[rel.destination_type];
    if (adj.offsets.size() != n_dst + 1 || adj.offsets.front() != 0) integrity("offsets shape", rel.name);
    for (std::size_t v = 0; v < n_dst; ++v) {
      if (adj.offsets[v + 1] < adj.offsets[v]) integrity("offsets monotone", rel.name + " at " + std::to_string(v));
    }
    if (adj.offsets.back() != adj.sources.size() || adj.timestamps.size() != adj.sources.size()) {
      integrity("offsets shape", rel.name + " edge count");
    }
    const std::size_t n_src = p.node_counts[rel.source_type];
    for (std::size_t v = 0; v < n_dst; ++v) {
      for (std::size_t e = adj.offsets[v]; e < adj.offsets[v + 1]; ++e) {
        const std::size_t u = adj.sources[e];
        if (u >= n_src) integrity("adjacency indices in range", rel.name);
        if (e > adj.offsets[v] && adj.sources[e - 1] >= u) {
          integrity("sources sorted and unique", rel.name + " destination " + std::to_string(v));
        }
        const double ts = adj.timestamps[e];
        const bool src_tx = rel.source_type == tx, dst_tx = rel.destination_type == tx;
        double expected = ts;
        if (src_tx && dst_tx) {
          expected = std::max(p.node_timestamps[tx][u], p.node_timestamps[tx][v]);
        } else if (src_tx) {
          expected = p.node_timestamps[tx][u];
        } else if (dst_tx) {
          expected = p.node_timestamps[tx][v];
        }
        if (ts != expected) integrity("edge timestamp equals transaction timestamp", rel.name);
      }
    }
  }

  // Reverse consistency: u in N_r(v) <=> v in N_rev(r)(u), same timestamp.
  for (std::size_t r = 0; r < p.relations.size(); ++r) {
    const std::size_t rev = p.relations[r].reverse;
    const RelationAdjacency& a = p.adjacency[r];
    const RelationAdjacency& b = p.adjacency[rev];
    if (a.sources.size() != b.sources.size()) integrity("reverse edges consistent", p.relations[r].name);
    for (std::size_t v = 0; v + 1 < a.offsets.size(); ++v) {
      for (std::size_t e = a.offsets[v]; e < a.offsets[v + 1]; ++e) {
        const std::size_t u = a.sources[e];
        const auto first = b.sources.begin() + static_cast<std::ptrdiff_t>(b.offsets[u]);
        const auto last = b.sources.begin() + static_cast<std::ptrdiff_t>(b.offsets[u + 1]);
        const auto it = std::lower_bound(first, last, v);
        if (it == last || *it != v || b.timestamps[static_cast<std::size_t>(it - b.sources.begin())] != a.timestamps[e]) {
          integrity("reverse edges consistent", p.relations[r].name);
        }
      }
    }
  }

  // Entity timestamps follow their most recent incident edge.
  std::vector<std::vector<std::size_t>> degree(types);
  for (std::size_t t = 0; t < types; ++t) degree[t].assign(p.node_counts[t], 0);
  for (std::size_t r = 0; r < p.relations.size(); ++r) {
    const RelationType& rel = p.relations[r];
    const RelationAdjacency& adj = p.adjacency[r];
    for (std::size_t v = 0; v + 1 < adj.offsets.size(); ++v) degree[rel.destination_type][v] += adj.offsets[v + 1] - adj.offsets[v];
  }
  for (std::size_t t = 0; t < types; ++t) {
    if (t == tx) continue;
    std::vector<double> latest(p.node_counts[t], -std::numeric_limits<double>::infinity());
    for (std::size_t r = 0; r < p.relations.size(); ++r) {
      if (p.relations[r].destination_type != t) continue;
      const RelationAdjacency& adj = p.adjacency[r];
      for (std::size_t v = 0; v + 1 < adj.offsets.size(); ++v)
        for (std::size_t e = adj.offsets[v]; e < adj.offsets[v + 1]; ++e) latest[v] = std::max(latest[v], adj.timestamps[e]);
    }
    for (std::size_t v = 0; v < latest.size(); ++v) {
      if (std::isfinite(latest[v]) && latest[v] != p.node_timestamps[t][v]) {
        integrity("entity timestamp equals latest incident edge", p.node_types[t] + " " + std::to_string(v));
      }
    }
  }

  GraphBuildReport report;
  for (std::size_t t = 0; t < types; ++t) {
    report.node_counts.emplace_back(p.node_types[t], p.node_counts[t]);
    for (std::size_t d : degree[t]) report.isolated_nodes += d == 0;
  }
  for (std::size_t r = 0; r < p.relations.size(); ++r) report.edge_counts.emplace_back(p.relations[r].name, p.adjacency[r].sources.size());
  report.duplicate_key_merges = p.duplicate_key_merges;
  for (int y : p.labels) report.fraud_labels += y;
  if (report.fraud_labels == 0) report.warnings.push_back("graph has no fraud labels");
  if (report.fraud_labels == p.labels.size() && !p.labels.empty()) report.warnings.push_back("graph has no legitimate labels");
  return report;
}

namespace {

template <typename T>
void write_values(std::ostream& out, const char* tag, const std::vector<T>& values) {
  out << tag;
  for (const auto& v : values) {
    out << ' ';
    if constexpr (std::is_floating_point_v<T>) {
      out << format_double(v);
    } else {
      out << v;
    }
  }
  out << '\n';
}

std::vector<std::string> read_tagged(std::istream& in, const std::string& tag) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::parse, "graph text truncated before " + tag);
  std::istringstream ss(line);
  std::string head;
  ss >> head;
  if (head != tag) throw Error(ErrorKind::parse, "graph text: expected '" + tag + "', got '" + head + "'");
  std::vector<std::string> out;
  for (std::string tok; ss >> tok;) out.push_back(tok);
  return out;
}

std::size_t to_size(const std::string& s) { return static_cast<std::size_t>(parse_integer(s, "graph text")); }
double to_real(const std::string& s) {
  double v = 0.0;
  if (!try_parse_double(s, v)) throw Error(ErrorKind::parse, "graph text: bad number " + s);
  return v;
}

}  // namespace

void write_graph_text(const HeteroGraph& graph, std::ostream& out) {
  const GraphParts& p = graph.parts();
  out << "hetfraud-graph 1\n";
  out << "transaction_type " << p.node_types[p.transaction_type] << "\n";
  for (std::size_t t = 0; t < p.node_types.size(); ++t) {
    out << "node_type " << p.node_types[t] << ' ' << p.node_counts[t] << ' ' << p.features[t].cols() << "\n";
    write_values(out, "timestamps", p.node_timestamps[t]);
    out << "features\n";
    for (std::size_t r = 0; r < p.features[t].rows(); ++r) {
      const auto row = p.features[t].row(r);
      write_values(out, "row", std::vector<double>(row.begin(), row.end()));
    }
  }
  for (std::size_t r = 0; r < p.relations.size(); ++r) {
    const RelationType& rel = p.relations[r];
    out << "relation " << rel.name << ' ' << p.node_types[rel.source_type] << ' '
        << p.node_types[rel.destination_type] << ' ' << p.relations[rel.reverse].name << ' '
        << p.adjacency[r].sources.size() << "\n";
    write_values(out, "offsets", p.adjacency[r].offsets);
    write_values(out, "indices", p.adjacency[r].sources);
    write_values(out, "edge_timestamps", p.adjacency[r].timestamps);
  }
  write_values(out, "labels", p.labels);
}

HeteroGraph read_graph_text(std::istream& in) {
  if (read_tagged(in, "hetfraud-graph") != std::vector<std::string>{"1"}) {
    throw Error(ErrorKind::parse, "unsupported graph text version");
  }
  const auto tx_name = read_tagged(in, "transaction_type");
  GraphParts p;
  std::vector<std::array<std::string, 5>> rel_lines;
  std::string line;
  while (in.peek() != EOF) {
    const std::streampos pos = in.tellg();
    std::getline(in, line);
    std::istringstream ss(line);
    std::string head;
    ss >> head;
    if (head == "node_type") {
      std::string name;
      std::size_t count = 0, cols = 0;
      ss >> name >> count >> cols;
      p.node_types.push_back(name);
      p.node_counts.push_back(count);
      std::vector<double> ts;
      for (const auto& s : read_tagged(in, "timestamps")) ts.push_back(to_real(s));
      p.node_timestamps.push_back(std::move(ts));
      read_tagged(in, "features");
      std::vector<double> values;
      for (std::size_t r = 0; r < count; ++r)
        for (const auto& s : read_tagged(in, "row")) values.push_back(to_real(s));
      p.features.emplace_back(count, cols, std::move(values));
    } else if (head == "relation") {
      std::array<std::string, 5> fields;
      for (auto& f : fields) ss >> f;
      rel_lines.push_back(fields);
      RelationAdjacency adj;
      for (const auto& s : read_tagged(in, "offsets")) adj.offsets.push_back(to_size(s));
      for (const auto& s : read_tagged(in, "indices")) adj.sources.push_back(to_size(s));
      for (const auto& s : read_tagged(in, "edge_timestamps")) adj.timestamps.push_back(to_real(s));
      p.adjacency.push_back(std::move(adj));
    } else if (head == "labels") {
      for (std::string tok; ss >> tok;) p.labels.push_back(static_cast<int>(to_size(tok)));
    } else if (!head.empty()) {
      in.seekg(pos);
      throw Error(ErrorKind::parse, "graph text: unexpected section '" + head + "'");
    }
  }
  auto type_index = [&](const std::string& name) {
    for (std::size_t t = 0; t < p.node_types.size(); ++t)
      if (p.node_types[t] == name) return t;
    throw Error(ErrorKind::parse, "graph text: unknown node type " + name);
  };
  for (const auto& f : rel_lines) p.relations.push_back({f[0], type_index(f[1]), type_index(f[2]), 0});
  for (std::size_t r = 0; r < rel_lines.size(); ++r) {
    bool found = false;
    for (std::size_t q = 0; q < p.relations.size(); ++q) {
      if (p.relations[q].name == rel_lines[r][3]) {
        p.relations[r].reverse = q;
        found = true;
      }
    }
    if (!found) throw Error(ErrorKind::parse, "graph text: unknown reverse relation " + rel_lines[r][3]);
  }
  if (tx_name.size() != 1) throw Error(ErrorKind::parse, "graph text: bad transaction_type line");
  p.transaction_type = type_index(tx_name[0]);
  return HeteroGraph::from_parts(std::move(p));
}

}  // namespace hetfraud
