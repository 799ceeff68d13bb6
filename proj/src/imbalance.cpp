#include "hetfraud/imbalance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "hetfraud/csv.hpp"
#include "hetfraud/error.hpp"
#include "hetfraud/random.hpp"
#include "hetfraud/text.hpp"

namespace hetfraud {

std::string to_string(ResampleMethod method) {
  switch (method) {
    case ResampleMethod::none: return "none";
    case ResampleMethod::smote: return "smote";
    case ResampleMethod::undersample: return "undersample";
    case ResampleMethod::cost_sensitive: return "cost_sensitive";
    case ResampleMethod::smote_plus_cost: return "smote_plus_cost";
  }
  return "none";
}

ResampleMethod parse_resample_method(const std::string& text) {
  for (auto m : {ResampleMethod::none, ResampleMethod::smote, ResampleMethod::undersample,
                 ResampleMethod::cost_sensitive, ResampleMethod::smote_plus_cost}) {
    if (to_string(m) == text) return m;
  }
  throw Error(ErrorKind::config, "unknown imbalance method '" + text +
                                     "' (none, smote, undersample, cost_sensitive, smote_plus_cost)");
}

bool uses_smote(ResampleMethod method) {
  return method == ResampleMethod::smote || method == ResampleMethod::smote_plus_cost;
}

bool uses_class_weights(ResampleMethod method) {
  return method == ResampleMethod::cost_sensitive || method == ResampleMethod::smote_plus_cost;
}

void ResampleConfig::validate() const {
  if (smote_k == 0) throw Error(ErrorKind::config, "smote_k must be >= 1");
  if (!(target_ratio > 0.0 && target_ratio <= 0.5)) throw Error(ErrorKind::config, "target_ratio must lie in (0, 0.5]");
}

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

std::vector<std::size_t> nearest_neighbors(const DenseMatrix& rows, std::size_t row, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> d;
  d.reserve(rows.rows());
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    if (i != row) d.emplace_back(squared_distance(rows.row(row), rows.row(i)), i);
  }
  const std::size_t take = std::min(k, d.size());
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(take), d.end());
  std::vector<std::size_t> out(take);
  for (std::size_t i = 0; i < take; ++i) out[i] = d[i].second;
  return out;
}

SmoteResult smote(const DenseMatrix& minority, std::size_t k, std::size_t n_synthetic, std::uint64_t seed,
                  std::optional<double> forced_gap) {
  if (k == 0) throw Error(ErrorKind::config, "smote k must be >= 1");
  SmoteResult out;
  out.rows = DenseMatrix(n_synthetic, minority.cols());
  if (n_synthetic == 0) return out;
  if (minority.rows() < k + 1) {
    throw Error(ErrorKind::resample, "SMOTE needs at least k+1 = " + std::to_string(k + 1) + " minority rows, got " +
                                         std::to_string(minority.rows()) +
                                         "; use cost_sensitive weighting instead");
  }
  Rng rng(seed);
  std::vector<std::size_t> order(minority.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> neighbors(minority.rows());
  for (std::size_t s = 0; s < n_synthetic; ++s) {
    const std::size_t base = order[s % order.size()];
    if (neighbors[base].empty()) neighbors[base] = nearest_neighbors(minority, base, k);
    const std::size_t nb = neighbors[base][rng.below(neighbors[base].size())];
    const double g = forced_gap ? *forced_gap : rng.uniform();
    auto dst = out.rows.row(s);
    const auto xb = minority.row(base);
    const auto xn = minority.row(nb);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] = xb[c] + g * (xn[c] - xb[c]);
    out.provenance.push_back({base, nb, g});
  }
  return out;
}

std::size_t smote_target_count(std::size_t minority, std::size_t majority, double ratio) {
  const auto target = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(majority)));
  return target > minority ? target - minority : 0;
}

HeteroGraph attach_synthetic_nodes(const HeteroGraph& graph, const DenseMatrix& rows,
                                   const std::vector<SmoteProvenance>& provenance) {
  if (rows.rows() != provenance.size()) {
    throw Error(ErrorKind::shape, "synthetic rows (" + std::to_string(rows.rows()) + ") and provenance (" +
                                      std::to_string(provenance.size()) + ") differ in length");
  }
  if (provenance.empty()) return graph;
  const std::size_t tx = graph.transaction_type();
  const std::size_t n = graph.transaction_count();
  for (const auto& p : provenance) {
    if (p.base >= n || p.neighbor >= n) {
      throw Error(ErrorKind::resample, "provenance refers to transaction " + std::to_string(std::max(p.base, p.neighbor)) +
                                           " of " + std::to_string(n));
    }
  }
  GraphBuilder b = GraphBuilder::from_graph(graph);
  const auto& t = graph.node_timestamps(tx);
  std::vector<double> times;
  std::vector<std::string> keys;
  for (std::size_t s = 0; s < provenance.size(); ++s) {
    const auto& p = provenance[s];
    times.push_back((1.0 - p.gap) * t[p.base] + p.gap * t[p.neighbor]);
    keys.push_back("synthetic" + std::to_string(s));
  }
  const std::size_t first = b.append_nodes(tx, rows, times, keys);
  for (std::size_t s = 0; s < provenance.size(); ++s) b.labels().push_back(1);

  // Only forward relations are replayed; add_edge inserts the reverse.
  for (std::size_t r = 0; r < graph.relation_count(); ++r) {
    const RelationType& rel = graph.relation(r);
    if (rel.reverse < r) continue;
    const auto& adj = graph.adjacency(r);
    const auto& dst = graph.edge_destinations(r);
    for (std::size_t s = 0; s < provenance.size(); ++s) {
      const std::size_t base = provenance[s].base;
      const std::size_t node = first + s;
      if (rel.destination_type == tx && rel.source_type != tx) {
        for (std::size_t e = adj.offsets[base]; e < adj.offsets[base + 1]; ++e)
          b.add_edge(r, adj.sources[e], node, times[s]);
      } else if (rel.source_type == tx && rel.destination_type == tx) {
        for (std::size_t e = adj.offsets[base]; e < adj.offsets[base + 1]; ++e) {
          const std::size_t src = adj.sources[e];
          if (src == base) {
            b.add_edge(r, node, node, times[s]);
          } else {
            b.add_edge(r, src, node, std::max(times[s], t[src]));
          }
        }
      } else if (rel.source_type == tx) {
        for (std::size_t e = 0; e < adj.sources.size(); ++e)
          if (adj.sources[e] == base) b.add_edge(r, node, dst[e], times[s]);
      }
    }
  }
  b.derive_entity_state();
  HeteroGraph out = b.build();
  validate(out);
  return out;
}

UndersampleResult undersample(const std::vector<int>& labels, double target_ratio, std::uint64_t seed) {
  if (!(target_ratio > 0.0)) throw Error(ErrorKind::config, "undersample ratio must be > 0");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) throw Error(ErrorKind::resample, "undersampling needs both classes");
  const bool pos_minor = pos.size() <= neg.size();
  std::vector<std::size_t>& minority = pos_minor ? pos : neg;
  std::vector<std::size_t>& majority = pos_minor ? neg : pos;
  const auto wanted = static_cast<std::size_t>(std::ceil(static_cast<double>(minority.size()) / target_ratio));
  UndersampleResult out;
  if (wanted >= majority.size()) {
    out.kept.resize(labels.size());
    std::iota(out.kept.begin(), out.kept.end(), std::size_t{0});
    out.notice = "class ratio already at or above target " + format_double(target_ratio) + "; nothing removed";
    return out;
  }
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(majority));
  majority.resize(wanted);
  out.kept = minority;
  out.kept.insert(out.kept.end(), majority.begin(), majority.end());
  std::sort(out.kept.begin(), out.kept.end());
  out.changed = true;
  return out;
}

ClassWeights class_weights(const std::vector<int>& labels) {
  std::size_t pos = 0;
  for (int y : labels) pos += y == 1 ? 1 : 0;
  const std::size_t n = labels.size();
  if (pos == 0 || pos == n) {
    throw Error(ErrorKind::weight, "class weights need both classes (got " + std::to_string(pos) + " positives of " +
                                       std::to_string(n) + "); disable cost-sensitive weighting");
  }
  const auto N = static_cast<double>(n);
  return {N / (2.0 * static_cast<double>(n - pos)), N / (2.0 * static_cast<double>(pos))};
}

void write_provenance_csv(const std::vector<SmoteProvenance>& provenance, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << "synthetic,base,neighbor,gap\n";
  for (std::size_t i = 0; i < provenance.size(); ++i) {
    out << i << ',' << provenance[i].base << ',' << provenance[i].neighbor << ',' << format_double(provenance[i].gap)
        << '\n';
  }
  if (!out) throw Error(ErrorKind::io, "failed writing " + path.string());
}

}  // namespace hetfraud
