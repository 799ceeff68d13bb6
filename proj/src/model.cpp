#include "hetfraud/model.hpp"

#include <cmath>
#include <sstream>

#include "hetfraud/error.hpp"
#include "hetfraud/random.hpp"
#include "hetfraud/text.hpp"

namespace hetfraud {

void ModelConfig::validate() const {
  if (layers == 0) throw Error(ErrorKind::config, "layers must be positive");
  if (hidden == 0) throw Error(ErrorKind::config, "hidden dimension must be positive");
  if (!(decay_rate >= 0.0) || !std::isfinite(decay_rate)) throw Error(ErrorKind::config, "decay_rate must be >= 0");
  if (!(decay_time_unit > 0.0)) throw Error(ErrorKind::config, "decay_time_unit must be > 0");
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw Error(ErrorKind::config, "leaky_slope must lie in (0,1)");
}

ModelConfig ModelConfig::from_config(const KeyValueConfig& cfg) { return from_config(cfg, ModelConfig{}); }

ModelConfig ModelConfig::from_config(const KeyValueConfig& cfg, const ModelConfig& d) {
  ModelConfig m;
  const long long layers = cfg.get_int("layers", static_cast<long long>(d.layers));
  const long long hidden = cfg.get_int("hidden", static_cast<long long>(d.hidden));
  if (layers <= 0 || hidden <= 0) throw Error(ErrorKind::config, "layers and hidden must be positive");
  m.layers = static_cast<std::size_t>(layers);
  m.hidden = static_cast<std::size_t>(hidden);
  m.decay_rate = cfg.get_double("decay_rate", d.decay_rate);
  m.decay_time_unit = cfg.get_double("decay_time_unit", d.decay_time_unit);
  m.use_attention = cfg.get_bool("use_attention", d.use_attention);
  m.use_relation_typing = cfg.get_bool("use_relation_typing", d.use_relation_typing);
  m.use_decay = cfg.get_bool("use_decay", d.use_decay);
  m.leaky_slope = cfg.get_double("leaky_slope", d.leaky_slope);
  m.seed = cfg.get_u64("seed", d.seed);
  m.validate();
  return m;
}

void ModelConfig::echo(KeyValueConfig& cfg) const {
  cfg.set("layers", std::to_string(layers));
  cfg.set("hidden", std::to_string(hidden));
  cfg.set("decay_rate", format_double(decay_rate));
  cfg.set("decay_time_unit", format_double(decay_time_unit));
  cfg.set("use_attention", use_attention ? "true" : "false");
  cfg.set("use_relation_typing", use_relation_typing ? "true" : "false");
  cfg.set("use_decay", use_decay ? "true" : "false");
  cfg.set("leaky_slope", format_double(leaky_slope));
  cfg.set("seed", std::to_string(seed));
}

Var BoundParams::get(const std::string& name) {
  if (const auto it = cache_.find(name); it != cache_.end()) return it->second;
  Var v = tape_.parameter(store_.at(name));
  cache_.emplace(name, v);
  return v;
}

std::string weight_name(std::size_t layer, const std::string& group) {
  return "layer" + std::to_string(layer) + "." + group + ".W";
}

std::string attention_name(std::size_t layer, const std::string& group) {
  return "layer" + std::to_string(layer) + "." + group + ".a";
}

std::string relation_group(const HeteroGraph& graph, std::size_t relation, const ModelConfig& config) {
  return config.use_relation_typing ? graph.relation(relation).name : std::string("shared");
}

namespace {

DenseMatrix uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols, double bound) {
  DenseMatrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(-bound, bound);
  return m;
}

std::size_t input_width(const HeteroGraph& graph) {
  const std::size_t width = graph.features(0).cols();
  for (std::size_t t = 1; t < graph.node_type_count(); ++t) {
    if (graph.features(t).cols() != width) {
      throw Error(ErrorKind::shape, "node types carry different feature widths: " + graph.node_type_name(0) + " " +
                                        std::to_string(width) + " vs " + graph.node_type_name(t) + " " +
                                        std::to_string(graph.features(t).cols()));
    }
  }
  return width;
}

// Edges of one softmax group stacked relation after relation.
struct GroupTerms {
  std::vector<std::size_t> relations;
  std::vector<std::size_t> starts;  // offset of each relation in the stack
  std::vector<std::size_t> segments;
  std::size_t segment_count = 0;
  Var alpha;
  Var source_rows;
};

GroupTerms group_terms(BoundParams& params, const HeteroGraph& graph, const NodeStates& states,
                       const std::vector<std::size_t>& relations, const ModelConfig& config) {
  GroupTerms g;
  g.relations = relations;
  const std::size_t dst_type = graph.relation(relations.front()).destination_type;
  g.segment_count = graph.node_count(dst_type);
  const std::string group = relation_group(graph, relations.front(), config);
  Var weight = params.get(weight_name(states.layer, group));
  if (weight.rows() != states.per_type[dst_type].cols()) {
    throw Error(ErrorKind::shape, "layer " + std::to_string(states.layer) + " weight " + weight.value().shape_string() +
                                      " does not accept inputs of width " +
                                      std::to_string(states.per_type[dst_type].cols()));
  }

  std::map<std::size_t, Var> transformed;
  auto transform = [&](std::size_t type) {
    auto it = transformed.find(type);
    if (it == transformed.end()) it = transformed.emplace(type, matmul(states.per_type[type], weight)).first;
    return it->second;
  };

  std::vector<Var> sources, pairs;
  for (std::size_t r : relations) {
    const RelationType& rel = graph.relation(r);
    g.starts.push_back(g.segments.size());
    const auto& dst = graph.edge_destinations(r);
    g.segments.insert(g.segments.end(), dst.begin(), dst.end());
    Var src_rows = gather_rows(transform(rel.source_type), graph.adjacency(r).sources);
    sources.push_back(src_rows);
    if (config.use_attention) pairs.push_back(concat_cols(gather_rows(transform(rel.destination_type), dst), src_rows));
  }
  g.source_rows = concat_rows(sources);

  if (config.use_attention) {
    Var scores = leaky_relu(matmul(concat_rows(pairs), params.get(attention_name(states.layer, group))),
                            config.leaky_slope);
    g.alpha = segment_softmax(scores, g.segments, g.segment_count);
  } else {
    std::vector<double> degree(g.segment_count, 0.0);
    for (std::size_t s : g.segments) degree[s] += 1.0;
    std::vector<double> alpha(g.segments.size());
    for (std::size_t e = 0; e < alpha.size(); ++e) alpha[e] = 1.0 / degree[g.segments[e]];
    g.alpha = params.tape().constant(DenseMatrix::column(alpha));
  }
  return g;
}

// Relations grouped for softmax normalization, keyed by destination type.
std::vector<std::vector<std::size_t>> softmax_groups(const HeteroGraph& graph, const ModelConfig& config) {
  std::vector<std::vector<std::size_t>> groups;
  if (config.use_relation_typing) {
    for (std::size_t r = 0; r < graph.relation_count(); ++r)
      if (graph.edge_count(r) > 0) groups.push_back({r});
    return groups;
  }
  for (std::size_t t = 0; t < graph.node_type_count(); ++t) {
    std::vector<std::size_t> g;
    for (std::size_t r = 0; r < graph.relation_count(); ++r)
      if (graph.relation(r).destination_type == t && graph.edge_count(r) > 0) g.push_back(r);
    if (!g.empty()) groups.push_back(std::move(g));
  }
  return groups;
}

}  // namespace

ParamStore init_params(const ModelConfig& config, const HeteroGraph& graph, std::size_t input_dim) {
  config.validate();
  if (input_dim == 0) throw Error(ErrorKind::config, "input dimension must be positive");
  ParamStore store(config.seed);
  Rng rng(config.seed);
  std::vector<std::string> groups;
  if (config.use_relation_typing) {
    for (std::size_t r = 0; r < graph.relation_count(); ++r) groups.push_back(graph.relation(r).name);
  } else {
    groups.push_back("shared");
  }
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::size_t d_in = l == 0 ? input_dim : config.hidden;
    const std::size_t d_out = config.hidden;
    for (const auto& g : groups) {
      store.add(weight_name(l, g),
                uniform_matrix(rng, d_in, d_out, std::sqrt(6.0 / static_cast<double>(d_in + d_out))));
      if (config.use_attention) {
        store.add(attention_name(l, g),
                  uniform_matrix(rng, 2 * d_out, 1, std::sqrt(6.0 / static_cast<double>(2 * d_out + 1))));
      }
    }
  }
  const double bound = std::sqrt(6.0 / static_cast<double>(config.hidden + 1));
  store.add("readout.w", uniform_matrix(rng, config.hidden, 1, bound));
  store.add("readout.b", uniform_matrix(rng, 1, 1, bound));
  return store;
}

std::vector<double> decay_factors(const HeteroGraph& graph, std::size_t relation, double rate, double time_unit) {
  if (!(rate >= 0.0)) throw Error(ErrorKind::config, "decay rate must be >= 0");
  if (!(time_unit > 0.0)) throw Error(ErrorKind::config, "decay time unit must be > 0");
  const RelationType& rel = graph.relation(relation);
  const auto& adj = graph.adjacency(relation);
  const auto& dst = graph.edge_destinations(relation);
  const auto& t_src = graph.node_timestamps(rel.source_type);
  const auto& t_dst = graph.node_timestamps(rel.destination_type);
  std::vector<double> out(adj.sources.size());
  for (std::size_t e = 0; e < out.size(); ++e) {
    out[e] = std::exp(-rate * std::abs(t_dst[dst[e]] - t_src[adj.sources[e]]) / time_unit);
  }
  return out;
}

NodeStates input_states(Tape& tape, const HeteroGraph& graph) {
  input_width(graph);
  NodeStates s;
  for (std::size_t t = 0; t < graph.node_type_count(); ++t) s.per_type.push_back(tape.constant(graph.features(t)));
  return s;
}

Var attention_coefficients(BoundParams& params, const HeteroGraph& graph, const NodeStates& states,
                           std::size_t relation, const ModelConfig& config) {
  std::vector<std::size_t> relations{relation};
  if (!config.use_relation_typing) {
    relations.clear();
    for (const auto& g : softmax_groups(graph, config)) {
      if (graph.relation(g.front()).destination_type == graph.relation(relation).destination_type) relations = g;
    }
    if (relations.empty()) relations.push_back(relation);
  }
  if (graph.edge_count(relation) == 0) return params.tape().constant(DenseMatrix(0, 1));
  GroupTerms g = group_terms(params, graph, states, relations, config);
  std::size_t slot = 0;
  while (g.relations[slot] != relation) ++slot;
  std::vector<std::size_t> rows(graph.edge_count(relation));
  for (std::size_t e = 0; e < rows.size(); ++e) rows[e] = g.starts[slot] + e;
  return gather_rows(g.alpha, rows);
}

std::vector<double> attention_coefficients(const HeteroGraph& graph, const std::vector<DenseMatrix>& states,
                                           const ParamStore& params, std::size_t layer, std::size_t relation,
                                           const ModelConfig& config) {
  ParamStore copy = params;
  Tape tape;
  BoundParams bound(tape, copy);
  NodeStates s;
  s.layer = layer;
  for (const auto& m : states) s.per_type.push_back(tape.constant(m));
  Var alpha = attention_coefficients(bound, graph, s, relation, config);
  return {alpha.value().values().begin(), alpha.value().values().end()};
}

NodeStates layer_forward(BoundParams& params, const HeteroGraph& graph, const NodeStates& states,
                         const ModelConfig& config) {
  if (states.per_type.size() != graph.node_type_count()) throw Error(ErrorKind::shape, "states do not match graph");
  std::vector<std::vector<Var>> incoming(graph.node_type_count());
  for (const auto& relations : softmax_groups(graph, config)) {
    GroupTerms g = group_terms(params, graph, states, relations, config);
    Var weights = g.alpha;
    if (config.use_decay) {
      std::vector<double> decay;
      for (std::size_t r : relations) {
        const auto d = decay_factors(graph, r, config.decay_rate, config.decay_time_unit);
        decay.insert(decay.end(), d.begin(), d.end());
      }
      weights = scale_rows(weights, params.tape().constant(DenseMatrix::column(decay)));
    }
    Var aggregate = segment_sum(scale_rows(g.source_rows, weights), g.segments, g.segment_count);
    incoming[graph.relation(relations.front()).destination_type].push_back(aggregate);
  }
  NodeStates next;
  next.layer = states.layer + 1;
  for (std::size_t t = 0; t < graph.node_type_count(); ++t) {
    if (incoming[t].empty()) {
      next.per_type.push_back(params.tape().constant(DenseMatrix(graph.node_count(t), config.hidden)));
      continue;
    }
    Var total = incoming[t].front();
    for (std::size_t i = 1; i < incoming[t].size(); ++i) total = add(total, incoming[t][i]);
    next.per_type.push_back(relu(total));
  }
  return next;
}

Var model_forward(BoundParams& params, const HeteroGraph& graph, const ModelConfig& config) {
  config.validate();
  NodeStates states = input_states(params.tape(), graph);
  for (std::size_t l = 0; l < config.layers; ++l) states = layer_forward(params, graph, states, config);
  Var h = states.per_type[graph.transaction_type()];
  Var logits = add_row(matmul(h, params.get("readout.w")), params.get("readout.b"));
  return clamp(sigmoid(logits), kProbabilityClamp, 1.0 - kProbabilityClamp);
}

std::vector<double> predict(const HeteroGraph& graph, const ParamStore& params, const ModelConfig& config) {
  ParamStore copy = params;
  Tape tape;
  BoundParams bound(tape, copy);
  Var p = model_forward(bound, graph, config);
  return {p.value().values().begin(), p.value().values().end()};
}

ModelDescription describe(const ParamStore& params) {
  ModelDescription d;
  for (const auto& p : params.params()) {
    d.parameters.push_back({p.name, p.value.rows(), p.value.cols()});
    d.total += p.value.size();
  }
  return d;
}

std::string ModelDescription::format() const {
  std::ostringstream out;
  for (const auto& e : parameters) {
    out << e.name << " " << e.rows << "x" << e.cols << " " << e.rows * e.cols << "\n";
  }
  out << "total parameters " << total << "\n";
  return out.str();
}

}  // namespace hetfraud
