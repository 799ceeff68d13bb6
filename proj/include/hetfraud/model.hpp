#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hetfraud/config.hpp"
#include "hetfraud/heterograph.hpp"
#include "hetfraud/params.hpp"
#include "hetfraud/tape.hpp"

namespace hetfraud {

struct ModelConfig {
  std::size_t layers = 2;
  std::size_t hidden = 64;
  // Attenuation rate per decay_time_unit seconds.
  double decay_rate = 0.01;
  double decay_time_unit = 86400.0;
  bool use_attention = true;
  bool use_relation_typing = true;
  bool use_decay = true;
  double leaky_slope = 0.2;
  std::uint64_t seed = 42;

  void validate() const;
  static ModelConfig from_config(const KeyValueConfig& cfg);
  static ModelConfig from_config(const KeyValueConfig& cfg, const ModelConfig& defaults);
  void echo(KeyValueConfig& cfg) const;
};

inline constexpr double kProbabilityClamp = 1e-12;

// Current representation of every node type on a tape.
struct NodeStates {
  std::vector<Var> per_type;
  std::size_t layer = 0;
};

// Caches one tape leaf per parameter so shared weights enter the tape once.
class BoundParams {
 public:
  BoundParams(Tape& tape, ParamStore& store) : tape_(tape), store_(store) {}
  Var get(const std::string& name);
  Tape& tape() noexcept { return tape_; }

 private:
  Tape& tape_;
  ParamStore& store_;
  std::map<std::string, Var> cache_;
};

std::string weight_name(std::size_t layer, const std::string& group);
std::string attention_name(std::size_t layer, const std::string& group);
// Parameter group of relation r: its own name, or "shared" without typing.
std::string relation_group(const HeteroGraph& graph, std::size_t relation, const ModelConfig& config);

// Uniform in +-sqrt(6 / (fan_in + fan_out)) per matrix, drawn in
// registration order from the config seed.
ParamStore init_params(const ModelConfig& config, const HeteroGraph& graph, std::size_t input_dim);

// exp(-rate * |t_v - t_u| / time_unit) per edge of relation r, CSR order.
// Underflows to 0 once the exponent passes about 745.
std::vector<double> decay_factors(const HeteroGraph& graph, std::size_t relation, double rate, double time_unit);

NodeStates input_states(Tape& tape, const HeteroGraph& graph);

// Per-edge attention of relation r (CSR order) at the given layer. Without
// relation typing the softmax runs over all incoming edges of the
// destination type.
Var attention_coefficients(BoundParams& params, const HeteroGraph& graph, const NodeStates& states,
                           std::size_t relation, const ModelConfig& config);
std::vector<double> attention_coefficients(const HeteroGraph& graph, const std::vector<DenseMatrix>& states,
                                           const ParamStore& params, std::size_t layer, std::size_t relation,
                                           const ModelConfig& config);

// h_v' = ReLU(sum_r sum_{u in N_r(v)} decay * alpha * (h_u W_r))
NodeStates layer_forward(BoundParams& params, const HeteroGraph& graph, const NodeStates& states,
                         const ModelConfig& config);

// Fraud probability per transaction node (column), clamped to
// [1e-12, 1 - 1e-12].
Var model_forward(BoundParams& params, const HeteroGraph& graph, const ModelConfig& config);
std::vector<double> predict(const HeteroGraph& graph, const ParamStore& params, const ModelConfig& config);

struct ModelDescription {
  struct Entry {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
  };
  std::vector<Entry> parameters;
  std::size_t total = 0;

  std::string format() const;
};

ModelDescription describe(const ParamStore& params);

}  // namespace hetfraud
