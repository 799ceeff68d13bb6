#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hetfraud/gradcheck.hpp"
#include "hetfraud/heterograph.hpp"
#include "hetfraud/model.hpp"

namespace hetfraud {

struct RandomGraphOptions {
  std::size_t max_nodes = 50;
  std::size_t feature_dim = 4;
  // user -makes-> transaction / made_by
  bool users = true;
  // transaction -at-> merchant / hosts
  bool merchants = false;
  // symmetric transaction -shares_device- transaction
  bool devices = true;
  double time_span = 10.0 * 86400.0;
};

// Random labelled graph with both classes among transactions; total node
// count never exceeds max_nodes.
HeteroGraph random_graph(std::uint64_t seed, const RandomGraphOptions& options = {});

// Inverse-frequency weighted cross-entropy of the full model over all
// transaction nodes, checked against central differences.
GradCheckReport model_gradcheck(const HeteroGraph& graph, const ModelConfig& config, double step = 1e-5,
                                double tolerance = 1e-5);

struct NamedReport {
  std::string name;
  GradCheckReport report;
};

// One check per tape primitive on random inputs in [-2, 2].
std::vector<NamedReport> primitive_gradchecks(std::uint64_t seed, double step = 1e-5, double tolerance = 1e-5);

}  // namespace hetfraud
