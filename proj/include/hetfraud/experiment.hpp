#pragma once

#include <string>
#include <vector>

#include "hetfraud/heterograph.hpp"
#include "hetfraud/ingest.hpp"
#include "hetfraud/model.hpp"
#include "hetfraud/split.hpp"
#include "hetfraud/train.hpp"

namespace hetfraud {

struct ExperimentResult {
  Split split;
  Standardizer normalizer;
  HeteroGraph graph;  // standardized, un-resampled
  TrainResult trained;
  std::vector<double> probabilities;  // per transaction row of the input table
  std::vector<MetricsRow> metrics;    // one row per non-empty split

  const Metrics& split_metrics(const std::string& name) const;
};

// split -> standardize on train rows -> build graph -> train -> evaluate.
ExperimentResult run_experiment(const FeatureTable& table, const ModelConfig& model, const TrainConfig& config,
                                const std::string& method_label = "");

// Standardize with a stored normalizer and build the scoring graph.
HeteroGraph prepare_graph(const FeatureTable& table, const Standardizer& normalizer, bool transaction_self);

Checkpoint make_checkpoint(const ExperimentResult& result, const ModelConfig& model, const TrainConfig& config);

}  // namespace hetfraud
