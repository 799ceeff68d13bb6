#include "hetfraud/experiment.hpp"

#include "hetfraud/error.hpp"

namespace hetfraud {

const Metrics& ExperimentResult::split_metrics(const std::string& name) const {
  for (const auto& row : metrics)
    if (row.split == name) return row.metrics;
  throw Error(ErrorKind::metric, "no metrics for split '" + name + "'");
}

HeteroGraph prepare_graph(const FeatureTable& table, const Standardizer& normalizer, bool transaction_self) {
  FeatureTable scaled = table;
  normalizer.apply(scaled.features);
  return build_graph(scaled, RelationConfig{transaction_self}).first;
}

ExperimentResult run_experiment(const FeatureTable& table, const ModelConfig& model, const TrainConfig& config,
                                const std::string& method_label) {
  config.validate();
  ExperimentResult r;
  r.split = stratified_split(table.labels, config.fractions, config.seed);
  r.normalizer = config.standardize ? Standardizer::fit(table.features, r.split.train)
                                    : Standardizer::identity(table.features.cols());
  r.graph = prepare_graph(table, r.normalizer, config.transaction_self);
  r.trained = train(r.graph, model, config, r.split);
  r.probabilities = predict(r.graph, r.trained.params, model);
  const std::string method = method_label.empty() ? to_string(config.imbalance.method) : method_label;
  const std::pair<const char*, const std::vector<std::size_t>*> parts[] = {
      {"train", &r.split.train}, {"val", &r.split.val}, {"test", &r.split.test}};
  for (const auto& [name, idx] : parts) {
    if (idx->empty()) continue;
    std::vector<double> p;
    std::vector<int> y;
    for (std::size_t i : *idx) {
      p.push_back(r.probabilities[i]);
      y.push_back(table.labels[i]);
    }
    r.metrics.push_back({name, method, compute_metrics(p, y)});
  }
  return r;
}

Checkpoint make_checkpoint(const ExperimentResult& result, const ModelConfig& model, const TrainConfig& config) {
  Checkpoint ck;
  config.echo(ck.config);
  model.echo(ck.config);
  ck.normalizer = result.normalizer;
  ck.params = result.trained.params;
  return ck;
}

}  // namespace hetfraud
