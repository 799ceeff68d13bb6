#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "hetfraud/config.hpp"
#include "hetfraud/heterograph.hpp"
#include "hetfraud/imbalance.hpp"
#include "hetfraud/model.hpp"
#include "hetfraud/params.hpp"
#include "hetfraud/split.hpp"

namespace hetfraud {

enum class OptimizerKind { adam, sgd };

struct TrainConfig {
  std::size_t epochs = 50;
  double learning_rate = 0.005;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 42;
  std::array<double, 3> fractions = {0.7, 0.15, 0.15};
  double probability_clamp = kProbabilityClamp;
  ResampleConfig imbalance;
  // 0 disables early stopping.
  std::size_t patience = 0;
  // z-score features with training-split statistics before graph build.
  bool standardize = true;
  // Wall time per epoch in the loss curve; off keeps curves byte-stable.
  bool record_timing = false;
  // Class weights from the resampled training set rather than the original.
  bool weights_after_resample = true;
  bool transaction_self = false;

  void validate() const;
  static TrainConfig from_config(const KeyValueConfig& cfg);
  void echo(KeyValueConfig& cfg) const;
};

struct LossRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN without a validation split
  double seconds = 0.0;   // NaN unless timing is recorded
};

struct LossCurve {
  std::vector<LossRecord> records;
};

struct Metrics {
  double accuracy = 0.0;
  double auc_roc = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

// -sum(y ln p + (1 - y) ln(1 - p)).
double cross_entropy(std::span<const double> probabilities, std::span<const int> labels);
// -sum w (y ln p + (1 - y) ln(1 - p)), same summation order as above.
double weighted_bce(std::span<const double> probabilities, std::span<const int> labels,
                    std::span<const double> weights);
std::vector<double> sample_weights(std::span<const int> labels, const ClassWeights& weights);

// Mann-Whitney statistic with average ranks for ties.
double auc_roc(std::span<const double> scores, std::span<const int> labels);
// Probability >= 0.5 classifies positive.
Metrics compute_metrics(std::span<const double> probabilities, std::span<const int> labels);

struct TrainResult {
  ParamStore params;
  LossCurve curve;
  std::vector<SmoteProvenance> provenance;
  ClassWeights weights;
  std::size_t training_nodes = 0;
  std::vector<std::string> notices;
  std::size_t best_epoch = 0;
};

// Full-graph training on split.train, validation loss on split.val of the
// unmodified graph.
TrainResult train(const HeteroGraph& graph, const ModelConfig& model, const TrainConfig& config, const Split& split);

Metrics evaluate(const ParamStore& params, const HeteroGraph& graph, const ModelConfig& model,
                 const std::vector<std::size_t>& indices);

void write_loss_curve(const LossCurve& curve, std::ostream& out);
void export_loss_curve(const LossCurve& curve, const std::filesystem::path& path);
LossCurve read_loss_curve(const std::filesystem::path& path);

struct MetricsRow {
  std::string split;
  std::string method;
  Metrics metrics;
};

void write_metrics(const std::vector<MetricsRow>& rows, std::ostream& out);
void export_metrics(const std::vector<MetricsRow>& rows, const std::filesystem::path& path);

// Per-column z-score; constant columns keep scale 1.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const DenseMatrix& features, const std::vector<std::size_t>& rows);
  static Standardizer identity(std::size_t cols);
  void apply(DenseMatrix& features) const;
};

// Text checkpoint:
//   hetfraud-checkpoint 1
//   [config]     key = value lines
//   [normalizer] "mean ..." and "scale ..." lines
//   [params]     parameter store text format
struct Checkpoint {
  KeyValueConfig config;
  Standardizer normalizer;
  ParamStore params;

  ModelConfig model_config() const;
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

}  // namespace hetfraud
