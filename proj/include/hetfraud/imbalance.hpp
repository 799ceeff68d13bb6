#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hetfraud/config.hpp"
#include "hetfraud/heterograph.hpp"
#include "hetfraud/matrix.hpp"

namespace hetfraud {

enum class ResampleMethod { none, smote, undersample, cost_sensitive, smote_plus_cost };

std::string to_string(ResampleMethod method);
ResampleMethod parse_resample_method(const std::string& text);
bool uses_smote(ResampleMethod method);
bool uses_class_weights(ResampleMethod method);

struct ResampleConfig {
  ResampleMethod method = ResampleMethod::none;
  std::size_t smote_k = 5;
  // minority / majority count after resampling.
  double target_ratio = 0.5;
  std::uint64_t seed = 42;

  void validate() const;
};

struct SmoteProvenance {
  std::size_t base = 0;
  std::size_t neighbor = 0;
  double gap = 0.0;
};

struct SmoteResult {
  DenseMatrix rows;
  std::vector<SmoteProvenance> provenance;
};

// Indices (into rows) of the k nearest other rows of `row`, by Euclidean
// distance with ties broken by index.
std::vector<std::size_t> nearest_neighbors(const DenseMatrix& rows, std::size_t row, std::size_t k);

// Each synthetic row is x_base + g * (x_neighbor - x_base), base drawn
// round-robin over a seeded shuffle, neighbor uniform among the k nearest.
// forced_gap replaces the uniform g draw (tests).
SmoteResult smote(const DenseMatrix& minority, std::size_t k, std::size_t n_synthetic, std::uint64_t seed,
                  std::optional<double> forced_gap = std::nullopt);

// Synthetic count that lifts the minority to ratio * majority.
std::size_t smote_target_count(std::size_t minority, std::size_t majority, double ratio);

// Adds one positive transaction per synthetic row. Provenance indices refer
// to transaction nodes; each new node copies its base node's edges and gets
// timestamp (1 - g) * t_base + g * t_neighbor.
HeteroGraph attach_synthetic_nodes(const HeteroGraph& graph, const DenseMatrix& rows,
                                   const std::vector<SmoteProvenance>& provenance);

struct UndersampleResult {
  std::vector<std::size_t> kept;  // indices into labels, ascending
  bool changed = false;
  std::string notice;
};

UndersampleResult undersample(const std::vector<int>& labels, double target_ratio, std::uint64_t seed);

struct ClassWeights {
  double negative = 1.0;
  double positive = 1.0;

  double of(int label) const noexcept { return label == 1 ? positive : negative; }
};

// w_c = N / (2 N_c).
ClassWeights class_weights(const std::vector<int>& labels);

void write_provenance_csv(const std::vector<SmoteProvenance>& provenance, const std::filesystem::path& path);

}  // namespace hetfraud
