#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hetfraud/config.hpp"
#include "hetfraud/ingest.hpp"

namespace hetfraud {

struct SynthConfig {
  std::size_t n_users = 200;
  std::size_t n_merchants = 50;
  std::size_t n_transactions = 2000;
  double fraud_ratio = 0.05;
  std::size_t n_rings = 4;
  std::size_t ring_users = 3;
  std::size_t ring_merchants = 2;
  double burst_width = 6.0 * 3600.0;
  std::size_t feature_dim = 16;
  double fraud_shift = 1.5;
  double horizon = 30.0 * 86400.0;
  double zipf_exponent = 1.1;
  std::uint64_t seed = 42;

  // round(fraud_ratio * n_transactions)
  std::size_t fraud_count() const;
  // Throws a data error describing the first infeasible setting.
  void validate() const;
  static SynthConfig from_config(const KeyValueConfig& cfg);
  void echo(KeyValueConfig& cfg) const;
};

struct RingInfo {
  std::size_t id = 0;
  std::vector<std::size_t> users;
  std::vector<std::size_t> merchants;
  double burst_center = 0.0;
  std::size_t fraud_count = 0;
};

// Ring layout and shifted dimensions; shared by generate() and describe().
struct SynthLayout {
  std::vector<RingInfo> rings;
  std::vector<std::size_t> shifted_dims;
  // Popularity rank -> node index.
  std::vector<std::size_t> user_by_rank;
  std::vector<std::size_t> merchant_by_rank;
};

SynthLayout synth_layout(const SynthConfig& config);

struct SynthOutput {
  FeatureTable table;
  // Ring id per row, -1 for legitimate transactions.
  std::vector<int> ring;
  SynthLayout layout;
};

SynthOutput generate(const SynthConfig& config);

struct SynthDescription {
  std::size_t transactions = 0;
  std::size_t fraud = 0;
  double mean_transactions_per_user = 0.0;
  double mean_transactions_per_merchant = 0.0;
  double bipartite_density = 0.0;
  std::vector<std::size_t> shifted_dims;
  std::vector<RingInfo> rings;

  std::string format() const;
};

SynthDescription describe(const SynthConfig& config);

void write_ring_csv(const SynthOutput& output, const std::filesystem::path& path);

}  // namespace hetfraud
