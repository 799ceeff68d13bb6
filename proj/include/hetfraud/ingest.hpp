#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hetfraud/config.hpp"
#include "hetfraud/matrix.hpp"

namespace hetfraud {

enum class CellKind { missing, numeric, text };

struct Cell {
  CellKind kind = CellKind::missing;
  double number = 0.0;
  std::string text;  // original text, kept for numeric cells too

  static Cell parse(std::string text);
  bool missing() const noexcept { return kind == CellKind::missing; }
};

struct RawTable {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  std::size_t row_count() const noexcept { return rows.size(); }
  std::optional<std::size_t> find_column(const std::string& name) const;
  std::size_t column(const std::string& name) const;  // schema error if absent
  RawTable select_rows(const std::vector<std::size_t>& indices) const;
};

enum class ColumnRole { numeric, categorical, drop };

struct SchemaConfig {
  std::string id_column = "TransactionID";
  std::string label_column = "isFraud";
  std::string time_column = "TransactionDT";
  // Explicit roles; columns not listed are inferred (numeric when every
  // observed cell parses as a number, categorical otherwise).
  std::map<std::string, ColumnRole> roles;
  std::vector<std::string> user_key = {"card1", "addr1"};
  std::vector<std::string> merchant_key = {"ProductCD", "R_emaildomain"};

  // Feature columns in table order with their resolved roles (drops removed).
  std::vector<std::pair<std::string, ColumnRole>> feature_columns(const RawTable& table) const;
};

enum class ImputeStrategy { mean, knn };
enum class EncodeMethod { target, frequency };

struct ImputeOptions {
  ImputeStrategy strategy = ImputeStrategy::mean;
  long long k = 5;
  double missing_drop_threshold = 0.9;
};

struct NumericColumnState {
  std::string name;
  double mean = 0.0;
  double missing_fraction = 0.0;
  bool dropped = false;
};

struct ImputerState {
  ImputeStrategy strategy = ImputeStrategy::mean;
  std::size_t k = 0;
  std::vector<NumericColumnState> columns;
  // Complete training rows over the retained numeric columns (knn only).
  DenseMatrix reference_rows;
  std::vector<std::string> warnings;
  bool fitted = false;
};

struct CategoryEncoding {
  std::string column;
  std::map<std::string, double> values;
  double fallback = 0.0;
};

struct CategoryEncoderState {
  EncodeMethod method = EncodeMethod::frequency;
  double prior = 10.0;
  std::vector<CategoryEncoding> columns;
  // FNV-1a over the ids of the rows the encoders were fitted on.
  std::uint64_t training_fingerprint = 0;
  std::size_t training_rows = 0;
  bool fitted = false;
};

struct EncoderState {
  ImputerState imputer;
  CategoryEncoderState categories;

  bool fitted() const noexcept { return imputer.fitted && categories.fitted; }
};

// Transactions by features, plus the per-row bookkeeping graph
// construction needs.
struct FeatureTable {
  std::vector<std::string> ids;
  std::vector<std::string> feature_names;
  DenseMatrix features;
  std::vector<int> labels;
  std::vector<double> timestamps;
  std::vector<std::string> user_keys;
  std::vector<std::string> merchant_keys;

  std::size_t row_count() const noexcept { return ids.size(); }
  // Throws a data error on ragged columns, non-binary labels or missing values.
  void validate() const;
  FeatureTable select_rows(const std::vector<std::size_t>& indices) const;
  FeatureTable append(const FeatureTable& other) const;
};

struct TimeOrigin {
  int weekday = 0;          // Monday = 0
  long long second_of_day = 0;

  // "YYYY-MM-DD HH:MM[:SS]"; the default origin is a Monday at midnight.
  static TimeOrigin parse(const std::string& text);
};

struct TimeFeatures {
  std::vector<int> hour;
  std::vector<int> day_of_week;
};

// Left join of the transaction table with the optional identity table on
// the id column.
RawTable load_tables(const std::filesystem::path& transaction_path,
                     const std::optional<std::filesystem::path>& identity_path, const SchemaConfig& schema);

ImputerState fit_imputer(const RawTable& table, const ImputeOptions& options, const SchemaConfig& schema);

TimeFeatures derive_time_features(const std::vector<double>& timestamps, const TimeOrigin& origin);

CategoryEncoderState fit_encoders(const RawTable& table, const std::vector<int>& labels, EncodeMethod method,
                                  double smoothing_prior, const SchemaConfig& schema);

std::vector<int> extract_labels(const RawTable& table, const SchemaConfig& schema);

FeatureTable transform(const RawTable& table, const EncoderState& state, const SchemaConfig& schema,
                       const TimeOrigin& origin);

// CSV layout: transaction_id,label,timestamp,user_key,merchant_key,<features>.
void write_feature_table(const FeatureTable& table, const std::filesystem::path& path);
FeatureTable read_feature_table(const std::filesystem::path& path);

// Sidecar describing column roles and fitted encoder summaries.
void write_feature_metadata(const FeatureTable& table, const EncoderState& state,
                            const std::filesystem::path& path);

struct IngestSettings {
  std::filesystem::path transaction_path;
  std::optional<std::filesystem::path> identity_path;
  std::filesystem::path output_path = "features.csv";
  SchemaConfig schema;
  ImputeOptions impute;
  EncodeMethod encode = EncodeMethod::target;
  double encode_prior = 10.0;
  std::string time_origin = "2017-12-04 00:00:00";
  // Encoders are fitted on the training split drawn with these settings so
  // that train later sees the same partition.
  std::vector<double> split_fractions = {0.7, 0.15, 0.15};
  std::uint64_t seed = 42;

  static IngestSettings from_config(const KeyValueConfig& cfg);
};

struct IngestResult {
  FeatureTable table;
  EncoderState state;
};

// load -> fit (training split) -> transform over every row.
IngestResult run_ingest(const IngestSettings& settings);

}  // namespace hetfraud
