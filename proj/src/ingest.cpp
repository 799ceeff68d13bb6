#include "hetfraud/ingest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "hetfraud/csv.hpp"
#include "hetfraud/error.hpp"
#include "hetfraud/split.hpp"
#include "hetfraud/text.hpp"

namespace hetfraud {

namespace {

constexpr const char* kMissingCategory = "<missing>";
constexpr char kKeySeparator = '|';

RawTable to_raw(const CsvDocument& doc) {
  RawTable t;
  t.columns = doc.header;
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (t.columns[i] == t.columns[j]) throw Error(ErrorKind::schema, "duplicate column " + t.columns[i]);
    }
  }
  t.rows.reserve(doc.rows.size());
  for (const auto& r : doc.rows) {
    std::vector<Cell> cells;
    cells.reserve(r.size());
    for (const auto& c : r) cells.push_back(Cell::parse(c));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

std::string category_of(const Cell& c) { return c.missing() ? std::string(kMissingCategory) : c.text; }

std::uint64_t fingerprint_ids(const RawTable& table, std::size_t id_col) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& row : table.rows) {
    for (char ch : row[id_col].text) {
      h ^= static_cast<unsigned char>(ch);
      h *= 1099511628211ULL;
    }
    h ^= '\n';
    h *= 1099511628211ULL;
  }
  return h;
}

std::string role_name(ColumnRole r) {
  switch (r) {
    case ColumnRole::numeric: return "numeric";
    case ColumnRole::categorical: return "categorical";
    case ColumnRole::drop: return "drop";
  }
  return "?";
}

}  // namespace

Cell Cell::parse(std::string text) {
  Cell c;
  const auto body = trim(text);
  if (body.empty()) return c;
  double v = 0.0;
  if (try_parse_double(body, v) && std::isfinite(v)) {
    c.kind = CellKind::numeric;
    c.number = v;
  } else {
    c.kind = CellKind::text;
  }
  c.text = std::string(body);
  return c;
}

std::optional<std::size_t> RawTable::find_column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return i;
  return std::nullopt;
}

std::size_t RawTable::column(const std::string& name) const {
  const auto c = find_column(name);
  if (!c) throw Error(ErrorKind::schema, "missing column " + name);
  return *c;
}

RawTable RawTable::select_rows(const std::vector<std::size_t>& indices) const {
  RawTable t;
  t.columns = columns;
  t.rows.reserve(indices.size());
  for (std::size_t i : indices) t.rows.push_back(rows.at(i));
  return t;
}

std::vector<std::pair<std::string, ColumnRole>> SchemaConfig::feature_columns(const RawTable& table) const {
  std::vector<std::pair<std::string, ColumnRole>> out;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    const auto& name = table.columns[c];
    if (name == id_column || name == label_column || name == time_column) continue;
    ColumnRole role = ColumnRole::numeric;
    if (const auto it = roles.find(name); it != roles.end()) {
      role = it->second;
    } else {
      for (const auto& row : table.rows) {
        if (row[c].kind == CellKind::text) {
          role = ColumnRole::categorical;
          break;
        }
      }
    }
    if (role != ColumnRole::drop) out.emplace_back(name, role);
  }
  return out;
}

RawTable load_tables(const std::filesystem::path& transaction_path,
                     const std::optional<std::filesystem::path>& identity_path, const SchemaConfig& schema) {
  RawTable table = to_raw(read_csv(transaction_path));
  table.column(schema.id_column);
  table.column(schema.label_column);
  table.column(schema.time_column);
  if (!identity_path) return table;

  RawTable identity = to_raw(read_csv(*identity_path));
  const std::size_t id_right = identity.column(schema.id_column);
  const std::size_t id_left = table.column(schema.id_column);

  std::vector<std::size_t> extra;
  for (std::size_t c = 0; c < identity.columns.size(); ++c) {
    if (c == id_right) continue;
    if (table.find_column(identity.columns[c])) {
      throw Error(ErrorKind::schema, "identity column " + identity.columns[c] + " collides with a transaction column");
    }
    extra.push_back(c);
    table.columns.push_back(identity.columns[c]);
  }
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t r = 0; r < identity.rows.size(); ++r) {
    const auto& key = identity.rows[r][id_right].text;
    if (!by_id.emplace(key, r).second) throw Error(ErrorKind::parse, "duplicate identity id " + key);
  }
  for (auto& row : table.rows) {
    const auto it = by_id.find(row[id_left].text);
    for (std::size_t c : extra) row.push_back(it == by_id.end() ? Cell{} : identity.rows[it->second][c]);
  }
  return table;
}

ImputerState fit_imputer(const RawTable& table, const ImputeOptions& options, const SchemaConfig& schema) {
  if (options.strategy == ImputeStrategy::knn && options.k <= 0) {
    throw Error(ErrorKind::config, "knn imputation needs k > 0");
  }
  ImputerState state;
  state.strategy = options.strategy;
  state.k = options.strategy == ImputeStrategy::knn ? static_cast<std::size_t>(options.k) : 0;

  std::vector<std::size_t> kept;
  for (const auto& [name, role] : schema.feature_columns(table)) {
    if (role != ColumnRole::numeric) continue;
    const std::size_t c = table.column(name);
    NumericColumnState col;
    col.name = name;
    double total = 0.0;
    std::size_t observed = 0;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const Cell& cell = table.rows[r][c];
      if (cell.kind == CellKind::text) {
        throw Error(ErrorKind::data, "numeric column " + name + " has text '" + cell.text + "' at row " +
                                         std::to_string(r + 1));
      }
      if (cell.kind == CellKind::numeric) {
        total += cell.number;
        ++observed;
      }
    }
    const std::size_t n = table.rows.size();
    col.missing_fraction = n == 0 ? 1.0 : static_cast<double>(n - observed) / static_cast<double>(n);
    if (observed == 0) {
      col.dropped = true;
      state.warnings.push_back("column " + name + " has no observed values; dropped");
    } else if (col.missing_fraction > options.missing_drop_threshold) {
      col.dropped = true;
      state.warnings.push_back("column " + name + " missing fraction " + format_double(col.missing_fraction) +
                               " exceeds threshold; dropped");
    } else {
      col.mean = total / static_cast<double>(observed);
      kept.push_back(c);
    }
    state.columns.push_back(col);
  }

  if (options.strategy == ImputeStrategy::knn) {
    std::vector<double> values;
    std::size_t complete = 0;
    for (const auto& row : table.rows) {
      if (std::all_of(kept.begin(), kept.end(), [&](std::size_t c) { return !row[c].missing(); })) {
        for (std::size_t c : kept) values.push_back(row[c].number);
        ++complete;
      }
    }
    if (state.k > complete) {
      throw Error(ErrorKind::config, "knn k = " + std::to_string(state.k) + " exceeds the " +
                                         std::to_string(complete) + " complete rows");
    }
    state.reference_rows = DenseMatrix(complete, kept.size(), std::move(values));
  }
  state.fitted = true;
  return state;
}

TimeOrigin TimeOrigin::parse(const std::string& text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char sep = ' ';
  const int n = std::sscanf(text.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &d, &sep, &h, &mi, &s);
  using namespace std::chrono;
  const year_month_day date{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if ((n != 3 && n < 6) || !date.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 59) {
    throw Error(ErrorKind::config, "time_origin must look like YYYY-MM-DD HH:MM:SS, got '" + text + "'");
  }
  TimeOrigin o;
  o.weekday = static_cast<int>(std::chrono::weekday{sys_days{date}}.iso_encoding()) - 1;
  o.second_of_day = n >= 6 ? h * 3600LL + mi * 60LL + s : 0;
  return o;
}

TimeFeatures derive_time_features(const std::vector<double>& timestamps, const TimeOrigin& origin) {
  TimeFeatures out;
  out.hour.reserve(timestamps.size());
  out.day_of_week.reserve(timestamps.size());
  constexpr long long kWeek = 7 * 86400LL;
  for (std::size_t i = 0; i < timestamps.size(); ++i) {
    const double t = timestamps[i];
    if (!std::isfinite(t) || t < 0.0) {
      throw Error(ErrorKind::data, "timestamp at row " + std::to_string(i + 1) + " is negative or non-finite");
    }
    const long long whole = static_cast<long long>(std::floor(std::fmod(t, static_cast<double>(kWeek))));
    const long long s = (origin.weekday * 86400LL + origin.second_of_day + whole) % kWeek;
    out.hour.push_back(static_cast<int>((s / 3600) % 24));
    out.day_of_week.push_back(static_cast<int>(s / 86400));
  }
  return out;
}

std::vector<int> extract_labels(const RawTable& table, const SchemaConfig& schema) {
  const std::size_t c = table.column(schema.label_column);
  std::vector<int> labels;
  labels.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const Cell& cell = table.rows[r][c];
    if (cell.kind != CellKind::numeric || (cell.number != 0.0 && cell.number != 1.0)) {
      throw Error(ErrorKind::data, "label at row " + std::to_string(r + 1) + " is not 0/1");
    }
    labels.push_back(static_cast<int>(cell.number));
  }
  return labels;
}

CategoryEncoderState fit_encoders(const RawTable& table, const std::vector<int>& labels, EncodeMethod method,
                                  double smoothing_prior, const SchemaConfig& schema) {
  if (table.rows.empty()) throw Error(ErrorKind::config, "cannot fit encoders on an empty table");
  if (labels.size() != table.rows.size()) throw Error(ErrorKind::config, "labels not aligned with rows");
  if (!(smoothing_prior >= 0.0)) throw Error(ErrorKind::config, "encode_prior must be non-negative");

  CategoryEncoderState state;
  state.method = method;
  state.prior = smoothing_prior;
  state.training_rows = table.rows.size();
  state.training_fingerprint = fingerprint_ids(table, table.column(schema.id_column));

  const double n = static_cast<double>(table.rows.size());
  const double global_mean =
      static_cast<double>(std::accumulate(labels.begin(), labels.end(), 0LL)) / n;

  for (const auto& [name, role] : schema.feature_columns(table)) {
    if (role != ColumnRole::categorical) continue;
    const std::size_t c = table.column(name);
    std::map<std::string, std::pair<double, double>> stats;  // count, positives
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      auto& s = stats[category_of(table.rows[r][c])];
      s.first += 1.0;
      s.second += labels[r];
    }
    CategoryEncoding enc;
    enc.column = name;
    for (const auto& [cat, s] : stats) {
      const auto [count, positives] = s;
      enc.values[cat] = method == EncodeMethod::frequency
                            ? count / n
                            : (positives + smoothing_prior * global_mean) / (count + smoothing_prior);
    }
    enc.fallback = method == EncodeMethod::frequency ? 0.0 : global_mean;
    state.columns.push_back(std::move(enc));
  }
  state.fitted = true;
  return state;
}

FeatureTable transform(const RawTable& table, const EncoderState& state, const SchemaConfig& schema,
                       const TimeOrigin& origin) {
  if (!state.fitted()) throw Error(ErrorKind::config, "transform needs a fitted encoder state");

  FeatureTable out;
  const std::size_t id_col = table.column(schema.id_column);
  const std::size_t time_col = table.column(schema.time_column);
  std::vector<std::size_t> user_cols, merchant_cols;
  for (const auto& c : schema.user_key) user_cols.push_back(table.column(c));
  for (const auto& c : schema.merchant_key) merchant_cols.push_back(table.column(c));

  std::vector<std::size_t> numeric_cols;
  std::vector<double> means;
  for (const auto& col : state.imputer.columns) {
    if (col.dropped) continue;
    numeric_cols.push_back(table.column(col.name));
    means.push_back(col.mean);
    out.feature_names.push_back(col.name);
  }
  std::vector<std::size_t> cat_cols;
  for (const auto& enc : state.categories.columns) {
    cat_cols.push_back(table.column(enc.column));
    out.feature_names.push_back(enc.column);
  }
  out.feature_names.push_back("hour");
  out.feature_names.push_back("day_of_week");

  out.labels = extract_labels(table, schema);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const Cell& t = table.rows[r][time_col];
    if (t.kind != CellKind::numeric) {
      throw Error(ErrorKind::data, "timestamp at row " + std::to_string(r + 1) + " is missing or not numeric");
    }
    out.timestamps.push_back(t.number);
  }
  const TimeFeatures time = derive_time_features(out.timestamps, origin);

  const DenseMatrix& ref = state.imputer.reference_rows;
  const std::size_t width = out.feature_names.size();
  out.features = DenseMatrix(table.rows.size(), width);
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    auto dst = out.features.row(r);
    bool any_missing = false;
    for (std::size_t j = 0; j < numeric_cols.size(); ++j) {
      const Cell& cell = row[numeric_cols[j]];
      if (cell.kind == CellKind::text) {
        throw Error(ErrorKind::data, "numeric column " + out.feature_names[j] + " has text at row " +
                                         std::to_string(r + 1));
      }
      any_missing = any_missing || cell.missing();
      dst[j] = cell.missing() ? means[j] : cell.number;
    }
    if (any_missing && state.imputer.strategy == ImputeStrategy::knn) {
      // Euclidean distance over the columns this row observes; ties by reference row index.
      dist.clear();
      for (std::size_t k = 0; k < ref.rows(); ++k) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < numeric_cols.size(); ++j) {
          if (row[numeric_cols[j]].missing()) continue;
          const double diff = row[numeric_cols[j]].number - ref(k, j);
          d2 += diff * diff;
        }
        dist.emplace_back(d2, k);
      }
      const std::size_t k = std::min(state.imputer.k, dist.size());
      std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
      for (std::size_t j = 0; j < numeric_cols.size(); ++j) {
        if (!row[numeric_cols[j]].missing() || k == 0) continue;
        double s = 0.0;
        for (std::size_t q = 0; q < k; ++q) s += ref(dist[q].second, j);
        dst[j] = s / static_cast<double>(k);
      }
    }
    for (std::size_t j = 0; j < cat_cols.size(); ++j) {
      const auto& enc = state.categories.columns[j];
      const auto it = enc.values.find(category_of(row[cat_cols[j]]));
      dst[numeric_cols.size() + j] = it == enc.values.end() ? enc.fallback : it->second;
    }
    dst[width - 2] = time.hour[r];
    dst[width - 1] = time.day_of_week[r];

    auto key = [&](const std::vector<std::size_t>& cols) {
      std::string k;
      for (std::size_t i = 0; i < cols.size(); ++i) {
        if (i) k += kKeySeparator;
        k += row[cols[i]].text;
      }
      return k;
    };
    out.ids.push_back(row[id_col].text);
    out.user_keys.push_back(key(user_cols));
    out.merchant_keys.push_back(key(merchant_cols));
  }
  out.validate();
  return out;
}

void FeatureTable::validate() const {
  const std::size_t n = ids.size();
  if (labels.size() != n || timestamps.size() != n || user_keys.size() != n || merchant_keys.size() != n ||
      features.rows() != n || features.cols() != feature_names.size()) {
    throw Error(ErrorKind::data, "feature table columns have inconsistent lengths");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw Error(ErrorKind::data, "label not 0/1 at row " + std::to_string(i + 1));
    if (!std::isfinite(timestamps[i])) throw Error(ErrorKind::data, "non-finite timestamp at row " + std::to_string(i + 1));
  }
  if (!features.all_finite()) throw Error(ErrorKind::data, "feature matrix has missing or non-finite entries");
}

FeatureTable FeatureTable::select_rows(const std::vector<std::size_t>& indices) const {
  FeatureTable t;
  t.feature_names = feature_names;
  t.features = DenseMatrix(indices.size(), features.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t r = indices[i];
    t.ids.push_back(ids.at(r));
    t.labels.push_back(labels[r]);
    t.timestamps.push_back(timestamps[r]);
    t.user_keys.push_back(user_keys[r]);
    t.merchant_keys.push_back(merchant_keys[r]);
    std::copy_n(features.row(r).data(), features.cols(), t.features.row(i).data());
  }
  return t;
}

FeatureTable FeatureTable::append(const FeatureTable& other) const {
  if (other.feature_names != feature_names) throw Error(ErrorKind::shape, "appending tables with different features");
  FeatureTable t = *this;
  t.ids.insert(t.ids.end(), other.ids.begin(), other.ids.end());
  t.labels.insert(t.labels.end(), other.labels.begin(), other.labels.end());
  t.timestamps.insert(t.timestamps.end(), other.timestamps.begin(), other.timestamps.end());
  t.user_keys.insert(t.user_keys.end(), other.user_keys.begin(), other.user_keys.end());
  t.merchant_keys.insert(t.merchant_keys.end(), other.merchant_keys.begin(), other.merchant_keys.end());
  std::vector<double> values(features.values().begin(), features.values().end());
  values.insert(values.end(), other.features.values().begin(), other.features.values().end());
  t.features = DenseMatrix(row_count() + other.row_count(), feature_names.size(), std::move(values));
  return t;
}

void write_feature_table(const FeatureTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  std::vector<std::string> header{"transaction_id", "label", "timestamp", "user_key", "merchant_key"};
  header.insert(header.end(), table.feature_names.begin(), table.feature_names.end());
  write_csv_row(out, header);
  std::vector<std::string> cells;
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    cells.clear();
    cells.push_back(table.ids[r]);
    cells.push_back(std::to_string(table.labels[r]));
    cells.push_back(format_double(table.timestamps[r]));
    cells.push_back(table.user_keys[r]);
    cells.push_back(table.merchant_keys[r]);
    for (double v : table.features.row(r)) cells.push_back(format_double(v));
    write_csv_row(out, cells);
  }
  if (!out) throw Error(ErrorKind::io, "failed writing " + path.string());
}

FeatureTable read_feature_table(const std::filesystem::path& path) {
  const CsvDocument doc = read_csv(path);
  static const std::vector<std::string> fixed{"transaction_id", "label", "timestamp", "user_key", "merchant_key"};
  if (doc.header.size() < fixed.size() || !std::equal(fixed.begin(), fixed.end(), doc.header.begin())) {
    throw Error(ErrorKind::schema, path.string() + ": not a feature table (expected " + join(fixed, ",") + ",...)");
  }
  FeatureTable t;
  t.feature_names.assign(doc.header.begin() + fixed.size(), doc.header.end());
  std::vector<double> values;
  values.reserve(doc.rows.size() * t.feature_names.size());
  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    const auto& row = doc.rows[r];
    auto bad = [&](const std::string& what) {
      return Error(ErrorKind::data, path.string() + ": row " + std::to_string(r + 1) + ": " + what);
    };
    double label = 0.0, ts = 0.0;
    if (!try_parse_double(row[1], label) || (label != 0.0 && label != 1.0)) throw bad("label not 0/1");
    if (!try_parse_double(row[2], ts)) throw bad("bad timestamp");
    t.ids.push_back(row[0]);
    t.labels.push_back(static_cast<int>(label));
    t.timestamps.push_back(ts);
    t.user_keys.push_back(row[3]);
    t.merchant_keys.push_back(row[4]);
    for (std::size_t c = fixed.size(); c < row.size(); ++c) {
      double v = 0.0;
      if (!try_parse_double(row[c], v)) throw bad("missing or non-numeric feature " + doc.header[c]);
      values.push_back(v);
    }
  }
  t.features = DenseMatrix(doc.rows.size(), t.feature_names.size(), std::move(values));
  t.validate();
  return t;
}

void write_feature_metadata(const FeatureTable& table, const EncoderState& state,
                            const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << "rows " << table.row_count() << "\n";
  out << "impute " << (state.imputer.strategy == ImputeStrategy::mean ? "mean" : "knn");
  if (state.imputer.strategy == ImputeStrategy::knn) out << " k=" << state.imputer.k;
  out << "\n";
  for (const auto& c : state.imputer.columns) {
    out << "column " << c.name << " " << role_name(ColumnRole::numeric)
        << (c.dropped ? " dropped" : " mean=" + format_double(c.mean))
        << " missing_fraction=" << format_double(c.missing_fraction) << "\n";
  }
  out << "encode " << (state.categories.method == EncodeMethod::target ? "target" : "frequency")
      << " prior=" << format_double(state.categories.prior) << " fitted_rows=" << state.categories.training_rows
      << " fingerprint=" << state.categories.training_fingerprint << "\n";
  for (const auto& e : state.categories.columns) {
    out << "column " << e.column << " " << role_name(ColumnRole::categorical) << " categories=" << e.values.size()
        << " fallback=" << format_double(e.fallback) << "\n";
  }
  out << "column hour time\ncolumn day_of_week time\n";
  for (const auto& w : state.imputer.warnings) out << "warning " << w << "\n";
}

IngestSettings IngestSettings::from_config(const KeyValueConfig& cfg) {
  IngestSettings s;
  s.transaction_path = cfg.get_string("transaction_path", "");
  if (s.transaction_path.empty()) throw Error(ErrorKind::config, "transaction_path is required");
  if (const auto id = cfg.find("identity_path"); id && !id->empty()) s.identity_path = *id;
  s.output_path = cfg.get_string("output", "features.csv");
  s.schema.id_column = cfg.get_string("id_column", s.schema.id_column);
  s.schema.label_column = cfg.get_string("label_column", s.schema.label_column);
  s.schema.time_column = cfg.get_string("time_column", s.schema.time_column);
  s.schema.user_key = cfg.get_list("user_key", s.schema.user_key);
  s.schema.merchant_key = cfg.get_list("merchant_key", s.schema.merchant_key);
  for (const auto& c : cfg.get_list("numeric_columns", {})) s.schema.roles[c] = ColumnRole::numeric;
  for (const auto& c : cfg.get_list("categorical_columns", {})) s.schema.roles[c] = ColumnRole::categorical;
  for (const auto& c : cfg.get_list("drop_columns", {})) s.schema.roles[c] = ColumnRole::drop;

  const std::string impute = cfg.get_string("impute", "mean");
  if (impute == "mean") {
    s.impute.strategy = ImputeStrategy::mean;
  } else if (impute == "knn" || impute.rfind("knn:", 0) == 0) {
    s.impute.strategy = ImputeStrategy::knn;
    s.impute.k = impute.size() > 4 ? parse_integer(impute.substr(4), "impute") : cfg.get_int("knn_k", 5);
  } else {
    throw Error(ErrorKind::config, "impute must be mean or knn[:k], got " + impute);
  }
  const std::string encode = cfg.get_string("encode", "target");
  if (encode == "target") {
    s.encode = EncodeMethod::target;
  } else if (encode == "frequency") {
    s.encode = EncodeMethod::frequency;
  } else {
    throw Error(ErrorKind::config, "encode must be target or frequency, got " + encode);
  }
  s.encode_prior = cfg.get_double("encode_prior", s.encode_prior);
  s.impute.missing_drop_threshold = cfg.get_double("missing_drop_threshold", s.impute.missing_drop_threshold);
  s.time_origin = cfg.get_string("time_origin", s.time_origin);
  s.seed = cfg.get_u64("seed", s.seed);
  s.split_fractions = {cfg.get_double("train_fraction", 0.7), cfg.get_double("val_fraction", 0.15),
                       cfg.get_double("test_fraction", 0.15)};
  return s;
}

IngestResult run_ingest(const IngestSettings& settings) {
  if (!std::filesystem::exists(settings.transaction_path)) {
    throw Error(ErrorKind::io, "transaction file not found: " + settings.transaction_path.string());
  }
  if (settings.identity_path && !std::filesystem::exists(*settings.identity_path)) {
    throw Error(ErrorKind::io, "identity file not found: " + settings.identity_path->string());
  }
  const TimeOrigin origin = TimeOrigin::parse(settings.time_origin);
  const RawTable raw = load_tables(settings.transaction_path, settings.identity_path, settings.schema);
  const std::vector<int> labels = extract_labels(raw, settings.schema);

  std::array<double, 3> fractions{};
  std::copy_n(settings.split_fractions.begin(), 3, fractions.begin());
  const Split split = stratified_split(labels, fractions, settings.seed);
  const RawTable train_rows = raw.select_rows(split.train);
  std::vector<int> train_labels;
  for (std::size_t i : split.train) train_labels.push_back(labels[i]);

  IngestResult result;
  result.state.imputer = fit_imputer(train_rows, settings.impute, settings.schema);
  result.state.categories =
      fit_encoders(train_rows, train_labels, settings.encode, settings.encode_prior, settings.schema);
  result.table = transform(raw, result.state, settings.schema, origin);
  return result;
}

}  // namespace hetfraud
