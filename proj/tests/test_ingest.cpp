#include <cmath>

#include "doctest.h"
#include "hetfraud/csv.hpp"
#include "hetfraud/error.hpp"
#include "hetfraud/ingest.hpp"
#include "support.hpp"

using namespace hetfraud;

namespace {

RawTable table_of(const std::vector<std::string>& columns, const std::vector<std::vector<std::string>>& rows) {
  RawTable t;
  t.columns = columns;
  for (const auto& r : rows) {
    std::vector<Cell> cells;
    for (const auto& c : r) cells.push_back(Cell::parse(c));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

SchemaConfig plain_schema() {
  SchemaConfig s;
  s.id_column = "id";
  s.label_column = "y";
  s.time_column = "t";
  s.user_key = {"u"};
  s.merchant_key = {"m"};
  s.roles["u"] = ColumnRole::drop;
  s.roles["m"] = ColumnRole::drop;
  return s;
}

EncoderState fit_all(const RawTable& t, const SchemaConfig& s, EncodeMethod method, double prior = 10.0,
                     ImputeOptions impute = {}) {
  EncoderState st;
  st.imputer = fit_imputer(t, impute, s);
  st.categories = fit_encoders(t, extract_labels(t, s), method, prior, s);
  return st;
}

const NumericColumnState& column_state(const ImputerState& s, const std::string& name) {
  for (const auto& c : s.columns)
    if (c.name == name) return c;
  FAIL("no column " << name);
  return s.columns.front();
}

}  // namespace

TEST_SUITE("ingest") {
  TEST_CASE("left join keeps unmatched rows with missing identity cells") {
    testing::TempDir dir;
    testing::write_text(dir / "tx.csv", "TransactionID,isFraud,TransactionDT,TransactionAmt\n1,0,10,5.5\n2,1,20,7\n");
    testing::write_text(dir / "id.csv", "TransactionID,id_01,DeviceType\n2,-5,mobile\n");
    const SchemaConfig schema;
    const RawTable t = load_tables(dir / "tx.csv", dir / "id.csv", schema);
    REQUIRE(t.row_count() == 2);
    REQUIRE(t.columns.size() == 6);
    CHECK(t.columns[4] == "id_01");
    CHECK(t.columns[5] == "DeviceType");
    CHECK(t.rows[0][4].missing());
    CHECK(t.rows[0][5].missing());
    CHECK(t.rows[1][4].number == -5.0);
    CHECK(t.rows[1][5].text == "mobile");
  }

  TEST_CASE("transaction file without identity path is returned as read") {
    testing::TempDir dir;
    testing::write_text(dir / "tx.csv", "TransactionID,isFraud,TransactionDT,card1\n1,0,10,77\n2,1,20,\n");
    const RawTable t = load_tables(dir / "tx.csv", std::nullopt, SchemaConfig{});
    CHECK(t.columns == std::vector<std::string>{"TransactionID", "isFraud", "TransactionDT", "card1"});
    REQUIRE(t.row_count() == 2);
    CHECK(t.rows[0][3].number == 77.0);
    CHECK(t.rows[1][3].missing());
  }

  TEST_CASE("ragged row is a parse error with its row number") {
    testing::TempDir dir;
    testing::write_text(dir / "tx.csv", "TransactionID,isFraud,TransactionDT\n1,0,10\n2,1\n");
    try {
      load_tables(dir / "tx.csv", std::nullopt, SchemaConfig{});
      FAIL("expected parse error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::parse);
      CHECK(std::string(e.what()).find('2') != std::string::npos);
    }
  }

  TEST_CASE("missing mandatory column is a schema error") {
    testing::TempDir dir;
    testing::write_text(dir / "tx.csv", "TransactionID,TransactionDT\n1,10\n");
    try {
      load_tables(dir / "tx.csv", std::nullopt, SchemaConfig{});
      FAIL("expected schema error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::schema);
      CHECK(std::string(e.what()).find("isFraud") != std::string::npos);
    }
  }

  TEST_CASE("quoted CSV fields round trip") {
    std::istringstream in("a,b\n\"x,y\",\"say \"\"hi\"\"\"\n");
    const CsvDocument d = parse_csv(in, "inline");
    REQUIRE(d.rows.size() == 1);
    CHECK(d.rows[0][0] == "x,y");
    CHECK(d.rows[0][1] == "say \"hi\"");
    std::ostringstream out;
    write_csv_row(out, d.rows[0]);
    CHECK(out.str() == "\"x,y\",\"say \"\"hi\"\"\"\n");
  }

  TEST_CASE("mean imputation and fully missing columns") {
    const SchemaConfig s = plain_schema();
    const RawTable t = table_of({"id", "y", "t", "u", "m", "a", "gone"},
                                {{"1", "0", "0", "u", "m", "1", ""}, {"2", "1", "0", "u", "m", "", ""},
                                 {"3", "0", "0", "u", "m", "3", ""}});
    const ImputerState st = fit_imputer(t, {}, s);
    CHECK(column_state(st, "a").mean == 2.0);
    CHECK_FALSE(column_state(st, "a").dropped);
    CHECK(column_state(st, "gone").dropped);
    REQUIRE(st.warnings.size() == 1);
    CHECK(st.warnings[0].find("gone") != std::string::npos);
  }

  TEST_CASE("missing fraction above the threshold drops the column") {
    const SchemaConfig s = plain_schema();
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < 20; ++i) rows.push_back({std::to_string(i), "0", "0", "u", "m", i == 0 ? "1" : ""});
    const ImputerState st = fit_imputer(table_of({"id", "y", "t", "u", "m", "sparse"}, rows), {}, s);
    CHECK(column_state(st, "sparse").missing_fraction == doctest::Approx(0.95));
    CHECK(column_state(st, "sparse").dropped);
  }

  TEST_CASE("knn imputation over observed columns") {
    const SchemaConfig s = plain_schema();
    const RawTable t = table_of({"id", "y", "t", "u", "m", "x0", "x1"},
                                {{"1", "0", "0", "u", "m", "0", "0"}, {"2", "1", "0", "u", "m", "0", "2"},
                                 {"3", "0", "0", "u", "m", "4", ""}});
    ImputeOptions opt;
    opt.strategy = ImputeStrategy::knn;
    opt.k = 2;
    const EncoderState st = fit_all(t, s, EncodeMethod::frequency, 10.0, opt);
    const FeatureTable f = transform(t, st, s, TimeOrigin{});
    CHECK(f.features(2, 0) == 4.0);
    CHECK(f.features(2, 1) == 1.0);
  }

  TEST_CASE("knn k outside the feasible range is a config error") {
    const SchemaConfig s = plain_schema();
    const RawTable t = table_of({"id", "y", "t", "u", "m", "x0"},
                                {{"1", "0", "0", "u", "m", "0"}, {"2", "1", "0", "u", "m", ""}});
    ImputeOptions opt;
    opt.strategy = ImputeStrategy::knn;
    opt.k = 0;
    CHECK_THROWS_AS(fit_imputer(t, opt, s), Error);
    opt.k = 2;
    try {
      fit_imputer(t, opt, s);
      FAIL("expected config error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::config);
    }
  }

  TEST_CASE("time features from a Monday origin") {
    const TimeFeatures f = derive_time_features({0.0, 86400.0, 90000.0}, TimeOrigin{});
    CHECK(f.hour == std::vector<int>{0, 0, 1});
    CHECK(f.day_of_week == std::vector<int>{0, 1, 1});
  }

  TEST_CASE("time features honor the origin and are weekly periodic") {
    const TimeOrigin o = TimeOrigin::parse("2017-12-06 22:30:00");
    CHECK(o.weekday == 2);
    const TimeFeatures f = derive_time_features({0.0, 5400.0}, o);
    CHECK(f.hour == std::vector<int>{22, 0});
    CHECK(f.day_of_week == std::vector<int>{2, 3});
    Rng rng(17);
    for (int i = 0; i < 200; ++i) {
      const double t = std::floor(rng.uniform(0, 4e7));
      const auto a = derive_time_features({t}, o), b = derive_time_features({t + 604800.0}, o);
      CHECK(a.hour == b.hour);
      CHECK(a.day_of_week == b.day_of_week);
    }
  }

  TEST_CASE("negative timestamp is a data error naming the row") {
    try {
      derive_time_features({1.0, -3.0}, TimeOrigin{});
      FAIL("expected data error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::data);
      CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }
  }

  TEST_CASE("frequency and target encodings") {
    const SchemaConfig s = plain_schema();
    const RawTable t = table_of({"id", "y", "t", "u", "m", "c"},
                                {{"1", "1", "0", "u", "m", "a"}, {"2", "0", "0", "u", "m", "a"},
                                 {"3", "1", "0", "u", "m", "b"}});
    const std::vector<int> y = extract_labels(t, s);
    const CategoryEncoderState freq = fit_encoders(t, y, EncodeMethod::frequency, 10.0, s);
    REQUIRE(freq.columns.size() == 1);
    CHECK(freq.columns[0].values.at("a") == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(freq.columns[0].values.at("b") == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(freq.columns[0].fallback == 0.0);

    const CategoryEncoderState target = fit_encoders(t, y, EncodeMethod::target, 0.0, s);
    CHECK(target.columns[0].values.at("a") == 0.5);
    CHECK(target.columns[0].values.at("b") == 1.0);
    CHECK(target.columns[0].fallback == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

    const CategoryEncoderState heavy = fit_encoders(t, y, EncodeMethod::target, 1e12, s);
    for (const auto& [cat, v] : heavy.columns[0].values) CHECK(v == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
  }

  TEST_CASE("target encoding moves monotonically toward the global mean") {
    const SchemaConfig s = plain_schema();
    std::vector<std::vector<std::string>> rows;
    Rng rng(6);
    for (int i = 0; i < 60; ++i) {
      const std::string cat(1, static_cast<char>('a' + rng.below(5)));
      rows.push_back({std::to_string(i), rng.uniform() < 0.3 ? "1" : "0", "0", "u", "m", cat});
    }
    const RawTable t = table_of({"id", "y", "t", "u", "m", "c"}, rows);
    const std::vector<int> y = extract_labels(t, s);
    const double global = fit_encoders(t, y, EncodeMethod::target, 0.0, s).columns[0].fallback;
    std::map<std::string, double> prev_gap;
    for (double m : {0.0, 1.0, 5.0, 25.0, 200.0}) {
      const auto enc = fit_encoders(t, y, EncodeMethod::target, m, s).columns[0];
      for (const auto& [cat, v] : enc.values) {
        const double gap = std::abs(v - global);
        if (prev_gap.count(cat)) CHECK(gap <= prev_gap[cat] + 1e-15);
        prev_gap[cat] = gap;
      }
    }
  }

  TEST_CASE("frequency encodings are in (0, 1] and weight to one") {
    const SchemaConfig s = plain_schema();
    std::vector<std::vector<std::string>> rows;
    Rng rng(9);
    for (int i = 0; i < 40; ++i)
      rows.push_back({std::to_string(i), "0", "0", "u", "m", std::string(1, static_cast<char>('a' + rng.below(6)))});
    const RawTable t = table_of({"id", "y", "t", "u", "m", "c"}, rows);
    const auto enc = fit_encoders(t, std::vector<int>(40, 0), EncodeMethod::frequency, 10.0, s).columns[0];
    for (const auto& row : t.rows) {
      const double v = enc.values.at(row[5].text);
      CHECK(v > 0.0);
      CHECK(v <= 1.0);
    }
    double total = 0.0;
    for (const auto& [cat, v] : enc.values) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  }

  TEST_CASE("encoder fitting on an empty table is a config error") {
    const SchemaConfig s = plain_schema();
    const RawTable t = table_of({"id", "y", "t", "u", "m"}, {});
    try {
      fit_encoders(t, {}, EncodeMethod::frequency, 10.0, s);
      FAIL("expected config error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::config);
    }
  }

  TEST_CASE("transform without missing values keeps numeric columns") {
    SchemaConfig s;
    s.id_column = "id";
    s.label_column = "y";
    s.time_column = "t";
    s.user_key = {"card1", "addr1"};
    s.merchant_key = {"c"};
    const RawTable t = table_of({"id", "y", "t", "card1", "addr1", "amt", "c"},
                                {{"1", "0", "90000", "1234", "87", "10.5", "x"}, {"2", "1", "0", "99", "1", "3", "z"}});
    const EncoderState st = fit_all(t, s, EncodeMethod::frequency);
    const FeatureTable f = transform(t, st, s, TimeOrigin{});
    CHECK(f.feature_names == std::vector<std::string>{"card1", "addr1", "amt", "c", "hour", "day_of_week"});
    CHECK(f.features(0, 2) == 10.5);
    CHECK(f.features(1, 2) == 3.0);
    CHECK(f.features(0, 3) == 0.5);
    CHECK(f.features(0, 4) == 1.0);
    CHECK(f.features(0, 5) == 1.0);
    CHECK(f.user_keys[0] == "1234|87");
    CHECK(f.merchant_keys[1] == "z");
    CHECK(f.ids == std::vector<std::string>{"1", "2"});
    CHECK(f.labels == std::vector<int>{0, 1});
  }

  TEST_CASE("unseen category falls back and imputation leaves no gaps") {
    const SchemaConfig s = plain_schema();
    const RawTable train = table_of({"id", "y", "t", "u", "m", "a", "c"},
                                    {{"1", "0", "0", "u", "m", "1", "p"}, {"2", "1", "5", "u", "m", "", "q"}});
    const RawTable later = table_of({"id", "y", "t", "u", "m", "a", "c"}, {{"3", "0", "9", "u", "m", "", "new"}});
    const EncoderState st = fit_all(train, s, EncodeMethod::frequency);
    const FeatureTable f = transform(later, st, s, TimeOrigin{});
    CHECK(f.features(0, 0) == 1.0);
    CHECK(f.features(0, 1) == 0.0);
    CHECK(f.features.all_finite());
    const FeatureTable g = transform(train, st, s, TimeOrigin{});
    CHECK(g.features(1, 0) == 1.0);
  }

  TEST_CASE("transform requires a fitted state and known key columns") {
    SchemaConfig s = plain_schema();
    const RawTable t = table_of({"id", "y", "t", "u", "m"}, {{"1", "0", "0", "u", "m"}});
    CHECK_THROWS_AS(transform(t, EncoderState{}, s, TimeOrigin{}), Error);
    const EncoderState st = fit_all(t, s, EncodeMethod::frequency);
    s.user_key = {"nope"};
    try {
      transform(t, st, s, TimeOrigin{});
      FAIL("expected schema error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::schema);
    }
  }

  TEST_CASE("feature table CSV round trip is exact") {
    testing::TempDir dir;
    Rng rng(12);
    const FeatureTable t = testing::small_table({"u1", "u,2"}, {"m1", "m1"}, {0.1, 7.0}, {0, 1},
                                                testing::random_matrix(rng, 2, 3));
    write_feature_table(t, dir / "f.csv");
    const FeatureTable back = read_feature_table(dir / "f.csv");
    CHECK(back.ids == t.ids);
    CHECK(back.user_keys == t.user_keys);
    CHECK(back.merchant_keys == t.merchant_keys);
    CHECK(back.timestamps == t.timestamps);
    CHECK(back.labels == t.labels);
    CHECK(back.features == t.features);
    CHECK(back.feature_names == t.feature_names);
  }

  TEST_CASE("run_ingest on IEEE-CIS shaped files is deterministic") {
    testing::TempDir dir;
    std::string tx = "TransactionID,isFraud,TransactionDT,TransactionAmt,ProductCD,card1,addr1,R_emaildomain\n";
    std::string id = "TransactionID,id_01,DeviceType\n";
    Rng rng(2);
    for (int i = 0; i < 60; ++i) {
      tx += std::to_string(3000000 + i) + "," + (i % 6 == 0 ? "1" : "0") + "," + std::to_string(86400 + 97 * i) +
            "," + std::to_string(10 + rng.below(90)) + "," + (i % 3 ? "W" : "C") + "," +
            std::to_string(1000 + rng.below(4)) + "," + (i % 7 ? std::to_string(100 + rng.below(3)) : "") + "," +
            (i % 2 ? "gmail.com" : "") + "\n";
      if (i % 2) id += std::to_string(3000000 + i) + ",-" + std::to_string(rng.below(20)) + "," +
                       (i % 4 == 1 ? "mobile" : "desktop") + "\n";
    }
    testing::write_text(dir / "tx.csv", tx);
    testing::write_text(dir / "id.csv", id);
    IngestSettings s;
    s.transaction_path = dir / "tx.csv";
    s.identity_path = dir / "id.csv";
    const IngestResult a = run_ingest(s), b = run_ingest(s);
    CHECK(a.table.row_count() == 60);
    CHECK(a.table.features == b.table.features);
    CHECK(a.table.user_keys == b.table.user_keys);
    CHECK(a.state.categories.fitted);
    CHECK(a.state.categories.training_rows == 42);
    CHECK(a.table.features.all_finite());
    for (const auto& name : a.table.feature_names) CHECK(name != "isFraud");
  }
}
