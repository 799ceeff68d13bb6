#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "hetfraud/cli.hpp"
#include "hetfraud/csv.hpp"
#include "hetfraud/experiment.hpp"
#include "hetfraud/ingest.hpp"
#include "hetfraud/text.hpp"
#include "hetfraud/train.hpp"
#include "support.hpp"

using namespace hetfraud;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "hetfraud");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::size_t line_count(const std::string& text) { return std::count(text.begin(), text.end(), '\n'); }

// Small synthetic feature table written through the CLI.
std::string small_synth(const testing::TempDir& dir) {
  const std::string path = (dir / "synth.csv").string();
  const Outcome o = invoke({"synth", "--n_transactions", "300", "--n_users", "40", "--n_merchants", "15",
                            "--fraud_ratio", "0.1", "--feature_dim", "6", "--output", path});
  REQUIRE(o.code == 0);
  return path;
}

std::vector<std::string> fast_train_args() {
  return {"--epochs", "3", "--hidden", "8"};
}

std::vector<double> score_column(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::vector<double> out;
  while (std::getline(in, line)) out.push_back(std::stod(line.substr(line.find(',') + 1)));
  return out;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("missing input file exits with code 2") {
    testing::TempDir dir;
    const Outcome o = invoke({"train", "--features", (dir / "absent.csv").string(), "--output_dir",
                              (dir / "run").string()});
    CHECK(o.code == 2);
    CHECK_FALSE(o.err.empty());
  }

  TEST_CASE("unknown keys and bad values exit with code 3") {
    testing::TempDir dir;
    CHECK(invoke({"synth", "--n_bananas", "4", "--output", (dir / "s.csv").string()}).code == 3);
    CHECK(invoke({"train", "--epochs", "0", "--features", (dir / "s.csv").string()}).code == 3);
    testing::write_text(dir / "bad.cfg", "hidden = -3\n");
    CHECK(invoke({"train", "--config", (dir / "bad.cfg").string()}).code == 3);
    CHECK(invoke({}).code == 3);
  }

  TEST_CASE("synth writes the default benchmark and its ring file") {
    testing::TempDir dir;
    const std::string path = (dir / "bench.csv").string();
    const Outcome o = invoke({"synth", "--output", path});
    REQUIRE(o.code == 0);
    const FeatureTable t = read_feature_table(path);
    CHECK(t.row_count() == 2000);
    CHECK(std::count(t.labels.begin(), t.labels.end(), 1) == 100);
    CHECK(line_count(testing::read_text(dir / "bench_rings.csv")) == 2001);
    CHECK(std::filesystem::exists(dir / "bench.manifest.txt"));
    CHECK(o.out.find("ring,users,merchants") != std::string::npos);

    const std::string other = (dir / "other.csv").string();
    REQUIRE(invoke({"synth", "--seed", "7", "--output", other}).code == 0);
    CHECK_FALSE(read_feature_table(other).features == t.features);
  }

  TEST_CASE("train writes one loss row per epoch and a replayable manifest") {
    testing::TempDir dir;
    const std::string features = small_synth(dir);
    const std::string run1 = (dir / "run1").string();
    REQUIRE(invoke({"train", "--features", features, "--output_dir", run1, "--epochs", "1", "--hidden", "8"}).code == 0);
    CHECK(line_count(testing::read_text(dir / "run1" / "loss_curve.csv")) == 2);

    const std::string manifest = (dir / "run1" / "manifest.txt").string();
    const std::string text = testing::read_text(manifest);
    CHECK(text.find("manifest.command = train") != std::string::npos);
    CHECK(text.find("manifest.finished") != std::string::npos);

    const std::string run2 = (dir / "run2").string();
    REQUIRE(invoke({"train", "--config", manifest, "--output_dir", run2, "--manifest", run2 + "/manifest.txt"}).code ==
            0);
    for (const char* name : {"checkpoint.txt", "loss_curve.csv", "metrics.csv"})
      CHECK(testing::read_text(dir / "run1" / name) == testing::read_text(dir / "run2" / name));
  }

  TEST_CASE("score reproduces evaluate probabilities") {
    testing::TempDir dir;
    const std::string features = small_synth(dir);
    std::vector<std::string> args{"train", "--features", features, "--output_dir", (dir / "run").string()};
    for (const auto& a : fast_train_args()) args.push_back(a);
    REQUIRE(invoke(args).code == 0);
    const std::string ck = (dir / "run" / "checkpoint.txt").string();

    const std::string scores = (dir / "scores.csv").string();
    REQUIRE(invoke({"score", "--checkpoint", ck, "--input", features, "--output", scores}).code == 0);
    const std::vector<double> s = score_column(scores);

    const Checkpoint c = Checkpoint::load(ck);
    const FeatureTable table = read_feature_table(features);
    const auto expected = predict(prepare_graph(table, c.normalizer, false), c.params, c.model_config());
    REQUIRE(s.size() == expected.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(std::abs(s[i] - expected[i]) < 1e-12);
      CHECK(s[i] > 0.0);
      CHECK(s[i] < 1.0);
    }

    const std::string eval = (dir / "eval.csv").string();
    const Outcome e = invoke({"evaluate", "--checkpoint", ck, "--features", features, "--output", eval});
    REQUIRE(e.code == 0);
    CHECK(testing::read_text(eval) == testing::read_text(dir / "run" / "metrics.csv"));
  }

  TEST_CASE("scoring an empty batch writes only the header") {
    testing::TempDir dir;
    const std::string features = small_synth(dir);
    std::vector<std::string> args{"train", "--features", features, "--output_dir", (dir / "run").string()};
    for (const auto& a : fast_train_args()) args.push_back(a);
    REQUIRE(invoke(args).code == 0);
    FeatureTable empty = read_feature_table(features).select_rows({});
    write_feature_table(empty, dir / "empty.csv");
    const std::string out = (dir / "empty_scores.csv").string();
    REQUIRE(invoke({"score", "--checkpoint", (dir / "run" / "checkpoint.txt").string(), "--input",
                    (dir / "empty.csv").string(), "--output", out})
                .code == 0);
    CHECK(testing::read_text(out) == "transaction_id,score\n");
  }

  TEST_CASE("feature width mismatch exits with code 3") {
    testing::TempDir dir;
    const std::string features = small_synth(dir);
    std::vector<std::string> args{"train", "--features", features, "--output_dir", (dir / "run").string()};
    for (const auto& a : fast_train_args()) args.push_back(a);
    REQUIRE(invoke(args).code == 0);
    const std::string wide = (dir / "wide.csv").string();
    REQUIRE(invoke({"synth", "--n_transactions", "100", "--fraud_ratio", "0.1", "--feature_dim", "9", "--output",
                    wide})
                .code == 0);
    const Outcome o = invoke({"score", "--checkpoint", (dir / "run" / "checkpoint.txt").string(), "--input", wide,
                              "--output", (dir / "s.csv").string()});
    CHECK(o.code == 3);
    CHECK(o.err.find("features") != std::string::npos);
  }

  TEST_CASE("ablate lists eight variants by descending AUC") {
    testing::TempDir dir;
    const std::string features = small_synth(dir);
    const std::string out = (dir / "ablation.csv").string();
    std::vector<std::string> args{"ablate", "--features", features, "--output", out, "--epochs", "2", "--hidden", "4"};
    REQUIRE(invoke(args).code == 0);
    const auto rows = read_csv(out);
    REQUIRE(rows.rows.size() == 8);
    CHECK(join(rows.header, ",") == "model,analogue,use_attention,use_relation_typing,use_decay,accuracy,auc_roc,params");
    double previous = 2.0;
    bool saw_full = false;
    for (const auto& r : rows.rows) {
      const double auc = std::stod(r[6]);
      CHECK(auc <= previous);
      previous = auc;
      if (r[0] == "full") {
        saw_full = true;
        ModelConfig m;
        m.hidden = 4;
        const FeatureTable t = read_feature_table(features);
        const HeteroGraph g = prepare_graph(t, Standardizer::identity(t.features.cols()), false);
        CHECK(std::stoull(r[7]) == describe(init_params(m, g, t.features.cols())).total);
      }
    }
    CHECK(saw_full);
  }

  TEST_CASE("gradcheck command reports every primitive") {
    const Outcome o = invoke({"gradcheck", "--graphs", "1", "--hidden", "4", "--max_nodes", "20"});
    CHECK(o.out.find("model graph 0") != std::string::npos);
    CHECK(o.out.find("gradient check") != std::string::npos);
    CHECK((o.code == 0 || o.code == 1));
  }
}
