// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "hetfraud/experiment.hpp"
#include "hetfraud/imbalance.hpp"
#include "hetfraud/model.hpp"
#include "hetfraud/synth.hpp"
#include "hetfraud/tape.hpp"
#include "hetfraud/train.hpp"
#include "hetfraud/verify.hpp"
#include "support.hpp"

using namespace hetfraud;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Outcome {
  bool pass;
  std::string detail;
};

std::vector<DenseMatrix> raw_states(const HeteroGraph& g) {
  std::vector<DenseMatrix> s;
  for (std::size_t t = 0; t < g.node_type_count(); ++t) s.push_back(g.features(t));
  return s;
}

ModelConfig check_model(std::uint64_t seed) {
  ModelConfig m;
  m.hidden = 8;
  m.layers = 2;
  m.seed = seed;
  return m;
}

Outcome gradient_correctness() {
  const auto start = Clock::now();
  double worst = 0.0;
  std::size_t failing = 0;
  std::string where;
  for (std::uint64_t g = 0; g < 10; ++g) {
    const HeteroGraph graph = random_graph(derive_seed(1, g));
    if (graph.total_nodes() > 50 || graph.relation_count() != 3) return {false, "random graph outside the budget"};
    const GradCheckReport r = model_gradcheck(graph, check_model(derive_seed(1, 1000 + g)), 1e-5, 1e-5);
    if (!r.passed) ++failing;
    if (r.max_relative_error > worst) {
      worst = r.max_relative_error;
      where = "graph " + std::to_string(g) + " " + r.worst.parameter + "[" + std::to_string(r.worst.index) + "]";
    }
  }
  const double t = seconds_since(start);
  return {failing == 0 && worst < 1e-5 && t < 10.0,
          "max rel err " + fmt(worst) + " at " + where + ", " + std::to_string(failing) + "/10 graphs over 1e-5, " +
              fmt(t) + " s"};
}

Outcome attention_normalization() {
  double worst = 0.0;
  std::size_t segments = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const HeteroGraph g = random_graph(derive_seed(2, s));
    const ModelConfig m = check_model(derive_seed(3, s));
    ParamStore p = init_params(m, g, g.features(g.transaction_type()).cols());
    // layer 0 on raw features, layer 1 on the first layer's output
    std::vector<std::vector<DenseMatrix>> states{raw_states(g)};
    {
      Tape tape;
      BoundParams bound(tape, p);
      const NodeStates h = layer_forward(bound, g, input_states(tape, g), m);
      std::vector<DenseMatrix> v;
      for (const Var& x : h.per_type) v.push_back(x.value());
      states.push_back(v);
    }
    for (std::size_t layer = 0; layer < 2; ++layer) {
      for (std::size_t r = 0; r < g.relation_count(); ++r) {
        const auto alpha = attention_coefficients(g, states[layer], p, layer, r, m);
        const auto& off = g.adjacency(r).offsets;
        for (std::size_t v = 0; v + 1 < off.size(); ++v) {
          if (off[v] == off[v + 1]) continue;
          double total = 0.0;
          for (std::size_t e = off[v]; e < off[v + 1]; ++e) total += alpha[e];
          worst = std::max(worst, std::abs(total - 1.0));
          ++segments;
        }
      }
    }
  }
  return {worst < 1e-12, "max |sum - 1| " + fmt(worst) + " over " + std::to_string(segments) + " neighborhoods"};
}

Outcome decay_identity() {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const HeteroGraph g = random_graph(derive_seed(4, s));
    ModelConfig on = check_model(derive_seed(5, s));
    on.decay_rate = 0.0;
    ModelConfig off = on;
    off.use_decay = false;
    const ParamStore p = init_params(on, g, g.features(g.transaction_type()).cols());
    const auto a = predict(g, p, on), b = predict(g, p, off);
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  }
  Rng rng(6);
  bool bounded = true;
  std::size_t edges = 0;
  for (int draw = 0; draw < 20; ++draw) {
    RandomGraphOptions opts;
    opts.time_span = rng.uniform(1.0, 365.0 * 86400.0);
    const HeteroGraph g = random_graph(derive_seed(7, draw), opts);
    const double rate = rng.uniform(0.0, 1.0);
    for (std::size_t r = 0; r < g.relation_count(); ++r) {
      for (double d : decay_factors(g, r, rate, 86400.0)) {
        bounded = bounded && d > 0.0 && d <= 1.0;
        ++edges;
      }
    }
  }
  return {worst < 1e-12 && bounded, "max |lambda=0 - off| " + fmt(worst) + ", decay in (0,1] on " +
                                        std::to_string(edges) + " edges: " + (bounded ? "yes" : "no")};
}

Outcome mean_collapse() {
  Rng rng(8);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 5 + rng.below(40), d = 1 + rng.below(5);
    const HeteroGraph g = testing::random_link_graph(rng, n, d, 86400.0 * 30);
    ModelConfig m;
    m.layers = 1;
    m.hidden = 1 + rng.below(8);
    m.use_attention = false;
    m.use_decay = false;
    m.seed = trial;
    ParamStore p = init_params(m, g, d);
    const DenseMatrix w = p.at(weight_name(0, "link")).value;
    Tape tape;
    BoundParams bound(tape, p);
    const DenseMatrix out = layer_forward(bound, g, input_states(tape, g), m).per_type[0].value();
    // independent mean aggregator over an edge list
    const DenseMatrix& x = g.features(0);
    std::vector<std::vector<std::size_t>> nbrs(n);
    for (std::size_t v = 0; v < n; ++v)
      for (const Neighbor& u : g.neighbors({0, v}, 0)) nbrs[v].push_back(u.index);
    for (std::size_t v = 0; v < n; ++v) {
      for (std::size_t j = 0; j < m.hidden; ++j) {
        double acc = 0.0;
        for (std::size_t u : nbrs[v])
          for (std::size_t i = 0; i < d; ++i) acc += x(u, i) * w(i, j);
        const double mean = nbrs[v].empty() ? 0.0 : acc / static_cast<double>(nbrs[v].size());
        worst = std::max(worst, std::abs(out(v, j) - std::max(0.0, mean)));
      }
    }
  }
  return {worst < 1e-12, "max deviation " + fmt(worst)};
}

Outcome loss_identities() {
  Rng rng(9);
  bool exact = true;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(500);
    std::vector<double> p(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng.uniform(1e-6, 1.0 - 1e-6);
      y[i] = rng.uniform() < 0.3;
    }
    exact = exact && weighted_bce(p, y, std::vector<double>(n, 1.0)) == cross_entropy(p, y);
  }
  double worst = 0.0;
  for (std::size_t n : {1u, 7u, 100u, 1000u, 100000u}) {
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = i % 3 == 0;
    worst = std::max(worst, std::abs(cross_entropy(std::vector<double>(n, 0.5), y) - static_cast<double>(n) * std::log(2.0)));
  }
  std::vector<int> labels(100, 0);
  for (std::size_t i = 0; i < 5; ++i) labels[i] = 1;
  const ClassWeights w = class_weights(labels);
  const double ratio = w.positive / w.negative;
  return {exact && worst < 1e-12 && ratio == 19.0, std::string("w=1 exact: ") + (exact ? "yes" : "no") +
                                                       ", max |L - N ln2| " + fmt(worst) + ", 95/5 ratio " +
                                                       fmt(ratio)};
}

double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      if (s[i] > s[j]) wins += 1.0;
      if (s[i] == s[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

Outcome auc_oracle() {
  Rng rng(10);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(299);
    std::vector<double> s(n);
    std::vector<int> y(n);
    const int mode = trial % 4;
    for (std::size_t i = 0; i < n; ++i) {
      if (mode == 0) s[i] = 0.5;                                  // all ties
      if (mode == 1) s[i] = std::round(rng.uniform(0, 3));        // heavy ties
      if (mode == 2) s[i] = rng.uniform();
      if (mode == 3) s[i] = 0.5 + 1e-15 * static_cast<double>(rng.below(3));
      y[i] = 0;
    }
    // near-degenerate classes: a single positive or a single negative sometimes
    if (trial % 10 == 0) {
      y[rng.below(n)] = 1;
    } else if (trial % 10 == 1) {
      std::fill(y.begin(), y.end(), 1);
      y[rng.below(n)] = 0;
    } else {
      for (std::size_t i = 0; i < n; ++i) y[i] = rng.uniform() < 0.3;
      y[0] = 1;
      y[1] = 0;
    }
    worst = std::max(worst, std::abs(auc_roc(s, y) - pairwise_auc(s, y)));
  }
  const double example = auc_roc(std::vector<double>{0.9, 0.8, 0.7, 0.6}, std::vector<int>{1, 0, 1, 0});
  return {worst < 1e-12 && example == 0.75, "max deviation " + fmt(worst) + ", example " + fmt(example)};
}

Outcome smote_geometry() {
  Rng rng(11);
  double worst = 0.0;
  bool nearest = true;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 1 + rng.below(6);
    const std::size_t n = k + 1 + rng.below(30), d = 1 + rng.below(8);
    const DenseMatrix x = testing::random_matrix(rng, n, d);
    const SmoteResult r = smote(x, k, 1 + rng.below(60), derive_seed(12, trial));
    for (std::size_t s = 0; s < r.provenance.size(); ++s) {
      const SmoteProvenance& p = r.provenance[s];
      for (std::size_t c = 0; c < d; ++c) {
        const double rebuilt = x(p.base, c) + p.gap * (x(p.neighbor, c) - x(p.base, c));
        worst = std::max(worst, std::abs(r.rows(s, c) - rebuilt));
      }
      std::vector<double> dist;
      double to_neighbor = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (i == p.base) continue;
        double acc = 0.0;
        for (std::size_t c = 0; c < d; ++c) acc += (x(i, c) - x(p.base, c)) * (x(i, c) - x(p.base, c));
        dist.push_back(acc);
        if (i == p.neighbor) to_neighbor = acc;
      }
      std::sort(dist.begin(), dist.end());
      nearest = nearest && p.neighbor != p.base && to_neighbor <= dist[k - 1];
    }
  }
  return {worst < 1e-9 && nearest,
          "max reconstruction error " + fmt(worst) + ", neighbors among k nearest: " + (nearest ? "yes" : "no")};
}

struct BenchmarkRun {
  double auc = 0.0;
  double seconds = 0.0;
  std::vector<double> losses;
};

BenchmarkRun benchmark(const SynthConfig& sc, const ModelConfig& model, ResampleMethod method, std::uint64_t seed) {
  const auto start = Clock::now();
  SynthConfig s = sc;
  s.seed = seed;
  TrainConfig t;
  t.seed = seed;
  t.imbalance.method = method;
  t.imbalance.seed = seed;
  ModelConfig m = model;
  m.seed = seed;
  const ExperimentResult r = run_experiment(generate(s).table, m, t);
  BenchmarkRun out;
  out.auc = r.split_metrics("test").auc_roc;
  for (const auto& rec : r.trained.curve.records) out.losses.push_back(rec.train_loss);
  out.seconds = seconds_since(start);
  return out;
}

std::string list(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + fmt(x);
  return s;
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  SynthConfig sc;
  ModelConfig m;
  TrainConfig t;
  t.imbalance.method = ResampleMethod::smote_plus_cost;
  const FeatureTable table = generate(sc).table;
  testing::TempDir dir;
  std::vector<std::string> bytes[2];
  for (int run = 0; run < 2; ++run) {
    const ExperimentResult r = run_experiment(table, m, t);
    const std::string tag = std::to_string(run);
    make_checkpoint(r, m, t).save(dir / ("checkpoint" + tag + ".txt"));
    export_loss_curve(r.trained.curve, dir / ("loss" + tag + ".csv"));
    export_metrics(r.metrics, dir / ("metrics" + tag + ".csv"));
    for (const char* name : {"checkpoint", "loss", "metrics"}) {
      const std::string ext = std::string(name) == "checkpoint" ? ".txt" : ".csv";
      bytes[run].push_back(file_bytes(dir / (name + tag + ext)));
    }
  }
  const bool same = bytes[0] == bytes[1] && !bytes[0][0].empty();
  return {same, std::string("checkpoint, loss curve and metrics identical: ") + (same ? "yes" : "no")};
}

void report(int id, const std::string& name, const Outcome& o, int& failures) {
  if (!o.pass) ++failures;
  std::printf("%s criterion %2d %-28s %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
  std::fflush(stdout);
}

}  // namespace

int main() {
  int failures = 0;
  report(1, "gradient correctness", gradient_correctness(), failures);
  report(2, "attention normalization", attention_normalization(), failures);
  report(3, "decay identity", decay_identity(), failures);
  report(4, "mean aggregation collapse", mean_collapse(), failures);
  report(5, "loss identities", loss_identities(), failures);
  report(6, "auc oracle", auc_oracle(), failures);
  report(7, "smote geometry", smote_geometry(), failures);

  const SynthConfig sc;
  const ModelConfig full;
  ModelConfig no_decay = full;
  no_decay.use_decay = false;
  std::vector<double> auc_full, auc_no_decay, auc_none, loss1, loss10, loss50, slowest;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const BenchmarkRun a = benchmark(sc, full, ResampleMethod::smote_plus_cost, seed);
    const BenchmarkRun b = benchmark(sc, no_decay, ResampleMethod::smote_plus_cost, seed);
    const BenchmarkRun c = benchmark(sc, full, ResampleMethod::none, seed);
    auc_full.push_back(a.auc);
    auc_no_decay.push_back(b.auc);
    auc_none.push_back(c.auc);
    slowest.push_back(a.seconds);
    loss1.push_back(a.losses.at(0));
    loss10.push_back(a.losses.at(9));
    loss50.push_back(a.losses.at(49));
  }
  const double max_seconds = *std::max_element(slowest.begin(), slowest.end());
  report(8, "synthetic benchmark",
         {median(auc_full) >= 0.85 && max_seconds < 60.0,
          "median test AUC " + fmt(median(auc_full)) + " (" + list(auc_full) + "), slowest run " + fmt(max_seconds) +
              " s"},
         failures);
  const bool decay_ok = median(auc_full) >= median(auc_no_decay) - 0.02;
  const bool handling_ok = median(auc_full) >= median(auc_none) - 0.02;
  report(9, "ablation direction",
         {decay_ok && handling_ok, "full " + fmt(median(auc_full)) + " vs no decay " + fmt(median(auc_no_decay)) +
                                       "; smote+cost " + fmt(median(auc_full)) + " vs none " + fmt(median(auc_none))},
         failures);
  const double m1 = median(loss1), m10 = median(loss10), m50 = median(loss50);
  report(10, "loss curve shape",
         {m10 < 0.5 * m1 && m50 <= m10,
          "median loss epoch 1 " + fmt(m1) + ", epoch 10 " + fmt(m10) + ", epoch 50 " + fmt(m50)},
         failures);
  report(11, "determinism", determinism(), failures);

  SynthConfig null_cfg;
  null_cfg.fraud_shift = 0.0;
  null_cfg.burst_width = null_cfg.horizon;
  std::vector<double> auc_null;
  for (std::uint64_t seed = 1; seed <= 5; ++seed)
    auc_null.push_back(benchmark(null_cfg, full, ResampleMethod::smote_plus_cost, seed).auc);
  report(12, "null signal",
         {std::abs(median(auc_null) - 0.5) <= 0.1, "median test AUC " + fmt(median(auc_null)) + " (" + list(auc_null) + ")"},
         failures);

  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
