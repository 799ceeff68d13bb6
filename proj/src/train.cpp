#include "hetfraud/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "hetfraud/csv.hpp"
#include "hetfraud/error.hpp"
#include "hetfraud/random.hpp"
#include "hetfraud/summation.hpp"
#include "hetfraud/tape.hpp"
#include "hetfraud/text.hpp"

namespace hetfraud {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string optional_number(double v) { return std::isnan(v) ? std::string() : format_double(v); }

double read_optional_number(const std::string& cell, std::string_view context) {
  if (cell.empty()) return kNaN;
  return parse_double(cell, context);
}

std::size_t positives_of(const std::vector<int>& labels, const std::vector<std::size_t>& idx) {
  std::size_t n = 0;
  for (std::size_t i : idx) n += labels[i] == 1 ? 1 : 0;
  return n;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs == 0) throw Error(ErrorKind::config, "epochs must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorKind::config, "learning_rate must be a finite non-negative number");
  }
  double total = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw Error(ErrorKind::config, "split fractions must be non-negative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorKind::config, "split fractions must sum to 1");
  if (!(probability_clamp > 0.0 && probability_clamp < 0.5)) {
    throw Error(ErrorKind::config, "probability_clamp must lie in (0, 0.5)");
  }
  imbalance.validate();
}

TrainConfig TrainConfig::from_config(const KeyValueConfig& cfg) {
  TrainConfig c;
  const long long epochs = cfg.get_int("epochs", static_cast<long long>(c.epochs));
  if (epochs <= 0) throw Error(ErrorKind::config, "epochs must be >= 1");
  c.epochs = static_cast<std::size_t>(epochs);
  c.learning_rate = cfg.get_double("learning_rate", c.learning_rate);
  const std::string opt = cfg.get_string("optimizer", "adam");
  if (opt == "adam") {
    c.optimizer = OptimizerKind::adam;
  } else if (opt == "sgd") {
    c.optimizer = OptimizerKind::sgd;
  } else {
    throw Error(ErrorKind::config, "unknown optimizer '" + opt + "' (adam, sgd)");
  }
  c.beta1 = cfg.get_double("beta1", c.beta1);
  c.beta2 = cfg.get_double("beta2", c.beta2);
  c.epsilon = cfg.get_double("epsilon", c.epsilon);
  c.seed = cfg.get_u64("seed", c.seed);
  c.fractions = {cfg.get_double("train_fraction", c.fractions[0]), cfg.get_double("val_fraction", c.fractions[1]),
                 cfg.get_double("test_fraction", c.fractions[2])};
  c.probability_clamp = cfg.get_double("probability_clamp", c.probability_clamp);
  c.imbalance.method = parse_resample_method(cfg.get_string("imbalance", to_string(c.imbalance.method)));
  const long long k = cfg.get_int("smote_k", static_cast<long long>(c.imbalance.smote_k));
  if (k <= 0) throw Error(ErrorKind::config, "smote_k must be >= 1");
  c.imbalance.smote_k = static_cast<std::size_t>(k);
  c.imbalance.target_ratio = cfg.get_double("target_ratio", c.imbalance.target_ratio);
  c.imbalance.seed = c.seed;
  const long long patience = cfg.get_int("patience", 0);
  if (patience < 0) throw Error(ErrorKind::config, "patience must be >= 0");
  c.patience = static_cast<std::size_t>(patience);
  c.standardize = cfg.get_bool("standardize", c.standardize);
  c.record_timing = cfg.get_bool("record_timing", c.record_timing);
  c.weights_after_resample = cfg.get_bool("weights_after_resample", c.weights_after_resample);
  c.transaction_self = cfg.get_bool("transaction_self", c.transaction_self);
  c.validate();
  return c;
}

void TrainConfig::echo(KeyValueConfig& cfg) const {
  cfg.set("epochs", std::to_string(epochs));
  cfg.set("learning_rate", format_double(learning_rate));
  cfg.set("optimizer", optimizer == OptimizerKind::adam ? "adam" : "sgd");
  cfg.set("beta1", format_double(beta1));
  cfg.set("beta2", format_double(beta2));
  cfg.set("epsilon", format_double(epsilon));
  cfg.set("seed", std::to_string(seed));
  cfg.set("train_fraction", format_double(fractions[0]));
  cfg.set("val_fraction", format_double(fractions[1]));
  cfg.set("test_fraction", format_double(fractions[2]));
  cfg.set("probability_clamp", format_double(probability_clamp));
  cfg.set("imbalance", to_string(imbalance.method));
  cfg.set("smote_k", std::to_string(imbalance.smote_k));
  cfg.set("target_ratio", format_double(imbalance.target_ratio));
  cfg.set("patience", std::to_string(patience));
  cfg.set("standardize", standardize ? "true" : "false");
  cfg.set("record_timing", record_timing ? "true" : "false");
  cfg.set("weights_after_resample", weights_after_resample ? "true" : "false");
  cfg.set("transaction_self", transaction_self ? "true" : "false");
}

double cross_entropy(std::span<const double> p, std::span<const int> labels) {
  if (p.size() != labels.size()) throw Error(ErrorKind::shape, "cross_entropy: lengths differ");
  CompensatedSum total;
  for (std::size_t i = 0; i < p.size(); ++i) total.add(labels[i] ? std::log(p[i]) : std::log(1.0 - p[i]));
  return -total.value();
}

double weighted_bce(std::span<const double> p, std::span<const int> labels, std::span<const double> weights) {
  if (p.size() != labels.size() || p.size() != weights.size()) {
    throw Error(ErrorKind::shape, "weighted_bce: " + std::to_string(p.size()) + " probabilities, " +
                                      std::to_string(labels.size()) + " labels, " + std::to_string(weights.size()) +
                                      " weights");
  }
  CompensatedSum total;
  for (std::size_t i = 0; i < p.size(); ++i) total.add(weights[i] * (labels[i] ? std::log(p[i]) : std::log(1.0 - p[i])));
  return -total.value();
}

std::vector<double> sample_weights(std::span<const int> labels, const ClassWeights& weights) {
  std::vector<double> w(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) w[i] = weights.of(labels[i]);
  return w;
}

double auc_roc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorKind::shape, "auc_roc: lengths differ");
  std::size_t pos = 0;
  for (int y : labels) pos += y == 1 ? 1 : 0;
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) {
    throw Error(ErrorKind::metric, "AUC-ROC needs both classes (" + std::to_string(pos) + " positives, " +
                                       std::to_string(neg) + " negatives)");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Ranks are doubled so tie averages stay integral.
  std::uint64_t doubled_rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const std::uint64_t doubled = i + 1 + j;  // 2 * average of ranks i+1..j
    for (std::size_t m = i; m < j; ++m)
      if (labels[order[m]] == 1) doubled_rank_sum += doubled;
    i = j;
  }
  const double u = (static_cast<double>(doubled_rank_sum) - static_cast<double>(pos) * static_cast<double>(pos + 1)) /
                   2.0;
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

Metrics compute_metrics(std::span<const double> p, std::span<const int> labels) {
  if (p.size() != labels.size()) throw Error(ErrorKind::shape, "metrics: lengths differ");
  if (p.empty()) throw Error(ErrorKind::metric, "metrics over an empty index set");
  Metrics m;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool predicted = p[i] >= 0.5;
    if (labels[i] == 1) {
      ++m.positives;
      predicted ? ++m.tp : ++m.fn;
    } else {
      ++m.negatives;
      predicted ? ++m.fp : ++m.tn;
    }
  }
  m.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(p.size());
  m.auc_roc = auc_roc(p, labels);
  return m;
}

TrainResult train(const HeteroGraph& graph, const ModelConfig& model, const TrainConfig& config, const Split& split) {
  model.validate();
  config.validate();
  const std::vector<int>& labels = graph.labels();
  for (const auto* part : {&split.train, &split.val, &split.test})
    for (std::size_t i : *part)
      if (i >= graph.transaction_count()) throw Error(ErrorKind::training, "split index out of range");
  const std::size_t train_pos = positives_of(labels, split.train);
  if (train_pos == 0 || train_pos == split.train.size()) {
    throw Error(ErrorKind::training, "training split has a single class (" + std::to_string(train_pos) +
                                         " positives of " + std::to_string(split.train.size()) + ")");
  }

  TrainResult result;
  HeteroGraph augmented;
  const HeteroGraph* train_graph = &graph;
  std::vector<std::size_t> train_idx = split.train;
  std::vector<int> original_train_labels;
  for (std::size_t i : split.train) original_train_labels.push_back(labels[i]);

  const ResampleMethod method = config.imbalance.method;
  if (uses_smote(method)) {
    std::vector<std::size_t> minority;
    for (std::size_t i : split.train)
      if (labels[i] == 1) minority.push_back(i);
    const std::size_t n_syn =
        smote_target_count(minority.size(), split.train.size() - minority.size(), config.imbalance.target_ratio);
    const DenseMatrix& x = graph.features(graph.transaction_type());
    DenseMatrix rows(minority.size(), x.cols());
    for (std::size_t i = 0; i < minority.size(); ++i)
      std::copy(x.row(minority[i]).begin(), x.row(minority[i]).end(), rows.row(i).begin());
    SmoteResult syn = smote(rows, config.imbalance.smote_k, n_syn, derive_seed(config.seed, 0x5307e), std::nullopt);
    for (auto& p : syn.provenance) {
      p.base = minority[p.base];
      p.neighbor = minority[p.neighbor];
    }
    augmented = attach_synthetic_nodes(graph, syn.rows, syn.provenance);
    train_graph = &augmented;
    for (std::size_t s = 0; s < n_syn; ++s) train_idx.push_back(graph.transaction_count() + s);
    result.provenance = std::move(syn.provenance);
    if (n_syn == 0) result.notices.push_back("minority already at target ratio; SMOTE added no rows");
  } else if (method == ResampleMethod::undersample) {
    UndersampleResult u =
        undersample(original_train_labels, config.imbalance.target_ratio, derive_seed(config.seed, 0x0dd5));
    std::vector<std::size_t> kept;
    for (std::size_t i : u.kept) kept.push_back(split.train[i]);
    train_idx = std::move(kept);
    if (!u.notice.empty()) result.notices.push_back(u.notice);
  }

  std::vector<int> train_labels;
  for (std::size_t i : train_idx) train_labels.push_back(train_graph->labels()[i]);
  if (uses_class_weights(method)) {
    result.weights = class_weights(config.weights_after_resample ? train_labels : original_train_labels);
  }
  const std::vector<double> weights = sample_weights(train_labels, result.weights);
  result.training_nodes = train_idx.size();

  std::vector<int> val_labels;
  for (std::size_t i : split.val) val_labels.push_back(labels[i]);

  const std::size_t input_dim = graph.features(graph.transaction_type()).cols();
  ParamStore params = init_params(model, graph, input_dim);
  ParamStore best = params;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  const AdamOptions adam{config.learning_rate, config.beta1, config.beta2, config.epsilon};

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    params.zero_grad();
    Tape tape;
    BoundParams bound(tape, params);
    Var probs = model_forward(bound, *train_graph, model);
    Var loss = weighted_bce(gather_rows(probs, train_idx), train_labels, weights);
    const double train_loss = loss.value()(0, 0);
    if (!std::isfinite(train_loss)) {
      throw Error(ErrorKind::training, "non-finite loss at epoch " + std::to_string(epoch));
    }

    double val_loss = kNaN;
    if (!split.val.empty()) {
      std::vector<double> pv;
      if (train_graph == &graph) {
        for (std::size_t i : split.val) pv.push_back(probs.value()(i, 0));
      } else {
        const std::vector<double> all = predict(graph, params, model);
        for (std::size_t i : split.val) pv.push_back(all[i]);
      }
      val_loss = cross_entropy(pv, val_labels);
    }

    // val_loss scores the parameters before this epoch's update.
    const bool early_stopping = config.patience > 0 && !split.val.empty();
    if (early_stopping) {
      if (val_loss < best_val) {
        best_val = val_loss;
        best = params;
        result.best_epoch = epoch;
        since_best = 0;
      } else {
        ++since_best;
      }
    }

    tape.backward(loss);
    if (config.optimizer == OptimizerKind::adam) {
      adam_step(params, adam);
    } else {
      sgd_step(params, config.learning_rate);
    }
    const double seconds =
        config.record_timing
            ? std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()
            : kNaN;
    result.curve.records.push_back({epoch, train_loss, val_loss, seconds});
    if (early_stopping && since_best >= config.patience) break;
  }
  result.params = config.patience > 0 && !split.val.empty() && result.best_epoch > 0 ? best : params;
  if (result.best_epoch == 0) result.best_epoch = result.curve.records.size();
  return result;
}

Metrics evaluate(const ParamStore& params, const HeteroGraph& graph, const ModelConfig& model,
                 const std::vector<std::size_t>& indices) {
  const std::vector<double> all = predict(graph, params, model);
  std::vector<double> p;
  std::vector<int> y;
  for (std::size_t i : indices) {
    if (i >= all.size()) throw Error(ErrorKind::metric, "evaluation index out of range");
    p.push_back(all[i]);
    y.push_back(graph.labels()[i]);
  }
  return compute_metrics(p, y);
}

void write_loss_curve(const LossCurve& curve, std::ostream& out) {
  out << "epoch,train_loss,val_loss,seconds\n";
  for (const auto& r : curve.records) {
    out << r.epoch << ',' << format_double(r.train_loss) << ',' << optional_number(r.val_loss) << ','
        << optional_number(r.seconds) << '\n';
  }
}

void export_loss_curve(const LossCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  write_loss_curve(curve, out);
  if (!out) throw Error(ErrorKind::io, "failed writing " + path.string());
}

LossCurve read_loss_curve(const std::filesystem::path& path) {
  const CsvDocument doc = read_csv(path);
  if (doc.header != std::vector<std::string>{"epoch", "train_loss", "val_loss", "seconds"}) {
    throw Error(ErrorKind::schema, path.string() + ": not a loss curve");
  }
  LossCurve curve;
  for (const auto& row : doc.rows) {
    curve.records.push_back({static_cast<std::size_t>(parse_integer(row[0], "epoch")), parse_double(row[1], "train_loss"),
                             read_optional_number(row[2], "val_loss"), read_optional_number(row[3], "seconds")});
  }
  return curve;
}

void write_metrics(const std::vector<MetricsRow>& rows, std::ostream& out) {
  out << "split,method,accuracy,auc_roc,tp,fp,tn,fn,positives,negatives\n";
  for (const auto& r : rows) {
    const Metrics& m = r.metrics;
    write_csv_row(out, {r.split, r.method, format_double(m.accuracy), format_double(m.auc_roc), std::to_string(m.tp),
                        std::to_string(m.fp), std::to_string(m.tn), std::to_string(m.fn), std::to_string(m.positives),
                        std::to_string(m.negatives)});
  }
}

void export_metrics(const std::vector<MetricsRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  write_metrics(rows, out);
  if (!out) throw Error(ErrorKind::io, "failed writing " + path.string());
}

Standardizer Standardizer::fit(const DenseMatrix& x, const std::vector<std::size_t>& rows) {
  Standardizer s = identity(x.cols());
  if (rows.empty()) return s;
  const auto n = static_cast<double>(rows.size());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    double sum = 0.0;
    for (std::size_t r : rows) sum += x(r, c);
    const double mean = sum / n;
    double sq = 0.0;
    for (std::size_t r : rows) sq += (x(r, c) - mean) * (x(r, c) - mean);
    const double sd = std::sqrt(sq / n);
    s.mean[c] = mean;
    s.scale[c] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

Standardizer Standardizer::identity(std::size_t cols) { return {std::vector<double>(cols, 0.0), std::vector<double>(cols, 1.0)}; }

void Standardizer::apply(DenseMatrix& x) const {
  if (x.cols() != mean.size()) {
    throw Error(ErrorKind::shape, "normalizer has " + std::to_string(mean.size()) + " columns, features have " +
                                      std::to_string(x.cols()));
  }
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) x(r, c) = (x(r, c) - mean[c]) / scale[c];
}

ModelConfig Checkpoint::model_config() const { return ModelConfig::from_config(config); }

void Checkpoint::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << "hetfraud-checkpoint 1\n[config]\n";
  config.write(out);
  out << "[normalizer]\nmean";
  for (double v : normalizer.mean) out << ' ' << format_double(v);
  out << "\nscale";
  for (double v : normalizer.scale) out << ' ' << format_double(v);
  out << "\n[params]\n";
  params.save(out);
  if (!out) throw Error(ErrorKind::io, "failed writing " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open checkpoint " + path.string());
  auto bad = [&](const std::string& what) { return Error(ErrorKind::parse, path.string() + ": " + what); };
  std::string line;
  if (!std::getline(in, line) || line != "hetfraud-checkpoint 1") throw bad("not a hetfraud checkpoint");
  if (!std::getline(in, line) || line != "[config]") throw bad("missing [config] section");
  std::stringstream cfg_text;
  while (std::getline(in, line) && line != "[normalizer]") cfg_text << line << '\n';
  if (line != "[normalizer]") throw bad("missing [normalizer] section");
  Checkpoint ck;
  ck.config = KeyValueConfig::parse(cfg_text, path.string());
  auto read_vector = [&](const std::string& tag) {
    if (!std::getline(in, line)) throw bad("truncated normalizer");
    std::istringstream ls(line);
    std::string head;
    ls >> head;
    if (head != tag) throw bad("expected '" + tag + "' line");
    std::vector<double> v;
    std::string tok;
    while (ls >> tok) v.push_back(parse_double(tok, tag));
    return v;
  };
  ck.normalizer.mean = read_vector("mean");
  ck.normalizer.scale = read_vector("scale");
  if (ck.normalizer.mean.size() != ck.normalizer.scale.size()) throw bad("normalizer lengths differ");
  if (!std::getline(in, line) || line != "[params]") throw bad("missing [params] section");
  ck.params = ParamStore::load(in);
  return ck;
}

}  // namespace hetfraud
