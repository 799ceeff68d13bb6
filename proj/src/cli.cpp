#include "hetfraud/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "hetfraud/csv.hpp"
#include "hetfraud/error.hpp"
#include "hetfraud/experiment.hpp"
#include "hetfraud/ingest.hpp"
#include "hetfraud/random.hpp"
#include "hetfraud/synth.hpp"
#include "hetfraud/text.hpp"
#include "hetfraud/verify.hpp"

namespace hetfraud::cli {

namespace {

const std::vector<std::string> kModelKeys{"layers",         "hidden",    "decay_rate",          "decay_time_unit",
                                          "use_attention",  "use_decay", "use_relation_typing", "leaky_slope"};
const std::vector<std::string> kTrainKeys{"epochs",         "learning_rate",  "optimizer",      "beta1",
                                          "beta2",          "epsilon",        "seed",           "train_fraction",
                                          "val_fraction",   "test_fraction",  "probability_clamp", "imbalance",
                                          "smote_k",        "target_ratio",   "patience",       "standardize",
                                          "record_timing",  "weights_after_resample", "transaction_self"};
const std::vector<std::string> kIngestKeys{
    "transaction_path", "identity_path",  "output",        "metadata",      "id_column",
    "label_column",     "time_column",    "user_key",      "merchant_key",  "numeric_columns",
    "categorical_columns", "drop_columns", "impute",       "knn_k",         "encode",
    "encode_prior",     "missing_drop_threshold", "time_origin", "seed",    "train_fraction",
    "val_fraction",     "test_fraction"};
const std::vector<std::string> kSynthKeys{"n_users",      "n_merchants",  "n_transactions", "fraud_ratio",
                                          "n_rings",      "ring_users",   "ring_merchants", "burst_width",
                                          "feature_dim",  "fraud_shift",  "horizon",        "zipf_exponent",
                                          "seed",         "output",       "rings"};

std::vector<std::string> concat(std::initializer_list<std::vector<std::string>> parts) {
  std::vector<std::string> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::string now_utc() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

void check_keys(const KeyValueConfig& cfg, std::vector<std::string> known) {
  known.push_back("manifest");
  std::vector<std::string> unknown;
  for (const auto& k : cfg.unknown_keys(known))
    if (k.rfind("manifest.", 0) != 0) unknown.push_back(k);
  if (!unknown.empty()) throw Error(ErrorKind::config, "unknown key(s): " + join(unknown, ", "));
}

std::filesystem::path sibling(const std::filesystem::path& p, const std::string& suffix) {
  std::filesystem::path out = p;
  out.replace_filename(p.stem().string() + suffix);
  return out;
}

void ensure_parent(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
}

// Runs body between the initial and final manifest writes.
class ManifestScope {
 public:
  ManifestScope(std::string command, const KeyValueConfig& cfg, std::filesystem::path path,
                std::vector<std::string> artifacts)
      : path_(std::move(path)) {
    manifest_.command = std::move(command);
    manifest_.config = cfg;
    manifest_.config.set("manifest", path_.string());
    manifest_.artifacts = std::move(artifacts);
    manifest_.started = now_utc();
    ensure_parent(path_);
    manifest_.write(path_);
  }
  void add_artifact(const std::string& a) { manifest_.artifacts.push_back(a); }
  void finish() {
    manifest_.finished = now_utc();
    manifest_.write(path_);
  }

 private:
  std::filesystem::path path_;
  RunManifest manifest_;
};

std::string metrics_line(const std::string& split, const Metrics& m) {
  std::ostringstream s;
  s << split << ": accuracy " << std::fixed << std::setprecision(4) << m.accuracy << " auc " << m.auc_roc << " (tp "
    << m.tp << " fp " << m.fp << " tn " << m.tn << " fn " << m.fn << ")";
  return s.str();
}

int cmd_ingest(const KeyValueConfig& cfg, std::ostream& out) {
  check_keys(cfg, kIngestKeys);
  const IngestSettings settings = IngestSettings::from_config(cfg);
  const std::filesystem::path metadata = cfg.get_string("metadata", sibling(settings.output_path, ".meta.txt").string());
  ManifestScope manifest("ingest", cfg, cfg.get_string("manifest", sibling(settings.output_path, ".manifest.txt").string()),
                         {settings.output_path.string(), metadata.string()});
  const IngestResult r = run_ingest(settings);
  ensure_parent(settings.output_path);
  write_feature_table(r.table, settings.output_path);
  write_feature_metadata(r.table, r.state, metadata);
  manifest.finish();
  out << "wrote " << r.table.row_count() << " rows x " << r.table.feature_names.size() << " features to "
      << settings.output_path.string() << "\n";
  for (const auto& w : r.state.imputer.warnings) out << "warning: " << w << "\n";
  return 0;
}

int cmd_synth(const KeyValueConfig& cfg, std::ostream& out) {
  check_keys(cfg, kSynthKeys);
  const SynthConfig sc = SynthConfig::from_config(cfg);
  const std::filesystem::path output = cfg.get_string("output", "synth.csv");
  const std::filesystem::path rings = cfg.get_string("rings", sibling(output, "_rings.csv").string());
  KeyValueConfig resolved = cfg;
  sc.echo(resolved);
  resolved.set("output", output.string());
  resolved.set("rings", rings.string());
  ManifestScope manifest("synth", resolved, cfg.get_string("manifest", sibling(output, ".manifest.txt").string()),
                         {output.string(), rings.string()});
  const SynthOutput s = generate(sc);
  ensure_parent(output);
  write_feature_table(s.table, output);
  ensure_parent(rings);
  write_ring_csv(s, rings);
  manifest.finish();
  out << "wrote " << s.table.row_count() << " transactions to " << output.string() << "\n" << describe(sc).format();
  return 0;
}

struct RunArtifacts {
  std::filesystem::path dir;
  std::filesystem::path checkpoint() const { return dir / "checkpoint.txt"; }
  std::filesystem::path loss_curve() const { return dir / "loss_curve.csv"; }
  std::filesystem::path metrics() const { return dir / "metrics.csv"; }
  std::filesystem::path provenance() const { return dir / "smote_provenance.csv"; }
};

int cmd_train(const KeyValueConfig& cfg, std::ostream& out) {
  check_keys(cfg, concat({kModelKeys, kTrainKeys, {"features", "output_dir"}}));
  const ModelConfig model = ModelConfig::from_config(cfg);
  const TrainConfig train_cfg = TrainConfig::from_config(cfg);
  const std::filesystem::path features = cfg.get_string("features", "features.csv");
  const RunArtifacts a{cfg.get_string("output_dir", "run")};
  KeyValueConfig resolved = cfg;
  model.echo(resolved);
  train_cfg.echo(resolved);
  resolved.set("features", features.string());
  resolved.set("output_dir", a.dir.string());
  std::filesystem::create_directories(a.dir);
  ManifestScope manifest("train", resolved, cfg.get_string("manifest", (a.dir / "manifest.txt").string()),
                         {a.checkpoint().string(), a.loss_curve().string(), a.metrics().string()});

  const FeatureTable table = read_feature_table(features);
  const ExperimentResult r = run_experiment(table, model, train_cfg);
  make_checkpoint(r, model, train_cfg).save(a.checkpoint());
  export_loss_curve(r.trained.curve, a.loss_curve());
  export_metrics(r.metrics, a.metrics());
  if (!r.trained.provenance.empty()) {
    write_provenance_csv(r.trained.provenance, a.provenance());
    manifest.add_artifact(a.provenance().string());
  }
  manifest.finish();
  for (const auto& n : r.trained.notices) out << "notice: " << n << "\n";
  out << "trained " << r.trained.curve.records.size() << " epochs on " << r.trained.training_nodes
      << " transaction nodes (" << to_string(train_cfg.imbalance.method) << ")\n";
  for (const auto& row : r.metrics) out << metrics_line(row.split, row.metrics) << "\n";
  return 0;
}

int cmd_evaluate(const KeyValueConfig& cfg, std::ostream& out) {
  check_keys(cfg, {"checkpoint", "features", "output"});
  const std::filesystem::path ck_path = cfg.get_string("checkpoint", "run/checkpoint.txt");
  const std::filesystem::path features = cfg.get_string("features", "features.csv");
  const std::filesystem::path output = cfg.get_string("output", "metrics_eval.csv");
  ManifestScope manifest("evaluate", cfg, cfg.get_string("manifest", sibling(output, ".manifest.txt").string()),
                         {output.string()});
  const Checkpoint ck = Checkpoint::load(ck_path);
  const ModelConfig model = ck.model_config();
  const TrainConfig tc = TrainConfig::from_config(ck.config);
  const FeatureTable table = read_feature_table(features);
  const Split split = stratified_split(table.labels, tc.fractions, tc.seed);
  const HeteroGraph graph = prepare_graph(table, ck.normalizer, tc.transaction_self);
  std::vector<MetricsRow> rows;
  const std::pair<const char*, const std::vector<std::size_t>*> parts[] = {
      {"train", &split.train}, {"val", &split.val}, {"test", &split.test}};
  for (const auto& [name, idx] : parts) {
    if (idx->empty()) continue;
    rows.push_back({name, to_string(tc.imbalance.method), evaluate(ck.params, graph, model, *idx)});
  }
  ensure_parent(output);
  export_metrics(rows, output);
  manifest.finish();
  for (const auto& row : rows) out << metrics_line(row.split, row.metrics) << "\n";
  return 0;
}

struct AblationRow {
  std::string model;
  std::string analogue;
  bool attention, typing, decay;
  Metrics test;
  std::size_t params;
};

std::string variant_name(bool attention, bool typing, bool decay) {
  std::vector<std::string> off;
  if (!attention) off.push_back("no_attention");
  if (!typing) off.push_back("no_relation_typing");
  if (!decay) off.push_back("no_decay");
  return off.empty() ? "full" : join(off, "+");
}

std::string analogue(bool attention, bool typing, bool decay) {
  if (decay) return attention && typing ? "full model" : "-";
  if (attention && !typing) return "GAT-like";
  if (!attention && typing) return "R-GCN-like";
  if (!attention && !typing) return "GCN-like (mean)";
  return "-";
}

int cmd_ablate(const KeyValueConfig& cfg, std::ostream& out) {
  check_keys(cfg, concat({kModelKeys, kTrainKeys, {"features", "output"}}));
  const ModelConfig base = ModelConfig::from_config(cfg);
  const TrainConfig tc = TrainConfig::from_config(cfg);
  const std::filesystem::path features = cfg.get_string("features", "features.csv");
  const std::filesystem::path output = cfg.get_string("output", "ablation.csv");
  KeyValueConfig resolved = cfg;
  base.echo(resolved);
  tc.echo(resolved);
  resolved.set("features", features.string());
  resolved.set("output", output.string());
  ManifestScope manifest("ablate", resolved, cfg.get_string("manifest", sibling(output, ".manifest.txt").string()),
                         {output.string()});
  const FeatureTable table = read_feature_table(features);
  std::vector<AblationRow> rows;
  for (int cell = 0; cell < 8; ++cell) {
    ModelConfig m = base;
    m.use_attention = (cell & 4) == 0;
    m.use_relation_typing = (cell & 2) == 0;
    m.use_decay = (cell & 1) == 0;
    const ExperimentResult r = run_experiment(table, m, tc);
    rows.push_back({variant_name(m.use_attention, m.use_relation_typing, m.use_decay),
                    analogue(m.use_attention, m.use_relation_typing, m.use_decay), m.use_attention,
                    m.use_relation_typing, m.use_decay, r.split_metrics("test"), describe(r.trained.params).total});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const AblationRow& a, const AblationRow& b) { return a.test.auc_roc > b.test.auc_roc; });
  ensure_parent(output);
  std::ofstream f(output, std::ios::binary);
  if (!f) throw Error(ErrorKind::io, "cannot write " + output.string());
  f << "model,analogue,use_attention,use_relation_typing,use_decay,accuracy,auc_roc,params\n";
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  for (const auto& r : rows) {
    write_csv_row(f, {r.model, r.analogue, b(r.attention), b(r.typing), b(r.decay), format_double(r.test.accuracy),
                      format_double(r.test.auc_roc), std::to_string(r.params)});
    out << std::left << std::setw(44) << r.model << " acc " << std::fixed << std::setprecision(4) << r.test.accuracy
        << " auc " << r.test.auc_roc << " params " << r.params << "\n";
  }
  f.close();
  if (!f) throw Error(ErrorKind::io, "failed writing " + output.string());
  manifest.finish();
  return 0;
}

int cmd_score(const KeyValueConfig& cfg, std::ostream& out) {
  check_keys(cfg, {"checkpoint", "input", "context", "output"});
  const std::filesystem::path ck_path = cfg.get_string("checkpoint", "run/checkpoint.txt");
  const std::filesystem::path input = cfg.get_string("input", "features.csv");
  const std::filesystem::path output = cfg.get_string("output", "scores.csv");
  ManifestScope manifest("score", cfg, cfg.get_string("manifest", sibling(output, ".manifest.txt").string()),
                         {output.string()});
  const Checkpoint ck = Checkpoint::load(ck_path);
  const ModelConfig model = ck.model_config();
  const TrainConfig tc = TrainConfig::from_config(ck.config);
  const FeatureTable batch = read_feature_table(input);
  auto check_dim = [&](const FeatureTable& t, const std::filesystem::path& p) {
    if (t.features.cols() != ck.normalizer.mean.size()) {
      throw Error(ErrorKind::shape, p.string() + " has " + std::to_string(t.features.cols()) +
                                        " features, checkpoint expects " + std::to_string(ck.normalizer.mean.size()));
    }
  };
  check_dim(batch, input);
  FeatureTable table = batch;
  std::size_t offset = 0;
  if (const auto context = cfg.find("context")) {
    const FeatureTable ctx = read_feature_table(*context);
    check_dim(ctx, *context);
    const std::unordered_set<std::string> ids(batch.ids.begin(), batch.ids.end());
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < ctx.row_count(); ++i)
      if (!ids.count(ctx.ids[i])) keep.push_back(i);
    table = ctx.select_rows(keep).append(batch);
    offset = keep.size();
  }
  std::vector<double> p;
  if (batch.row_count() > 0) p = predict(prepare_graph(table, ck.normalizer, tc.transaction_self), ck.params, model);
  ensure_parent(output);
  std::ofstream f(output, std::ios::binary);
  if (!f) throw Error(ErrorKind::io, "cannot write " + output.string());
  f << "transaction_id,score\n";
  for (std::size_t i = 0; i < batch.row_count(); ++i) write_csv_row(f, {batch.ids[i], format_double(p[offset + i])});
  f.close();
  if (!f) throw Error(ErrorKind::io, "failed writing " + output.string());
  manifest.finish();
  out << "scored " << batch.row_count() << " transactions to " << output.string() << "\n";
  return 0;
}

int cmd_gradcheck(const KeyValueConfig& cfg, std::ostream& out) {
  check_keys(cfg, {"graphs", "seed", "hidden", "layers", "max_nodes", "step", "tolerance"});
  const long long graphs = cfg.get_int("graphs", 10);
  const std::uint64_t seed = cfg.get_u64("seed", 1);
  const double step = cfg.get_double("step", 1e-5);
  const double tol = cfg.get_double("tolerance", 1e-5);
  ModelConfig m;
  m.hidden = static_cast<std::size_t>(cfg.get_int("hidden", 8));
  m.layers = static_cast<std::size_t>(cfg.get_int("layers", 2));
  RandomGraphOptions opts;
  opts.max_nodes = static_cast<std::size_t>(cfg.get_int("max_nodes", 50));
  bool ok = true;
  for (const auto& r : primitive_gradchecks(seed, step, tol)) {
    ok = ok && r.report.passed;
    out << (r.report.passed ? "ok   " : "FAIL ") << std::left << std::setw(16) << r.name << " max rel err "
        << std::scientific << std::setprecision(2) << r.report.max_relative_error << "\n";
  }
  for (long long g = 0; g < graphs; ++g) {
    const HeteroGraph graph = random_graph(derive_seed(seed, static_cast<std::uint64_t>(g)), opts);
    m.seed = derive_seed(seed, 1000 + static_cast<std::uint64_t>(g));
    const GradCheckReport r = model_gradcheck(graph, m, step, tol);
    ok = ok && r.passed;
    out << (r.passed ? "ok   " : "FAIL ") << "model graph " << g << " (" << graph.total_nodes() << " nodes, "
        << graph.relation_count() << " relations) max rel err " << std::scientific << std::setprecision(2)
        << r.max_relative_error << " at " << r.worst.parameter << "[" << r.worst.index << "]\n";
  }
  out << (ok ? "gradient check passed\n" : "gradient check FAILED\n");
  return ok ? 0 : 1;
}

const std::map<std::string, std::string>& key_help() {
  static const std::map<std::string, std::string> help{
      {"ingest", "keys: " + join(kIngestKeys, ", ")},
      {"synth", "keys: " + join(kSynthKeys, ", ")},
      {"train", "keys: features, output_dir, " + join(kModelKeys, ", ") + ", " + join(kTrainKeys, ", ")},
      {"evaluate", "keys: checkpoint, features, output"},
      {"ablate", "keys: features, output, " + join(kModelKeys, ", ") + ", " + join(kTrainKeys, ", ")},
      {"score", "keys: checkpoint, input, context, output"},
      {"gradcheck", "keys: graphs, seed, hidden, layers, max_nodes, step, tolerance"},
  };
  return help;
}

}  // namespace

void RunManifest::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write manifest " + path.string());
  KeyValueConfig all = config;
  all.set("manifest.command", command);
  all.set("manifest.version", kVersion);
  all.set("manifest.artifacts", join(artifacts, ","));
  all.set("manifest.started", started);
  all.set("manifest.finished", finished);
  out << "# hetfraud run manifest\n";
  all.write(out);
  if (!out) throw Error(ErrorKind::io, "failed writing manifest " + path.string());
}

KeyValueConfig resolve_config(const std::string& config_path, const std::vector<std::string>& overrides) {
  KeyValueConfig cfg = config_path.empty() ? KeyValueConfig{} : KeyValueConfig::load(config_path);
  for (std::size_t i = 0; i < overrides.size(); ++i) {
    const std::string& tok = overrides[i];
    if (tok.size() < 3 || tok.rfind("--", 0) != 0) {
      throw Error(ErrorKind::usage, "unexpected argument '" + tok + "' (overrides are --key value)");
    }
    std::string key = tok.substr(2), value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    } else {
      if (i + 1 >= overrides.size()) throw Error(ErrorKind::config, "missing value for --" + key);
      value = overrides[++i];
    }
    std::replace(key.begin(), key.end(), '-', '_');
    cfg.set(key, value);
  }
  return cfg;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Heterogeneous graph attention with temporal decay for transaction fraud detection"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  const std::vector<std::pair<std::string, std::string>> commands{
      {"ingest", "raw transaction/identity CSV -> feature table"},
      {"synth", "generate a synthetic transaction network with fraud rings"},
      {"train", "train on a feature table; writes checkpoint, loss curve, metrics"},
      {"evaluate", "re-evaluate a checkpoint on every split of a feature table"},
      {"ablate", "attention x relation typing x decay ablation table"},
      {"score", "score transactions with a checkpoint"},
      {"gradcheck", "finite-difference verification of every primitive and the full model"},
  };
  std::map<std::string, std::string> config_paths;
  for (const auto& [name, description] : commands) {
    CLI::App* sub = app.add_subcommand(name, description);
    sub->add_option("-c,--config", config_paths[name], "key = value config file");
    sub->allow_extras();
    sub->footer("Any key can be given as --key value (CLI > config file > default).\n" + key_help().at(name));
  }
  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? 0 : 3;
    }
    for (const auto& [name, description] : commands) {
      CLI::App* sub = app.get_subcommand(name);
      if (!sub->parsed()) continue;
      const KeyValueConfig cfg = resolve_config(config_paths[name], sub->remaining());
      if (name == "ingest") return cmd_ingest(cfg, out);
      if (name == "synth") return cmd_synth(cfg, out);
      if (name == "train") return cmd_train(cfg, out);
      if (name == "evaluate") return cmd_evaluate(cfg, out);
      if (name == "ablate") return cmd_ablate(cfg, out);
      if (name == "score") return cmd_score(cfg, out);
      if (name == "gradcheck") return cmd_gradcheck(cfg, out);
    }
    return 3;
  } catch (const Error& e) {
    err << "hetfraud: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "hetfraud: io error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "hetfraud: internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace hetfraud::cli
