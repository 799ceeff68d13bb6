#include "hetfraud/verify.hpp"

#include <algorithm>

#include "hetfraud/imbalance.hpp"
#include "hetfraud/random.hpp"
#include "hetfraud/tape.hpp"

namespace hetfraud {

namespace {

DenseMatrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  DenseMatrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(-2.0, 2.0);
  return m;
}

// Scalar probe sum(scale_rows(y, c) R) with fixed random c and R.
Var project(Var y, std::uint64_t seed) {
  Rng rng(seed);
  DenseMatrix c(y.rows(), 1), r(y.cols(), 2);
  for (double& v : c.values()) v = rng.uniform(0.5, 1.5);
  for (double& v : r.values()) v = rng.uniform(-1.0, 1.0);
  Tape& t = y.tape();
  return sum(matmul(scale_rows(y, t.constant(c)), t.constant(r)));
}

}  // namespace

HeteroGraph random_graph(std::uint64_t seed, const RandomGraphOptions& options) {
  Rng rng(seed);
  const std::size_t max_nodes = std::max<std::size_t>(options.max_nodes, 6);
  const std::size_t n_users = options.users ? 1 + rng.below(std::max<std::size_t>(1, max_nodes / 5)) : 0;
  const std::size_t n_merchants = options.merchants ? 1 + rng.below(std::max<std::size_t>(1, max_nodes / 8)) : 0;
  const std::size_t room = max_nodes - n_users - n_merchants;
  const std::size_t n_tx = std::max<std::size_t>(2, room / 2 + rng.below(room - room / 2 + 1));
  const std::size_t d = options.feature_dim;

  GraphBuilder b;
  std::vector<double> times(n_tx);
  for (double& t : times) t = rng.uniform(0.0, options.time_span);
  const std::size_t tx = b.add_node_type(kTransactionType, random_matrix(rng, n_tx, d), times);
  std::vector<int> labels(n_tx);
  for (int& y : labels) y = rng.uniform() < 0.3 ? 1 : 0;
  labels[0] = 1;
  labels[1] = 0;
  b.set_transaction_type(tx, labels);
  if (options.users) {
    const std::size_t u = b.add_node_type(kUserType, DenseMatrix(n_users, d), std::vector<double>(n_users, 0.0));
    const std::size_t makes = b.add_relation("makes", u, tx, "made_by");
    for (std::size_t i = 0; i < n_tx; ++i) b.add_edge(makes, rng.below(n_users), i, times[i]);
  }
  if (options.merchants) {
    const std::size_t m =
        b.add_node_type(kMerchantType, DenseMatrix(n_merchants, d), std::vector<double>(n_merchants, 0.0));
    const std::size_t at = b.add_relation("at", tx, m, "hosts");
    for (std::size_t i = 0; i < n_tx; ++i) b.add_edge(at, i, rng.below(n_merchants), times[i]);
  }
  if (options.devices) {
    const std::size_t dev = b.add_relation("shares_device", tx, tx, "shares_device");
    std::vector<std::pair<std::size_t, std::size_t>> seen;
    for (std::size_t i = 0; i < n_tx; ++i) {
      const std::size_t j = rng.below(n_tx);
      const std::pair<std::size_t, std::size_t> key{std::min(i, j), std::max(i, j)};
      if (i == j || std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
      seen.push_back(key);
      b.add_edge(dev, i, j, std::max(times[i], times[j]));
    }
  }
  b.derive_entity_state();
  HeteroGraph g = b.build();
  validate(g);
  return g;
}

GradCheckReport model_gradcheck(const HeteroGraph& graph, const ModelConfig& config, double step, double tolerance) {
  const std::size_t d = graph.features(graph.transaction_type()).cols();
  ParamStore params = init_params(config, graph, d);
  const std::vector<int>& labels = graph.labels();
  const ClassWeights cw = class_weights(labels);
  std::vector<double> w;
  for (int y : labels) w.push_back(cw.of(y));
  return grad_check(
      [&](Tape& tape, ParamStore& p) {
        BoundParams bound(tape, p);
        return weighted_bce(model_forward(bound, graph, config), labels, w);
      },
      params, step, tolerance);
}

std::vector<NamedReport> primitive_gradchecks(std::uint64_t seed, double step, double tolerance) {
  Rng rng(seed);
  std::vector<NamedReport> out;
  auto check = [&](const std::string& name, std::vector<std::pair<std::string, DenseMatrix>> inputs,
                   const std::function<Var(const std::vector<Var>&)>& op) {
    ParamStore store(seed);
    for (auto& [n, m] : inputs) store.add(n, m);
    const std::uint64_t probe_seed = rng.next();
    GradCheckReport r = grad_check(
        [&](Tape& tape, ParamStore& p) {
          std::vector<Var> vars;
          for (auto& param : p.params()) vars.push_back(tape.parameter(param));
          return project(op(vars), probe_seed);
        },
        store, step, tolerance);
    out.push_back({name, r});
  };
  const std::vector<std::size_t> idx{0, 2, 2, 1, 3};
  const std::vector<std::size_t> seg{0, 1, 1, 2, 2};

  check("matmul", {{"a", random_matrix(rng, 3, 4)}, {"b", random_matrix(rng, 4, 2)}},
        [](const std::vector<Var>& v) { return matmul(v[0], v[1]); });
  check("add", {{"a", random_matrix(rng, 3, 2)}, {"b", random_matrix(rng, 3, 2)}},
        [](const std::vector<Var>& v) { return add(v[0], v[1]); });
  check("add_row", {{"x", random_matrix(rng, 4, 3)}, {"b", random_matrix(rng, 1, 3)}},
        [](const std::vector<Var>& v) { return add_row(v[0], v[1]); });
  check("leaky_relu", {{"x", random_matrix(rng, 4, 3)}},
        [](const std::vector<Var>& v) { return leaky_relu(v[0], 0.2); });
  check("relu", {{"x", random_matrix(rng, 4, 3)}}, [](const std::vector<Var>& v) { return relu(v[0]); });
  check("sigmoid", {{"x", random_matrix(rng, 4, 3)}}, [](const std::vector<Var>& v) { return sigmoid(v[0]); });
  check("concat_cols", {{"a", random_matrix(rng, 3, 2)}, {"b", random_matrix(rng, 3, 1)}},
        [](const std::vector<Var>& v) { return concat_cols(v[0], v[1]); });
  check("concat_rows", {{"a", random_matrix(rng, 2, 3)}, {"b", random_matrix(rng, 1, 3)}},
        [](const std::vector<Var>& v) { return concat_rows({v[0], v[1]}); });
  check("scale_rows", {{"x", random_matrix(rng, 4, 3)}, {"c", random_matrix(rng, 4, 1)}},
        [](const std::vector<Var>& v) { return scale_rows(v[0], v[1]); });
  check("gather_rows", {{"x", random_matrix(rng, 4, 3)}},
        [&](const std::vector<Var>& v) { return gather_rows(v[0], idx); });
  check("segment_sum", {{"x", random_matrix(rng, 5, 2)}},
        [&](const std::vector<Var>& v) { return segment_sum(v[0], seg, 3); });
  check("segment_softmax", {{"s", random_matrix(rng, 5, 1)}},
        [&](const std::vector<Var>& v) { return segment_softmax(v[0], seg, 3); });
  check("sum", {{"x", random_matrix(rng, 3, 3)}}, [](const std::vector<Var>& v) { return sum(v[0]); });
  check("clamp", {{"x", random_matrix(rng, 4, 3)}}, [](const std::vector<Var>& v) { return clamp(v[0], -1.0, 1.0); });
  {
    const std::vector<int> y{1, 0, 0, 1, 0};
    const std::vector<double> w{2.5, 0.625, 0.625, 2.5, 0.625};
    check("weighted_bce", {{"x", random_matrix(rng, 5, 1)}},
          [&](const std::vector<Var>& v) { return weighted_bce(sigmoid(v[0]), y, w); });
  }
  return out;
}

}  // namespace hetfraud
