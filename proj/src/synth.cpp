#include "hetfraud/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hetfraud/error.hpp"
#include "hetfraud/random.hpp"
#include "hetfraud/text.hpp"

namespace hetfraud {

namespace {

std::size_t positive_count(const KeyValueConfig& cfg, const std::string& key, std::size_t fallback) {
  const long long v = cfg.get_int(key, static_cast<long long>(fallback));
  if (v <= 0) throw Error(ErrorKind::config, key + " must be a positive integer");
  return static_cast<std::size_t>(v);
}

// Cumulative Zipf weights over popularity ranks.
std::vector<double> zipf_cdf(std::size_t n, double exponent) {
  std::vector<double> cdf(n);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    total += 1.0 / std::pow(static_cast<double>(k + 1), exponent);
    cdf[k] = total;
  }
  for (double& c : cdf) c /= total;
  return cdf;
}

std::size_t draw_rank(Rng& rng, const std::vector<double>& cdf) {
  const double u = rng.uniform();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return std::min(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

std::string padded(char prefix, std::size_t value, std::size_t total) {
  const std::size_t width = std::to_string(total).size();
  std::string digits = std::to_string(value);
  return prefix + std::string(width - std::min(width, digits.size()), '0') + digits;
}

}  // namespace

std::size_t SynthConfig::fraud_count() const {
  return static_cast<std::size_t>(std::llround(fraud_ratio * static_cast<double>(n_transactions)));
}

void SynthConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::data, "infeasible synth config: " + what); };
  if (n_users == 0 || n_merchants == 0 || n_transactions == 0) fail("population sizes must be positive");
  if (!(fraud_ratio > 0.0 && fraud_ratio < 1.0)) fail("fraud_ratio must lie in (0, 1)");
  if (n_rings == 0 || ring_users == 0 || ring_merchants == 0) fail("rings need at least one user and one merchant");
  if (n_rings * ring_users > n_users) {
    fail(std::to_string(n_rings) + " rings of " + std::to_string(ring_users) + " users exceed " +
         std::to_string(n_users) + " users");
  }
  if (n_rings * ring_merchants > n_merchants) {
    fail(std::to_string(n_rings) + " rings of " + std::to_string(ring_merchants) + " merchants exceed " +
         std::to_string(n_merchants) + " merchants");
  }
  const std::size_t fraud = fraud_count();
  if (fraud == 0 || fraud >= n_transactions) {
    fail("fraud count round(" + format_double(fraud_ratio) + " * " + std::to_string(n_transactions) + ") = " +
         std::to_string(fraud) + " leaves a single class");
  }
  if (fraud < n_rings) fail("fewer fraud transactions than rings");
  if (feature_dim == 0) fail("feature_dim must be positive");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) fail("horizon must be positive");
  if (!(burst_width >= 0.0) || !std::isfinite(burst_width)) fail("burst_width must be >= 0");
  if (!(zipf_exponent >= 0.0)) fail("zipf_exponent must be >= 0");
  if (!std::isfinite(fraud_shift)) fail("fraud_shift must be finite");
}

SynthConfig SynthConfig::from_config(const KeyValueConfig& cfg) {
  SynthConfig c;
  c.n_users = positive_count(cfg, "n_users", c.n_users);
  c.n_merchants = positive_count(cfg, "n_merchants", c.n_merchants);
  c.n_transactions = positive_count(cfg, "n_transactions", c.n_transactions);
  c.fraud_ratio = cfg.get_double("fraud_ratio", c.fraud_ratio);
  c.n_rings = positive_count(cfg, "n_rings", c.n_rings);
  c.ring_users = positive_count(cfg, "ring_users", c.ring_users);
  c.ring_merchants = positive_count(cfg, "ring_merchants", c.ring_merchants);
  c.burst_width = cfg.get_double("burst_width", c.burst_width);
  c.feature_dim = positive_count(cfg, "feature_dim", c.feature_dim);
  c.fraud_shift = cfg.get_double("fraud_shift", c.fraud_shift);
  c.horizon = cfg.get_double("horizon", c.horizon);
  c.zipf_exponent = cfg.get_double("zipf_exponent", c.zipf_exponent);
  c.seed = cfg.get_u64("seed", c.seed);
  c.validate();
  return c;
}

void SynthConfig::echo(KeyValueConfig& cfg) const {
  cfg.set("n_users", std::to_string(n_users));
  cfg.set("n_merchants", std::to_string(n_merchants));
  cfg.set("n_transactions", std::to_string(n_transactions));
  cfg.set("fraud_ratio", format_double(fraud_ratio));
  cfg.set("n_rings", std::to_string(n_rings));
  cfg.set("ring_users", std::to_string(ring_users));
  cfg.set("ring_merchants", std::to_string(ring_merchants));
  cfg.set("burst_width", format_double(burst_width));
  cfg.set("feature_dim", std::to_string(feature_dim));
  cfg.set("fraud_shift", format_double(fraud_shift));
  cfg.set("horizon", format_double(horizon));
  cfg.set("zipf_exponent", format_double(zipf_exponent));
  cfg.set("seed", std::to_string(seed));
}

SynthLayout synth_layout(const SynthConfig& config) {
  config.validate();
  Rng rng(derive_seed(config.seed, 1));
  SynthLayout layout;
  layout.user_by_rank.resize(config.n_users);
  std::iota(layout.user_by_rank.begin(), layout.user_by_rank.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(layout.user_by_rank));
  layout.merchant_by_rank.resize(config.n_merchants);
  std::iota(layout.merchant_by_rank.begin(), layout.merchant_by_rank.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(layout.merchant_by_rank));

  std::vector<std::size_t> dims(config.feature_dim);
  std::iota(dims.begin(), dims.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(dims));
  dims.resize(std::max<std::size_t>(1, config.feature_dim / 4));
  std::sort(dims.begin(), dims.end());
  layout.shifted_dims = dims;

  // Ring members come from the unpopular tail so that ring neighborhoods
  // are dominated by ring activity.
  const double width = std::min(config.burst_width, config.horizon);
  const std::size_t fraud = config.fraud_count();
  for (std::size_t r = 0; r < config.n_rings; ++r) {
    RingInfo ring;
    ring.id = r;
    for (std::size_t j = 0; j < config.ring_users; ++j)
      ring.users.push_back(layout.user_by_rank[config.n_users - 1 - (r * config.ring_users + j)]);
    for (std::size_t j = 0; j < config.ring_merchants; ++j)
      ring.merchants.push_back(layout.merchant_by_rank[config.n_merchants - 1 - (r * config.ring_merchants + j)]);
    ring.burst_center = rng.uniform(width / 2.0, config.horizon - width / 2.0);
    ring.fraud_count = fraud / config.n_rings + (r < fraud % config.n_rings ? 1 : 0);
    layout.rings.push_back(std::move(ring));
  }
  return layout;
}

SynthOutput generate(const SynthConfig& config) {
  SynthOutput out;
  out.layout = synth_layout(config);
  const std::size_t n = config.n_transactions;
  const std::size_t fraud = config.fraud_count();
  const double width = std::min(config.burst_width, config.horizon);
  const auto user_cdf = zipf_cdf(config.n_users, config.zipf_exponent);
  const auto merchant_cdf = zipf_cdf(config.n_merchants, config.zipf_exponent);

  struct Row {
    double timestamp;
    std::size_t user;
    std::size_t merchant;
    int ring;
    std::vector<double> features;
  };
  std::vector<Row> rows(n);
  Rng rng(derive_seed(config.seed, 2));
  for (std::size_t i = 0; i < n; ++i) {
    Row& row = rows[i];
    row.features.resize(config.feature_dim);
    for (double& v : row.features) v = rng.normal();
    if (i < fraud) {
      const RingInfo& ring = out.layout.rings[i % config.n_rings];
      row.ring = static_cast<int>(ring.id);
      row.user = ring.users[rng.below(ring.users.size())];
      row.merchant = ring.merchants[rng.below(ring.merchants.size())];
      const double offset = width > 0.0 ? rng.uniform(-width / 2.0, width / 2.0) : 0.0;
      row.timestamp = std::clamp(ring.burst_center + offset, 0.0, config.horizon);
      for (std::size_t d : out.layout.shifted_dims) row.features[d] += config.fraud_shift;
    } else {
      row.ring = -1;
      row.user = out.layout.user_by_rank[draw_rank(rng, user_cdf)];
      row.merchant = out.layout.merchant_by_rank[draw_rank(rng, merchant_cdf)];
      row.timestamp = rng.uniform(0.0, config.horizon);
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.timestamp < b.timestamp; });

  FeatureTable& t = out.table;
  for (std::size_t d = 0; d < config.feature_dim; ++d) t.feature_names.push_back("f" + std::to_string(d));
  t.features = DenseMatrix(n, config.feature_dim);
  for (std::size_t i = 0; i < n; ++i) {
    const Row& row = rows[i];
    t.ids.push_back(padded('T', i + 1, n));
    t.labels.push_back(row.ring >= 0 ? 1 : 0);
    t.timestamps.push_back(row.timestamp);
    t.user_keys.push_back(padded('u', row.user, config.n_users));
    t.merchant_keys.push_back(padded('m', row.merchant, config.n_merchants));
    std::copy(row.features.begin(), row.features.end(), t.features.row(i).begin());
    out.ring.push_back(row.ring);
  }
  t.validate();
  return out;
}

SynthDescription describe(const SynthConfig& config) {
  SynthLayout layout = synth_layout(config);
  SynthDescription d;
  d.transactions = config.n_transactions;
  d.fraud = config.fraud_count();
  const auto n = static_cast<double>(config.n_transactions);
  d.mean_transactions_per_user = n / static_cast<double>(config.n_users);
  d.mean_transactions_per_merchant = n / static_cast<double>(config.n_merchants);
  d.bipartite_density = std::min(1.0, n / (static_cast<double>(config.n_users) * static_cast<double>(config.n_merchants)));
  d.shifted_dims = layout.shifted_dims;
  d.rings = std::move(layout.rings);
  return d;
}

std::string SynthDescription::format() const {
  std::ostringstream out;
  out << "transactions " << transactions << "\n";
  out << "fraud " << fraud << "\n";
  out << "mean transactions per user " << format_double(mean_transactions_per_user) << "\n";
  out << "mean transactions per merchant " << format_double(mean_transactions_per_merchant) << "\n";
  out << "user-merchant density bound " << format_double(bipartite_density) << "\n";
  out << "shifted dims";
  for (std::size_t dim : shifted_dims) out << ' ' << dim;
  out << "\nring,users,merchants,burst_center,fraud\n";
  auto list = [](const std::vector<std::size_t>& v) {
    std::vector<std::string> s;
    for (std::size_t x : v) s.push_back(std::to_string(x));
    return join(s, " ");
  };
  for (const auto& r : rings) {
    out << r.id << ',' << list(r.users) << ',' << list(r.merchants) << ',' << format_double(r.burst_center) << ','
        << r.fraud_count << "\n";
  }
  return out.str();
}

void write_ring_csv(const SynthOutput& output, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << "transaction_id,ring\n";
  for (std::size_t i = 0; i < output.ring.size(); ++i) out << output.table.ids[i] << ',' << output.ring[i] << '\n';
  if (!out) throw Error(ErrorKind::io, "failed writing " + path.string());
}

}  // namespace hetfraud
