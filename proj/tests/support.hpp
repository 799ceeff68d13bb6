#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "hetfraud/heterograph.hpp"
#include "hetfraud/ingest.hpp"
#include "hetfraud/matrix.hpp"
#include "hetfraud/random.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("hetfraud_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline hetfraud::DenseMatrix random_matrix(hetfraud::Rng& rng, std::size_t rows, std::size_t cols, double lo = -2.0,
                                           double hi = 2.0) {
  hetfraud::DenseMatrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(lo, hi);
  return m;
}

// Feature table with the given user / merchant keys, timestamps and labels.
inline hetfraud::FeatureTable small_table(const std::vector<std::string>& users,
                                          const std::vector<std::string>& merchants,
                                          const std::vector<double>& times, const std::vector<int>& labels,
                                          const hetfraud::DenseMatrix& features) {
  hetfraud::FeatureTable t;
  for (std::size_t i = 0; i < users.size(); ++i) {
    t.ids.push_back("T" + std::to_string(i));
    t.user_keys.push_back(users[i]);
    t.merchant_keys.push_back(merchants[i]);
  }
  t.timestamps = times;
  t.labels = labels;
  t.features = features;
  for (std::size_t c = 0; c < features.cols(); ++c) t.feature_names.push_back("f" + std::to_string(c));
  return t;
}

// Transactions only, joined by one symmetric relation "link".
inline hetfraud::HeteroGraph link_graph(const hetfraud::DenseMatrix& features, const std::vector<double>& times,
                                        const std::vector<int>& labels,
                                        const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  hetfraud::GraphBuilder b;
  const std::size_t tx = b.add_node_type(hetfraud::kTransactionType, features, times);
  b.set_transaction_type(tx, labels);
  const std::size_t link = b.add_relation("link", tx, tx, "link");
  for (const auto& [u, v] : edges) b.add_edge(link, u, v, std::max(times[u], times[v]));
  return b.build();
}

// Random symmetric transaction graph with no self or repeated pairs.
inline hetfraud::HeteroGraph random_link_graph(hetfraud::Rng& rng, std::size_t n, std::size_t d, double time_span) {
  std::vector<double> times(n);
  for (double& t : times) t = rng.uniform(0.0, time_span);
  std::vector<int> labels(n, 0);
  labels[0] = 1;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.uniform() < 3.0 / static_cast<double>(n)) edges.emplace_back(i, j);
  }
  return link_graph(random_matrix(rng, n, d), times, labels, edges);
}

}  // namespace testing
