#include "hetfraud/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "hetfraud/error.hpp"
#include "hetfraud/random.hpp"

namespace hetfraud {

namespace {

std::array<std::size_t, 3> apportion(std::size_t n, const std::array<double, 3>& fractions) {
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = fractions[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainder[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return remainder[a] > remainder[b]; });
  for (int i = 0; assigned < n; i = (i + 1) % 3) {
    if (fractions[order[i]] > 0.0) {
      ++counts[order[i]];
      ++assigned;
    }
  }
  return counts;
}

}  // namespace

Split stratified_split(const std::vector<int>& labels, const std::array<double, 3>& fractions, std::uint64_t seed) {
  double total = 0.0;
  for (double f : fractions) {
    if (f < 0.0) throw Error(ErrorKind::config, "split fractions must be non-negative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorKind::config, "split fractions must sum to 1");

  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw Error(ErrorKind::data, "labels must be 0/1");
    by_class[labels[i]].push_back(i);
  }
  const int minority = by_class[1].size() <= by_class[0].size() ? 1 : 0;
  const int majority = 1 - minority;

  const auto totals = apportion(labels.size(), fractions);
  const auto minor = apportion(by_class[minority].size(), fractions);
  std::array<std::size_t, 3> major{};
  for (int i = 0; i < 3; ++i) {
    if (minor[i] > totals[i]) throw Error(ErrorKind::split, "cannot stratify: split " + std::to_string(i) + " too small");
    major[i] = totals[i] - minor[i];
  }
  static const char* names[] = {"train", "val", "test"};
  for (int i = 0; i < 3; ++i) {
    if (fractions[i] > 0.0 && (minor[i] == 0 || major[i] == 0)) {
      throw Error(ErrorKind::split, std::string(names[i]) + " split would miss a class (" +
                                        std::to_string(by_class[1].size()) + " positives, " +
                                        std::to_string(by_class[0].size()) + " negatives)");
    }
  }

  Split out;
  std::array<std::vector<std::size_t>*, 3> parts{&out.train, &out.val, &out.test};
  for (int cls : {minority, majority}) {
    auto& idx = by_class[cls];
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(cls)));
    rng.shuffle(std::span<std::size_t>(idx));
    const auto& counts = cls == minority ? minor : major;
    std::size_t pos = 0;
    for (int i = 0; i < 3; ++i) {
      parts[i]->insert(parts[i]->end(), idx.begin() + pos, idx.begin() + pos + counts[i]);
      pos += counts[i];
    }
  }
  for (auto* p : parts) std::sort(p->begin(), p->end());
  return out;
}

}  // namespace hetfraud
