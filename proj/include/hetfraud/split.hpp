#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace hetfraud {

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Stratified, disjoint, covering partition of row indices (each part sorted).
// Split sizes follow largest-remainder rounding of fractions * N; the
// minority class is apportioned the same way and the majority fills the
// rest. Any part with a positive fraction must receive both classes.
Split stratified_split(const std::vector<int>& labels, const std::array<double, 3>& fractions, std::uint64_t seed);

}  // namespace hetfraud
