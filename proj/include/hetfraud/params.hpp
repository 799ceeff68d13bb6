#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "hetfraud/matrix.hpp"

namespace hetfraud {

struct Parameter {
  std::string name;
  DenseMatrix value;
  DenseMatrix grad;
  DenseMatrix first_moment;
  DenseMatrix second_moment;
};

// Named trainable matrices with gradient accumulators and Adam moments.
//
// Text format (one parameter block after another):
//
//   hetfraud-params 1
//   seed <u64>
//   step <adam steps taken>
//   parameters <count>
//   param <name> <rows> <cols>
//   <row 0 values, space separated>
//   ...
//
// Values are written in shortest round-trip form, so save/load is exact.
// Optimizer moments are not persisted.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  Parameter& add(std::string name, DenseMatrix init);
  bool contains(std::string_view name) const;
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;

  std::vector<Parameter>& params() noexcept { return params_; }
  const std::vector<Parameter>& params() const noexcept { return params_; }

  std::size_t scalar_count() const;
  void zero_grad();

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t step() const noexcept { return step_; }
  void advance_step() noexcept { ++step_; }

  // True when names, shapes and values match bit for bit.
  bool same_values(const ParamStore& other) const;

  void save(std::ostream& out) const;
  static ParamStore load(std::istream& in);

 private:
  std::vector<Parameter> params_;
  std::uint64_t seed_ = 0;
  std::uint64_t step_ = 0;
};

struct AdamOptions {
  double learning_rate = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

void adam_step(ParamStore& store, const AdamOptions& options);
void sgd_step(ParamStore& store, double learning_rate);

}  // namespace hetfraud
