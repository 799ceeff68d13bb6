#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hetfraud/matrix.hpp"
#include "hetfraud/params.hpp"

namespace hetfraud {

class Tape;

// Handle to a value recorded on a tape.
class Var {
 public:
  Var() = default;

  const DenseMatrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode gradient tape. Operations are appended in execution order,
// which is a topological order; backward() replays them in reverse exactly
// once. Leaves bound to a ParamStore accumulate into Parameter::grad.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const DenseMatrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(DenseMatrix value);
  Var parameter(Parameter& param);

  // Appends an operation. `value` must be finite; the op tag is reported
  // otherwise. `backward` receives dLoss/dOutput and must call accumulate()
  // for each input that requires a gradient.
  Var record(const char* tag, DenseMatrix value, std::span<const Var> inputs, Backward backward);
  Var record(const char* tag, DenseMatrix value, std::initializer_list<Var> inputs, Backward backward) {
    return record(tag, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
  }

  void accumulate(Var target, const DenseMatrix& delta);
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  const DenseMatrix& value(Var v) const { return nodes_[v.id()].value; }
  const DenseMatrix& grad(Var v) const;

  // Seeds d(loss)/d(loss) = 1 and propagates to every reachable leaf.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  bool consumed() const noexcept { return consumed_; }

 private:
  struct Node {
    const char* tag = "";
    DenseMatrix value;
    DenseMatrix grad;
    bool requires_grad = false;
    Backward backward;
    Parameter* param = nullptr;
  };
  std::deque<Node> nodes_;
  bool consumed_ = false;
};

// Differentiable primitives. Index arguments are copied into the tape.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
// x (n x c) plus a broadcast row b (1 x c)
Var add_row(Var x, Var b);
Var leaky_relu(Var x, double slope);
Var relu(Var x);
Var sigmoid(Var x);
Var concat_cols(Var a, Var b);
// Vertical stack of matrices with equal column counts.
Var concat_rows(const std::vector<Var>& parts);
// Row i of x multiplied by factors(i, 0).
Var scale_rows(Var x, Var factors);
Var gather_rows(Var x, std::span<const std::size_t> indices);
// out.row(s) = sum of values.row(e) with segments[e] == s.
Var segment_sum(Var values, std::span<const std::size_t> segments, std::size_t segment_count);
// Softmax of a column of scores within each segment, max-shifted.
Var segment_softmax(Var scores, std::span<const std::size_t> segments, std::size_t segment_count);
Var sum(Var x);
Var clamp(Var x, double lo, double hi);
// -sum_i w_i (y_i ln p_i + (1 - y_i) ln(1 - p_i)) for a column of probabilities.
Var weighted_bce(Var probabilities, std::span<const int> labels, std::span<const double> weights);

// Plain (tape-free) helpers sharing the same arithmetic.
std::vector<double> segment_softmax_values(std::span<const double> scores, std::span<const std::size_t> segments,
                                           std::size_t segment_count);
double leaky_relu_value(double x, double slope);

}  // namespace hetfraud
