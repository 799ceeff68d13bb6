#include "hetfraud/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hetfraud/error.hpp"
#include "hetfraud/summation.hpp"

namespace hetfraud {

const DenseMatrix& Var::value() const { return tape_->value(*this); }

Var Tape::constant(DenseMatrix value) {
  if (!value.all_finite()) throw Error(ErrorKind::numeric, "non-finite constant");
  Node n;
  n.tag = "constant";
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& param) {
  if (!param.value.all_finite()) throw Error(ErrorKind::numeric, "non-finite parameter " + param.name);
  Node n;
  n.tag = "parameter";
  n.value = param.value;
  n.requires_grad = true;
  n.param = &param;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(const char* tag, DenseMatrix value, std::span<const Var> inputs, Backward backward) {
  if (consumed_) throw Error(ErrorKind::usage, "tape already consumed by backward");
  if (!value.all_finite()) throw Error(ErrorKind::numeric, std::string("non-finite output from ") + tag);
  Node n;
  n.tag = tag;
  n.value = std::move(value);
  for (const Var& v : inputs) {
    if (v.tape_ != this) throw Error(ErrorKind::usage, std::string(tag) + ": input from another tape");
    n.requires_grad = n.requires_grad || nodes_[v.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(Var target, const DenseMatrix& delta) {
  Node& n = nodes_[target.id()];
  if (!n.requires_grad) return;
  if (n.grad.empty() && !n.value.empty()) {
    require_same_shape(n.value, delta, "gradient");
    n.grad = delta;
    return;
  }
  add_inplace(n.grad, delta);
}

const DenseMatrix& Tape::grad(Var v) const { return nodes_[v.id()].grad; }

void Tape::backward(Var loss) {
  if (consumed_) throw Error(ErrorKind::usage, "backward called twice on the same tape");
  if (loss.tape_ != this) throw Error(ErrorKind::usage, "loss belongs to another tape");
  const Node& root = nodes_[loss.id()];
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw Error(ErrorKind::usage, "backward needs a scalar loss, got " + root.value.shape_string());
  }
  consumed_ = true;
  accumulate(loss, DenseMatrix(1, 1, 1.0));
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.param != nullptr) {
      add_inplace(n.param->grad, n.grad);
    } else if (n.backward) {
      n.backward(*this, n.grad);
    }
  }
}

namespace {

Tape& same_tape(Var a, Var b, const char* op) {
  if (&a.tape() != &b.tape()) throw Error(ErrorKind::usage, std::string(op) + ": operands on different tapes");
  return a.tape();
}

void check_column(const DenseMatrix& m, const char* op) {
  if (m.cols() != 1) throw Error(ErrorKind::shape, std::string(op) + " expects a column, got " + m.shape_string());
}

void check_indices(std::span<const std::size_t> idx, std::size_t bound, const char* op) {
  for (std::size_t i : idx) {
    if (i >= bound) {
      throw Error(ErrorKind::shape, std::string(op) + ": index " + std::to_string(i) + " out of range " +
                                        std::to_string(bound));
    }
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul");
  return t.record("matmul", matmul(a.value(), b.value()), {a, b}, [a, b](Tape& t, const DenseMatrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, matmul_nt(g, b.value()));
    if (t.requires_grad(b)) t.accumulate(b, matmul_tn(a.value(), g));
  });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  DenseMatrix out = a.value();
  add_inplace(out, b.value());
  return t.record("add", std::move(out), {a, b}, [a, b](Tape& t, const DenseMatrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var add_row(Var x, Var b) {
  Tape& t = same_tape(x, b, "add_row");
  const DenseMatrix& xv = x.value();
  const DenseMatrix& bv = b.value();
  if (bv.rows() != 1 || bv.cols() != xv.cols()) {
    throw Error(ErrorKind::shape, "add_row " + xv.shape_string() + " + " + bv.shape_string());
  }
  DenseMatrix out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bv(0, c);
  return t.record("add_row", std::move(out), {x, b}, [x, b](Tape& t, const DenseMatrix& g) {
    t.accumulate(x, g);
    if (t.requires_grad(b)) {
      DenseMatrix gb(1, g.cols());
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
      t.accumulate(b, gb);
    }
  });
}

double leaky_relu_value(double x, double slope) { return x >= 0.0 ? x : slope * x; }

Var leaky_relu(Var x, double slope) {
  if (!(slope > 0.0 && slope < 1.0)) throw Error(ErrorKind::config, "leaky_relu slope must lie in (0,1)");
  DenseMatrix out = x.value();
  for (double& v : out.values()) v = leaky_relu_value(v, slope);
  return x.tape().record("leaky_relu", std::move(out), {x}, [x, slope](Tape& t, const DenseMatrix& g) {
    DenseMatrix gx = g;
    const auto xv = x.value().values();
    auto gv = gx.values();
    for (std::size_t i = 0; i < gv.size(); ++i)
      if (xv[i] < 0.0) gv[i] *= slope;
    t.accumulate(x, gx);
  });
}

Var relu(Var x) {
  DenseMatrix out = x.value();
  for (double& v : out.values()) v = v >= 0.0 ? v : 0.0;
  return x.tape().record("relu", std::move(out), {x}, [x](Tape& t, const DenseMatrix& g) {
    DenseMatrix gx = g;
    const auto xv = x.value().values();
    auto gv = gx.values();
    for (std::size_t i = 0; i < gv.size(); ++i)
      if (xv[i] < 0.0) gv[i] = 0.0;
    t.accumulate(x, gx);
  });
}

namespace {

double sigmoid_value(double v) {
  return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
}

}  // namespace

Var sigmoid(Var x) {
  DenseMatrix out = x.value();
  for (double& v : out.values()) v = sigmoid_value(v);
  return x.tape().record("sigmoid", std::move(out), {x}, [x](Tape& t, const DenseMatrix& g) {
    DenseMatrix gx = g;
    const auto xv = x.value().values();
    auto gv = gx.values();
    for (std::size_t i = 0; i < gv.size(); ++i) {
      const double s = sigmoid_value(xv[i]);
      gv[i] *= s * (1.0 - s);
    }
    t.accumulate(x, gx);
  });
}

Var concat_cols(Var a, Var b) {
  Tape& t = same_tape(a, b, "concat_cols");
  const DenseMatrix& av = a.value();
  const DenseMatrix& bv = b.value();
  if (av.rows() != bv.rows()) {
    throw Error(ErrorKind::shape, "concat_cols " + av.shape_string() + " | " + bv.shape_string());
  }
  const std::size_t p = av.cols(), q = bv.cols();
  DenseMatrix out(av.rows(), p + q);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    std::copy_n(av.row(r).data(), p, out.row(r).data());
    std::copy_n(bv.row(r).data(), q, out.row(r).data() + p);
  }
  return t.record("concat_cols", std::move(out), {a, b}, [a, b, p, q](Tape& t, const DenseMatrix& g) {
    if (t.requires_grad(a)) {
      DenseMatrix ga(g.rows(), p);
      for (std::size_t r = 0; r < g.rows(); ++r) std::copy_n(g.row(r).data(), p, ga.row(r).data());
      t.accumulate(a, ga);
    }
    if (t.requires_grad(b)) {
      DenseMatrix gb(g.rows(), q);
      for (std::size_t r = 0; r < g.rows(); ++r) std::copy_n(g.row(r).data() + p, q, gb.row(r).data());
      t.accumulate(b, gb);
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error(ErrorKind::shape, "concat_rows of nothing");
  if (parts.size() == 1) return parts.front();
  Tape& t = parts.front().tape();
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const Var& v : parts) {
    if (&v.tape() != &t) throw Error(ErrorKind::usage, "concat_rows: operands on different tapes");
    if (v.cols() != cols) throw Error(ErrorKind::shape, "concat_rows: column counts differ");
    rows += v.rows();
  }
  std::vector<double> values;
  values.reserve(rows * cols);
  for (const Var& v : parts) values.insert(values.end(), v.value().values().begin(), v.value().values().end());
  return t.record("concat_rows", DenseMatrix(rows, cols, std::move(values)), parts,
                  [parts](Tape& t, const DenseMatrix& g) {
                    std::size_t offset = 0;
                    for (const Var& v : parts) {
                      const std::size_t n = v.rows() * v.cols();
                      if (t.requires_grad(v)) {
                        std::vector<double> slice(g.values().begin() + offset, g.values().begin() + offset + n);
                        t.accumulate(v, DenseMatrix(v.rows(), v.cols(), std::move(slice)));
                      }
                      offset += n;
                    }
                  });
}

Var scale_rows(Var x, Var factors) {
  Tape& t = same_tape(x, factors, "scale_rows");
  const DenseMatrix& xv = x.value();
  const DenseMatrix& fv = factors.value();
  check_column(fv, "scale_rows");
  if (fv.rows() != xv.rows()) {
    throw Error(ErrorKind::shape, "scale_rows " + xv.shape_string() + " by " + fv.shape_string());
  }
  DenseMatrix out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (double& v : out.row(r)) v *= fv(r, 0);
  return t.record("scale_rows", std::move(out), {x, factors}, [x, factors](Tape& t, const DenseMatrix& g) {
    const DenseMatrix& xv = x.value();
    const DenseMatrix& fv = factors.value();
    if (t.requires_grad(x)) {
      DenseMatrix gx = g;
      for (std::size_t r = 0; r < gx.rows(); ++r)
        for (double& v : gx.row(r)) v *= fv(r, 0);
      t.accumulate(x, gx);
    }
    if (t.requires_grad(factors)) {
      DenseMatrix gf(fv.rows(), 1);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < g.cols(); ++c) s += g(r, c) * xv(r, c);
        gf(r, 0) = s;
      }
      t.accumulate(factors, gf);
    }
  });
}

Var gather_rows(Var x, std::span<const std::size_t> indices) {
  const DenseMatrix& xv = x.value();
  check_indices(indices, xv.rows(), "gather_rows");
  DenseMatrix out(indices.size(), xv.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(xv.row(indices[i]).data(), xv.cols(), out.row(i).data());
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return x.tape().record("gather_rows", std::move(out), {x},
                         [x, idx = std::move(idx)](Tape& t, const DenseMatrix& g) {
                           DenseMatrix gx(x.rows(), x.cols());
                           for (std::size_t i = 0; i < idx.size(); ++i) {
                             double* dst = gx.row(idx[i]).data();
                             const double* src = g.row(i).data();
                             for (std::size_t c = 0; c < g.cols(); ++c) dst[c] += src[c];
                           }
                           t.accumulate(x, gx);
                         });
}

Var segment_sum(Var values, std::span<const std::size_t> segments, std::size_t segment_count) {
  const DenseMatrix& vv = values.value();
  if (segments.size() != vv.rows()) {
    throw Error(ErrorKind::shape, "segment_sum: " + std::to_string(segments.size()) + " segment ids for " +
                                      std::to_string(vv.rows()) + " rows");
  }
  check_indices(segments, segment_count, "segment_sum");
  DenseMatrix out(segment_count, vv.cols());
  for (std::size_t e = 0; e < segments.size(); ++e) {
    double* dst = out.row(segments[e]).data();
    const double* src = vv.row(e).data();
    for (std::size_t c = 0; c < vv.cols(); ++c) dst[c] += src[c];
  }
  std::vector<std::size_t> seg(segments.begin(), segments.end());
  return values.tape().record("segment_sum", std::move(out), {values},
                              [values, seg = std::move(seg)](Tape& t, const DenseMatrix& g) {
                                DenseMatrix gv(seg.size(), g.cols());
                                for (std::size_t e = 0; e < seg.size(); ++e) {
                                  std::copy_n(g.row(seg[e]).data(), g.cols(), gv.row(e).data());
                                }
                                t.accumulate(values, gv);
                              });
}

std::vector<double> segment_softmax_values(std::span<const double> scores, std::span<const std::size_t> segments,
                                           std::size_t segment_count) {
  if (segments.size() != scores.size()) {
    throw Error(ErrorKind::shape, "segment_softmax: segment ids and scores differ in length");
  }
  check_indices(segments, segment_count, "segment_softmax");
  std::vector<double> max_score(segment_count, -std::numeric_limits<double>::infinity());
  for (std::size_t e = 0; e < scores.size(); ++e) max_score[segments[e]] = std::max(max_score[segments[e]], scores[e]);
  std::vector<double> out(scores.size());
  std::vector<double> denom(segment_count, 0.0);
  for (std::size_t e = 0; e < scores.size(); ++e) {
    out[e] = std::exp(scores[e] - max_score[segments[e]]);
    denom[segments[e]] += out[e];
  }
  for (std::size_t e = 0; e < scores.size(); ++e) out[e] /= denom[segments[e]];
  return out;
}

Var segment_softmax(Var scores, std::span<const std::size_t> segments, std::size_t segment_count) {
  const DenseMatrix& sv = scores.value();
  check_column(sv, "segment_softmax");
  auto alpha = segment_softmax_values(sv.values(), segments, segment_count);
  DenseMatrix out = DenseMatrix::column(alpha);
  std::vector<std::size_t> seg(segments.begin(), segments.end());
  return scores.tape().record(
      "segment_softmax", std::move(out), {scores},
      [scores, seg = std::move(seg), alpha = std::move(alpha), segment_count](Tape& t, const DenseMatrix& g) {
        // d s_e = a_e (g_e - sum_{e' in seg(e)} a_e' g_e')
        std::vector<double> dot(segment_count, 0.0);
        for (std::size_t e = 0; e < seg.size(); ++e) dot[seg[e]] += alpha[e] * g(e, 0);
        DenseMatrix gs(seg.size(), 1);
        for (std::size_t e = 0; e < seg.size(); ++e) gs(e, 0) = alpha[e] * (g(e, 0) - dot[seg[e]]);
        t.accumulate(scores, gs);
      });
}

Var sum(Var x) {
  CompensatedSum s;
  for (double v : x.value().values()) s.add(v);
  return x.tape().record("sum", DenseMatrix(1, 1, s.value()), {x}, [x](Tape& t, const DenseMatrix& g) {
    t.accumulate(x, DenseMatrix(x.rows(), x.cols(), g(0, 0)));
  });
}

Var clamp(Var x, double lo, double hi) {
  DenseMatrix out = x.value();
  for (double& v : out.values()) v = std::clamp(v, lo, hi);
  return x.tape().record("clamp", std::move(out), {x}, [x, lo, hi](Tape& t, const DenseMatrix& g) {
    DenseMatrix gx = g;
    const auto xv = x.value().values();
    auto gv = gx.values();
    for (std::size_t i = 0; i < gv.size(); ++i)
      if (xv[i] < lo || xv[i] > hi) gv[i] = 0.0;
    t.accumulate(x, gx);
  });
}

Var weighted_bce(Var probabilities, std::span<const int> labels, std::span<const double> weights) {
  const DenseMatrix& p = probabilities.value();
  check_column(p, "weighted_bce");
  if (labels.size() != p.rows() || weights.size() != p.rows()) {
    throw Error(ErrorKind::shape, "weighted_bce: " + std::to_string(p.rows()) + " probabilities, " +
                                      std::to_string(labels.size()) + " labels, " + std::to_string(weights.size()) +
                                      " weights");
  }
  CompensatedSum total;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double pi = p(i, 0);
    total.add(weights[i] * (labels[i] ? std::log(pi) : std::log(1.0 - pi)));
  }
  const double loss = -total.value();
  std::vector<int> y(labels.begin(), labels.end());
  std::vector<double> w(weights.begin(), weights.end());
  return probabilities.tape().record(
      "weighted_bce", DenseMatrix(1, 1, loss), {probabilities},
      [probabilities, y = std::move(y), w = std::move(w)](Tape& t, const DenseMatrix& g) {
        const DenseMatrix& p = probabilities.value();
        DenseMatrix gp(p.rows(), 1);
        for (std::size_t i = 0; i < y.size(); ++i) {
          const double pi = p(i, 0);
          gp(i, 0) = g(0, 0) * -w[i] * (y[i] ? 1.0 / pi : -1.0 / (1.0 - pi));
        }
        t.accumulate(probabilities, gp);
      });
}

}  // namespace hetfraud
