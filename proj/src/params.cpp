#include "hetfraud/params.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "hetfraud/error.hpp"
#include "hetfraud/text.hpp"

namespace hetfraud {

Parameter& ParamStore::add(std::string name, DenseMatrix init) {
  if (contains(name)) throw Error(ErrorKind::config, "duplicate parameter name " + name);
  Parameter p;
  p.grad = DenseMatrix(init.rows(), init.cols());
  p.first_moment = DenseMatrix(init.rows(), init.cols());
  p.second_moment = DenseMatrix(init.rows(), init.cols());
  p.value = std::move(init);
  p.name = std::move(name);
  params_.push_back(std::move(p));
  return params_.back();
}

bool ParamStore::contains(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return true;
  return false;
}

Parameter& ParamStore::at(std::string_view name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  throw Error(ErrorKind::config, "unknown parameter " + std::string(name));
}

const Parameter& ParamStore::at(std::string_view name) const {
  return const_cast<ParamStore*>(this)->at(name);
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_)
    for (double& g : p.grad.values()) g = 0.0;
}

bool ParamStore::same_values(const ParamStore& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name != other.params_[i].name || !(params_[i].value == other.params_[i].value))
      return false;
  }
  return true;
}

void ParamStore::save(std::ostream& out) const {
  out << "hetfraud-params 1\n";
  out << "seed " << seed_ << "\n";
  out << "step " << step_ << "\n";
  out << "parameters " << params_.size() << "\n";
  for (const auto& p : params_) {
    out << "param " << p.name << " " << p.value.rows() << " " << p.value.cols() << "\n";
    for (std::size_t r = 0; r < p.value.rows(); ++r) {
      const auto row = p.value.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c) out << ' ';
        out << format_double(row[c]);
      }
      out << "\n";
    }
  }
}

namespace {

std::string expect_line(std::istream& in, std::string_view what) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::parse, "parameter file truncated before " + std::string(what));
  return line;
}

template <typename T>
T keyed_value(const std::string& line, std::string_view key) {
  std::istringstream ss(line);
  std::string k;
  T v{};
  if (!(ss >> k >> v) || k != key) throw Error(ErrorKind::parse, "expected '" + std::string(key) + "' line, got '" + line + "'");
  return v;
}

}  // namespace

ParamStore ParamStore::load(std::istream& in) {
  if (trim(expect_line(in, "header")) != "hetfraud-params 1") {
    throw Error(ErrorKind::parse, "not a hetfraud parameter file");
  }
  ParamStore store(keyed_value<std::uint64_t>(expect_line(in, "seed"), "seed"));
  store.step_ = keyed_value<std::uint64_t>(expect_line(in, "step"), "step");
  const auto count = keyed_value<std::size_t>(expect_line(in, "parameters"), "parameters");
  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream head(expect_line(in, "param"));
    std::string tag, name;
    std::size_t rows = 0, cols = 0;
    if (!(head >> tag >> name >> rows >> cols) || tag != "param") {
      throw Error(ErrorKind::parse, "malformed param header");
    }
    std::vector<double> values;
    values.reserve(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
      const auto cells = split(trim(expect_line(in, "param row")), ' ');
      if (cells.size() != cols) throw Error(ErrorKind::parse, "param " + name + " row " + std::to_string(r) + " has wrong width");
      for (const auto& c : cells) {
        double v = 0.0;
        if (!try_parse_double(c, v)) throw Error(ErrorKind::parse, "param " + name + ": bad value '" + c + "'");
        values.push_back(v);
      }
    }
    store.add(name, DenseMatrix(rows, cols, std::move(values)));
  }
  return store;
}

void adam_step(ParamStore& store, const AdamOptions& o) {
  store.advance_step();
  const double t = static_cast<double>(store.step());
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (auto& p : store.params()) {
    auto v = p.value.values();
    auto g = p.grad.values();
    auto m = p.first_moment.values();
    auto s = p.second_moment.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
      s[i] = o.beta2 * s[i] + (1.0 - o.beta2) * g[i] * g[i];
      v[i] -= o.learning_rate * (m[i] / c1) / (std::sqrt(s[i] / c2) + o.epsilon);
    }
  }
}

void sgd_step(ParamStore& store, double learning_rate) {
  store.advance_step();
  for (auto& p : store.params()) {
    auto v = p.value.values();
    auto g = p.grad.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= learning_rate * g[i];
  }
}

}  // namespace hetfraud
