#include "abidnn/autodiff.hpp"

#include <algorithm>

namespace abidnn {

std::vector<double> Tape::adjoints(int output) const {
  std::vector<double> adj(nodes_.size(), 0.0);
  if (output < 0) return adj;
  adj[static_cast<std::size_t>(output)] = 1.0;
  for (int i = output; i >= 0; --i) {
    const double a = adj[static_cast<std::size_t>(i)];
    if (a == 0.0) continue;
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.lhs >= 0) adj[static_cast<std::size_t>(n.lhs)] += a * n.dlhs;
    if (n.rhs >= 0) adj[static_cast<std::size_t>(n.rhs)] += a * n.drhs;
  }
  return adj;
}

Var Var::unary(const Var& a, double value, double da) {
  if (a.is_constant()) return Var(value);
  Var r(value);
  r.tape_ = a.tape_;
  r.index_ = a.tape_->push(a.index_, da, -1, 0.0);
  return r;
}

Var Var::binary(const Var& a, const Var& b, double value, double da, double db) {
  if (a.is_constant() && b.is_constant()) return Var(value);
  if (a.is_constant()) return unary(b, value, db);
  if (b.is_constant()) return unary(a, value, da);
  Var r(value);
  r.tape_ = a.tape_;
  r.index_ = a.tape_->push(a.index_, da, b.index_, db);
  return r;
}

Var operator+(const Var& a, const Var& b) {
  if (b.is_constant() && b.value() == 0.0) return a;
  if (a.is_constant() && a.value() == 0.0) return b;
  return Var::binary(a, b, a.value() + b.value(), 1.0, 1.0);
}

Var operator-(const Var& a, const Var& b) {
  if (b.is_constant() && b.value() == 0.0) return a;
  return Var::binary(a, b, a.value() - b.value(), 1.0, -1.0);
}

Var operator*(const Var& a, const Var& b) {
  // A constant zero factor annihilates the product and its derivative.
  if ((a.is_constant() && a.value() == 0.0) || (b.is_constant() && b.value() == 0.0)) {
    return Var(a.value() * b.value());
  }
  return Var::binary(a, b, a.value() * b.value(), b.value(), a.value());
}

Var operator/(const Var& a, const Var& b) {
  const double q = a.value() / b.value();
  return Var::binary(a, b, q, 1.0 / b.value(), -q / b.value());
}

Var operator-(const Var& a) { return Var::unary(a, -a.value(), -1.0); }

Var tanh(const Var& a) {
  const double y = std::tanh(a.value());
  return Var::unary(a, y, 1.0 - y * y);
}

Var exp(const Var& a) {
  const double e = std::exp(a.value());
  return Var::unary(a, e, e);
}

Var log(const Var& a) { return Var::unary(a, std::log(a.value()), 1.0 / a.value()); }

Var sin(const Var& a) { return Var::unary(a, std::sin(a.value()), std::cos(a.value())); }

Var cos(const Var& a) { return Var::unary(a, std::cos(a.value()), -std::sin(a.value())); }

Var sqrt(const Var& a) {
  const double s = std::sqrt(a.value());
  return Var::unary(a, s, 0.5 / s);
}

Var abs(const Var& a) {
  const double v = a.value();
  return Var::unary(a, std::fabs(v), v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0));
}

Var pow(const Var& a, double p) {
  const double v = a.value();
  return Var::unary(a, std::pow(v, p), p == 0.0 ? 0.0 : p * std::pow(v, p - 1.0));
}

Var relu(const Var& a) {
  const bool active = a.value() > 0.0;
  return Var::unary(a, active ? a.value() : 0.0, active ? 1.0 : 0.0);
}

Var floor(const Var&) { throw UnsupportedOperation("floor"); }
Var ceil(const Var&) { throw UnsupportedOperation("ceil"); }
Var round(const Var&) { throw UnsupportedOperation("round"); }

void ParameterStore::add_group(std::string name, std::span<const double> values, bool trainable) {
  ParamGroup g;
  g.name = std::move(name);
  g.offset = values_.size();
  g.size = values.size();
  g.trainable = trainable;
  values_.insert(values_.end(), values.begin(), values.end());
  groups_.push_back(std::move(g));
}

const ParamGroup& ParameterStore::group_of(std::size_t i) const {
  auto it = std::upper_bound(groups_.begin(), groups_.end(), i,
                             [](std::size_t idx, const ParamGroup& g) { return idx < g.offset; });
  if (it == groups_.begin() || i >= values_.size()) {
    throw DimensionMismatch("parameter index " + std::to_string(i) + " out of range");
  }
  return *std::prev(it);
}

const ParamGroup* ParameterStore::find(std::string_view name) const {
  for (const auto& g : groups_) {
    if (g.name == name) return &g;
  }
  return nullptr;
}

std::vector<bool> ParameterStore::trainable_mask() const {
  std::vector<bool> mask(values_.size(), true);
  for (const auto& g : groups_) {
    for (std::size_t i = 0; i < g.size; ++i) mask[g.offset + i] = g.trainable;
  }
  return mask;
}

std::vector<InputJet> seed_inputs(std::span<const double> x) {
  if (x.empty() || x.size() > static_cast<std::size_t>(kMaxInputDims)) {
    throw DimensionMismatch("input dimension " + std::to_string(x.size()) + " outside [1, " +
                            std::to_string(kMaxInputDims) + "]");
  }
  std::vector<InputJet> xs(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) xs[i] = InputJet::variable(x[i], static_cast<int>(i));
  return xs;
}

std::vector<double> input_jacobian(const ScalarField& f, std::span<const double> x) {
  if (x.size() != f.dim) {
    throw DimensionMismatch("input_jacobian: function takes " + std::to_string(f.dim) +
                            " inputs, point has " + std::to_string(x.size()));
  }
  return input_jacobian(f.fn, x);
}

double input_laplacian(const ScalarField& f, std::span<const double> x) {
  if (x.size() != f.dim) {
    throw DimensionMismatch("input_laplacian: function takes " + std::to_string(f.dim) +
                            " inputs, point has " + std::to_string(x.size()));
  }
  return input_laplacian(f.fn, x);
}

}  // namespace abidnn
