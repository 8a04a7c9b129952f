#pragma once

// Differentiation engine.
//
// Two carriers compose:
//   Var        reverse-mode scalar recorded on a Tape; used for gradients with
//              respect to network parameters.
//   Jet<T, K>  forward-mode second-order jet along K input directions (value,
//              first derivatives, diagonal second derivatives). With T = Var the
//              jet carries input derivatives of u(x; theta) that are themselves
//              differentiable with respect to theta.

#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "abidnn/errors.hpp"

namespace abidnn {

// ---------------------------------------------------------------------------
// Reverse mode
// ---------------------------------------------------------------------------

class Tape {
 public:
  struct Node {
    int lhs;
    int rhs;
    double dlhs;
    double drhs;
  };

  int push(int lhs, double dlhs, int rhs, double drhs) {
    nodes_.push_back({lhs, rhs, dlhs, drhs});
    return static_cast<int>(nodes_.size()) - 1;
  }

  /// Adjoints of every recorded node with respect to node `output`.
  std::vector<double> adjoints(int output) const;

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  std::vector<Node> nodes_;
};

/// Reverse-mode scalar. A default or double-constructed Var is a constant and
/// records nothing.
class Var {
 public:
  Var() = default;
  Var(double value) : value_(value) {}  // NOLINT: constants mix freely with variables

  static Var variable(Tape& tape, double value) {
    Var v(value);
    v.tape_ = &tape;
    v.index_ = tape.push(-1, 0.0, -1, 0.0);
    return v;
  }

  double value() const { return value_; }
  int index() const { return index_; }
  Tape* tape() const { return tape_; }
  bool is_constant() const { return tape_ == nullptr; }

  static Var unary(const Var& a, double value, double da);
  static Var binary(const Var& a, const Var& b, double value, double da, double db);

 private:
  double value_ = 0.0;
  Tape* tape_ = nullptr;
  int index_ = -1;
};

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }
inline Var& operator/=(Var& a, const Var& b) { return a = a / b; }

inline bool operator<(const Var& a, const Var& b) { return a.value() < b.value(); }
inline bool operator>(const Var& a, const Var& b) { return a.value() > b.value(); }

Var tanh(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var sin(const Var& a);
Var cos(const Var& a);
Var sqrt(const Var& a);
Var abs(const Var& a);
Var pow(const Var& a, double p);
Var relu(const Var& a);

// Non-differentiable primitives. Calling them on a Var is always an error.
[[noreturn]] Var floor(const Var& a);
[[noreturn]] Var ceil(const Var& a);
[[noreturn]] Var round(const Var& a);

inline double relu(double a) { return a > 0.0 ? a : 0.0; }

inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.value(); }

// ---------------------------------------------------------------------------
// Forward mode
// ---------------------------------------------------------------------------

template <class T, int K>
struct Jet {
  T v{};
  std::array<T, K> d{};
  std::array<T, K> dd{};

  Jet() = default;
  Jet(double c) : v(c) {}  // NOLINT
  Jet(const T& c) requires(!std::is_same_v<T, double>) : v(c) {}

  /// Coordinate `dir` seeded with unit first derivative.
  static Jet variable(const T& value, int dir) {
    Jet j;
    j.v = value;
    j.d[dir] = T(1.0);
    return j;
  }
};

namespace detail {

// Applies a scalar function with known derivatives f, f', f'' through a jet.
template <class T, int K>
Jet<T, K> chain(const Jet<T, K>& a, const T& f, const T& f1, const T& f2) {
  Jet<T, K> r;
  r.v = f;
  for (int k = 0; k < K; ++k) {
    r.d[k] = f1 * a.d[k];
    r.dd[k] = f2 * a.d[k] * a.d[k] + f1 * a.dd[k];
  }
  return r;
}

}  // namespace detail

template <class T, int K>
Jet<T, K> operator+(const Jet<T, K>& a, const Jet<T, K>& b) {
  Jet<T, K> r;
  r.v = a.v + b.v;
  for (int k = 0; k < K; ++k) {
    r.d[k] = a.d[k] + b.d[k];
    r.dd[k] = a.dd[k] + b.dd[k];
  }
  return r;
}

template <class T, int K>
Jet<T, K> operator-(const Jet<T, K>& a, const Jet<T, K>& b) {
  Jet<T, K> r;
  r.v = a.v - b.v;
  for (int k = 0; k < K; ++k) {
    r.d[k] = a.d[k] - b.d[k];
    r.dd[k] = a.dd[k] - b.dd[k];
  }
  return r;
}

template <class T, int K>
Jet<T, K> operator-(const Jet<T, K>& a) {
  Jet<T, K> r;
  r.v = -a.v;
  for (int k = 0; k < K; ++k) {
    r.d[k] = -a.d[k];
    r.dd[k] = -a.dd[k];
  }
  return r;
}

template <class T, int K>
Jet<T, K> operator*(const Jet<T, K>& a, const Jet<T, K>& b) {
  Jet<T, K> r;
  r.v = a.v * b.v;
  for (int k = 0; k < K; ++k) {
    r.d[k] = a.d[k] * b.v + a.v * b.d[k];
    r.dd[k] = a.dd[k] * b.v + T(2.0) * a.d[k] * b.d[k] + a.v * b.dd[k];
  }
  return r;
}

// Scaling by a coefficient that carries no input derivatives (a weight or bias).
template <class T, int K>
Jet<T, K> operator*(const Jet<T, K>& a, const T& c) {
  Jet<T, K> r;
  r.v = a.v * c;
  for (int k = 0; k < K; ++k) {
    r.d[k] = a.d[k] * c;
    r.dd[k] = a.dd[k] * c;
  }
  return r;
}

template <class T, int K>
Jet<T, K> operator*(const T& c, const Jet<T, K>& a) {
  return a * c;
}

template <class T, int K>
Jet<T, K> operator*(const Jet<T, K>& a, double c) requires(!std::is_same_v<T, double>) {
  return a * T(c);
}

template <class T, int K>
Jet<T, K> operator*(double c, const Jet<T, K>& a) requires(!std::is_same_v<T, double>) {
  return a * T(c);
}

template <class T, int K>
Jet<T, K> operator+(const Jet<T, K>& a, const T& c) {
  Jet<T, K> r = a;
  r.v = a.v + c;
  return r;
}

template <class T, int K>
Jet<T, K> operator+(const T& c, const Jet<T, K>& a) {
  return a + c;
}

template <class T, int K>
Jet<T, K> operator-(const Jet<T, K>& a, const T& c) {
  Jet<T, K> r = a;
  r.v = a.v - c;
  return r;
}

template <class T, int K>
Jet<T, K> operator-(const T& c, const Jet<T, K>& a) {
  return -a + c;
}

template <class T, int K>
Jet<T, K> operator+(const Jet<T, K>& a, double c) requires(!std::is_same_v<T, double>) {
  return a + T(c);
}

template <class T, int K>
Jet<T, K> operator+(double c, const Jet<T, K>& a) requires(!std::is_same_v<T, double>) {
  return a + T(c);
}

template <class T, int K>
Jet<T, K> operator-(const Jet<T, K>& a, double c) requires(!std::is_same_v<T, double>) {
  return a - T(c);
}

template <class T, int K>
Jet<T, K> reciprocal(const Jet<T, K>& a) {
  T f = T(1.0) / a.v;
  T f1 = -(f * f);
  T f2 = T(2.0) * f * f * f;
  return detail::chain(a, f, f1, f2);
}

template <class T, int K>
Jet<T, K> operator/(const Jet<T, K>& a, const Jet<T, K>& b) {
  return a * reciprocal(b);
}

template <class T, int K>
Jet<T, K> operator/(const Jet<T, K>& a, const T& c) {
  return a * (T(1.0) / c);
}

template <class T, int K>
Jet<T, K>& operator+=(Jet<T, K>& a, const Jet<T, K>& b) {
  return a = a + b;
}

template <class T, int K>
Jet<T, K>& operator-=(Jet<T, K>& a, const Jet<T, K>& b) {
  return a = a - b;
}

template <class T, int K>
Jet<T, K>& operator*=(Jet<T, K>& a, const Jet<T, K>& b) {
  return a = a * b;
}

template <class T, int K>
Jet<T, K> tanh(const Jet<T, K>& a) {
  using std::tanh;
  T y = tanh(a.v);
  T f1 = T(1.0) - y * y;
  T f2 = T(-2.0) * y * f1;
  return detail::chain(a, y, f1, f2);
}

// ReLU: first derivative 0 at the kink, second derivative 0 everywhere.
template <class T, int K>
Jet<T, K> relu(const Jet<T, K>& a) {
  bool active = value_of(a.v) > 0.0;
  return detail::chain(a, active ? a.v : T(0.0), T(active ? 1.0 : 0.0), T(0.0));
}

template <class T, int K>
Jet<T, K> exp(const Jet<T, K>& a) {
  using std::exp;
  T e = exp(a.v);
  return detail::chain(a, e, e, e);
}

template <class T, int K>
Jet<T, K> log(const Jet<T, K>& a) {
  using std::log;
  T inv = T(1.0) / a.v;
  return detail::chain(a, log(a.v), inv, -(inv * inv));
}

template <class T, int K>
Jet<T, K> sin(const Jet<T, K>& a) {
  using std::cos;
  using std::sin;
  T s = sin(a.v);
  return detail::chain(a, s, cos(a.v), -s);
}

template <class T, int K>
Jet<T, K> cos(const Jet<T, K>& a) {
  using std::cos;
  using std::sin;
  T c = cos(a.v);
  return detail::chain(a, c, -sin(a.v), -c);
}

template <class T, int K>
Jet<T, K> sqrt(const Jet<T, K>& a) {
  using std::sqrt;
  T s = sqrt(a.v);
  T f1 = T(0.5) / s;
  T f2 = -(f1 / (T(2.0) * a.v));
  return detail::chain(a, s, f1, f2);
}

/// Integer power by repeated multiplication so p = 0, 1, 2 are exact.
template <class T, int K>
Jet<T, K> pow(const Jet<T, K>& a, int p) {
  if (p < 0) return reciprocal(pow(a, -p));
  Jet<T, K> r(1.0);
  for (int i = 0; i < p; ++i) r = r * a;
  return r;
}

template <class T, int K>
double value_of(const Jet<T, K>& j) {
  return value_of(j.v);
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

struct ParamGroup {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
  bool trainable = true;
};

/// Flat ordered parameter vector with named group boundaries.
class ParameterStore {
 public:
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  void add_group(std::string name, std::span<const double> values, bool trainable = true);

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  const std::vector<ParamGroup>& groups() const { return groups_; }

  /// Group containing flat index `i`.
  const ParamGroup& group_of(std::size_t i) const;
  const ParamGroup* find(std::string_view name) const;

  /// Per-parameter trainable flags in store order.
  std::vector<bool> trainable_mask() const;

 private:
  std::vector<double> values_;
  std::vector<ParamGroup> groups_;
};

/// Per-parameter partial derivatives in ParameterStore order.
using GradientVector = std::vector<double>;

/// Gradient of a scalar loss built from Var arithmetic.
template <class LossFn>
GradientVector grad_params(LossFn&& loss_fn, const ParameterStore& params) {
  if (params.empty()) throw ConfigurationError("grad_params: parameter store is empty");
  Tape tape;
  std::vector<Var> theta;
  theta.reserve(params.size());
  for (double v : params.values()) theta.push_back(Var::variable(tape, v));
  Var loss = loss_fn(std::span<const Var>(theta));
  GradientVector g(params.size(), 0.0);
  if (loss.is_constant()) return g;
  std::vector<double> adj = tape.adjoints(loss.index());
  for (std::size_t i = 0; i < theta.size(); ++i) g[i] = adj[static_cast<std::size_t>(theta[i].index())];
  return g;
}

// ---------------------------------------------------------------------------
// Input derivatives
// ---------------------------------------------------------------------------

inline constexpr int kMaxInputDims = 3;
using InputJet = Jet<double, kMaxInputDims>;

/// Carrier of u(x; theta) together with its input derivatives, differentiable in theta.
using DiffScalar = Jet<Var, kMaxInputDims>;

/// A scalar function of `dim` inputs evaluated on jets.
struct ScalarField {
  std::size_t dim = 0;
  std::function<InputJet(std::span<const InputJet>)> fn;
};

std::vector<InputJet> seed_inputs(std::span<const double> x);

template <class F>
  requires std::invocable<F, std::span<const InputJet>>
std::vector<double> input_jacobian(F&& f, std::span<const double> x) {
  std::vector<InputJet> xs = seed_inputs(x);
  InputJet y = f(std::span<const InputJet>(xs));
  return std::vector<double>(y.d.begin(), y.d.begin() + static_cast<std::ptrdiff_t>(x.size()));
}

template <class F>
  requires std::invocable<F, std::span<const InputJet>>
double input_laplacian(F&& f, std::span<const double> x) {
  std::vector<InputJet> xs = seed_inputs(x);
  InputJet y = f(std::span<const InputJet>(xs));
  double lap = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) lap += y.dd[k];
  return lap;
}

std::vector<double> input_jacobian(const ScalarField& f, std::span<const double> x);
double input_laplacian(const ScalarField& f, std::span<const double> x);

}  // namespace abidnn
