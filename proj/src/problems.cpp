#include "abidnn/problems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>

#include "abidnn/errors.hpp"
#include "abidnn/quadrature.hpp"

namespace abidnn {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSectorAngle = 1.5 * kPi;

double sq(double v) { return v * v; }

}  // namespace

std::string_view to_string(OperatorKind op) {
  switch (op) {
    case OperatorKind::identity:
      return "identity";
    case OperatorKind::neg_laplacian:
      return "neg-laplacian";
    case OperatorKind::burgers:
      return "burgers";
  }
  return "identity";
}

double polar_angle(double x1, double x2) {
  double th = std::atan2(x2, x1);
  if (th < 0.0) th += 2.0 * kPi;
  return th;
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = a;
    return v;
  }
  const double h = (b - a) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) v[i] = a + static_cast<double>(i) * h;
  if (n > 1) v.back() = b;
  return v;
}

std::vector<std::size_t> split_counts(std::size_t total, std::span<const double> weights) {
  std::vector<std::size_t> counts(weights.size(), 0);
  if (weights.empty() || total == 0) return counts;
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(sum > 0.0)) throw ConfigurationError("split_counts: weights must have positive sum");
  std::vector<double> rem(weights.size());
  std::size_t used = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double share = static_cast<double>(total) * weights[i] / sum;
    counts[i] = static_cast<std::size_t>(std::floor(share));
    rem[i] = share - static_cast<double>(counts[i]);
    used += counts[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; used < total; ++k, ++used) ++counts[order[k % order.size()]];
  return counts;
}

bool Domain::contains(std::span<const double> p) const {
  if (p.size() != dim) return false;
  for (std::size_t i = 0; i < dim; ++i) {
    if (!(p[i] > lo[i] && p[i] < hi[i])) return false;
  }
  if (kind == DomainKind::sector) {
    const double r = std::hypot(p[0], p[1]);
    const double th = polar_angle(p[0], p[1]);
    return r > 0.0 && r < 1.0 && th > 0.0 && th < kSectorAngle;
  }
  return true;
}

bool Domain::in_closure(std::span<const double> p, double tol) const {
  if (p.size() != dim) return false;
  for (std::size_t i = 0; i < dim; ++i) {
    if (p[i] < lo[i] - tol || p[i] > hi[i] + tol) return false;
  }
  if (kind == DomainKind::sector) {
    if (std::hypot(p[0], p[1]) > 1.0 + tol) return false;
    // Excluded quadrant x1 > 0, x2 < 0.
    return !(p[0] > tol && p[1] < -tol);
  }
  return true;
}

bool Domain::on_component(std::size_t c, std::span<const double> p, double tol) const {
  if (c >= boundary.size() || !in_closure(p, tol)) return false;
  switch (kind) {
    case DomainKind::interval:
      return std::fabs(p[0] - (c == 0 ? lo[0] : hi[0])) <= tol;
    case DomainKind::rectangle:
      // bottom, right, top, left
      switch (c) {
        case 0:
          return std::fabs(p[1] - lo[1]) <= tol;
        case 1:
          return std::fabs(p[0] - hi[0]) <= tol;
        case 2:
          return std::fabs(p[1] - hi[1]) <= tol;
        default:
          return std::fabs(p[0] - lo[0]) <= tol;
      }
    case DomainKind::sector:
      switch (c) {
        case 0:
          return std::fabs(p[1]) <= tol && p[0] >= -tol;
        case 1:
          return std::fabs(p[0]) <= tol && p[1] <= tol;
        default:
          return std::fabs(std::hypot(p[0], p[1]) - 1.0) <= tol;
      }
    case DomainKind::space_time:
      // x = -1, x = 1, t = 0
      switch (c) {
        case 0:
          return std::fabs(p[0] - lo[0]) <= tol;
        case 1:
          return std::fabs(p[0] - hi[0]) <= tol;
        default:
          return std::fabs(p[1] - lo[1]) <= tol;
      }
  }
  return false;
}

bool Domain::on_boundary(std::span<const double> p, double tol) const {
  for (std::size_t c = 0; c < boundary.size(); ++c) {
    if (on_component(c, p, tol)) return true;
  }
  return false;
}

double Domain::measure() const {
  if (kind == DomainKind::sector) return 0.5 * kSectorAngle;
  double m = 1.0;
  for (std::size_t i = 0; i < dim; ++i) m *= hi[i] - lo[i];
  return m;
}

std::vector<double> Domain::sample_interior(Rng& rng) const {
  std::vector<double> p(dim);
  for (;;) {
    for (std::size_t i = 0; i < dim; ++i) p[i] = rng.open(lo[i], hi[i]);
    if (kind != DomainKind::sector || contains(p)) return p;
  }
}

std::vector<double> Domain::sample_component(std::size_t c, Rng& rng) const {
  if (c >= boundary.size()) throw ConfigurationError("boundary component index out of range");
  switch (kind) {
    case DomainKind::interval:
      return {c == 0 ? lo[0] : hi[0]};
    case DomainKind::rectangle: {
      const double s0 = rng.open(lo[0], hi[0]);
      const double s1 = rng.open(lo[1], hi[1]);
      switch (c) {
        case 0:
          return {s0, lo[1]};
        case 1:
          return {hi[0], s1};
        case 2:
          return {s0, hi[1]};
        default:
          return {lo[0], s1};
      }
    }
    case DomainKind::sector: {
      if (c == 0) return {rng.open(0.0, 1.0), 0.0};
      if (c == 1) return {0.0, -rng.open(0.0, 1.0)};
      const double th = rng.open(0.0, kSectorAngle);
      return {std::cos(th), std::sin(th)};
    }
    case DomainKind::space_time: {
      if (c == 0) return {lo[0], rng.open(lo[1], hi[1])};
      if (c == 1) return {hi[0], rng.open(lo[1], hi[1])};
      return {rng.open(lo[0], hi[0]), lo[1]};
    }
  }
  return {};
}

TestGrid Problem::test_grid() const {
  TestGrid g;
  g.dim = domain.dim;
  g.shape = grid_shape;
  if (domain.dim == 1) {
    g.points = linspace(domain.lo[0], domain.hi[0], grid_shape.at(0));
    return g;
  }
  if (domain.kind == DomainKind::space_time) {
    // x on a uniform lattice, t_j = 0.01 j.
    std::vector<double> xs = linspace(domain.lo[0], domain.hi[0], grid_shape.at(0));
    for (double x : xs) {
      for (std::size_t j = 0; j < grid_shape.at(1); ++j) {
        g.points.push_back(x);
        g.points.push_back(0.01 * static_cast<double>(j));
      }
    }
    return g;
  }
  std::vector<double> a = linspace(domain.lo[0], domain.hi[0], grid_shape.at(0));
  std::vector<double> b = linspace(domain.lo[1], domain.hi[1], grid_shape.at(1));
  for (double x1 : a) {
    for (double x2 : b) {
      const double p[2] = {x1, x2};
      if (domain.kind == DomainKind::sector && !domain.in_closure(p, 0.0)) continue;
      g.points.push_back(x1);
      g.points.push_back(x2);
    }
  }
  return g;
}

namespace {

Domain unit_interval() {
  Domain d;
  d.kind = DomainKind::interval;
  d.dim = 1;
  d.lo = {0.0};
  d.hi = {1.0};
  return d;
}

Domain square() {
  Domain d;
  d.kind = DomainKind::rectangle;
  d.dim = 2;
  d.lo = {-1.0, -1.0};
  d.hi = {1.0, 1.0};
  d.boundary = {{"bottom", 2.0, 1.0}, {"right", 2.0, 1.0}, {"top", 2.0, 1.0}, {"left", 2.0, 1.0}};
  return d;
}

double gaussian_peak(double x1, double x2) { return std::exp(-1000.0 * (x1 * x1 + x2 * x2)); }

// -Laplacian of exp(-1000 r^2).
double gaussian_peak_rhs(double x1, double x2) {
  const double r2 = x1 * x1 + x2 * x2;
  return (4000.0 - 4.0e6 * r2) * std::exp(-1000.0 * r2);
}

}  // namespace

Problem fitting_singular() {
  Problem p;
  p.name = "fitting-singular";
  p.domain = unit_interval();
  p.op = OperatorKind::identity;
  p.exact = [](std::span<const double> x) {
    const double v = x[0];
    if (v < 0.2) return 25.0 * v * v;
    if (v < 0.4) return 25.0 * sq(0.4 - v);
    return 0.0;
  };
  p.rhs = p.exact;
  p.boundary = p.exact;
  p.default_interior = 2000;
  p.default_boundary = 0;
  p.grid_shape = {500};
  return p;
}

Problem fitting_highfreq() {
  Problem p;
  p.name = "fitting-highfreq";
  p.domain = unit_interval();
  p.op = OperatorKind::identity;
  p.exact = [](std::span<const double> x) {
    double s = 0.0;
    for (int i = 0; i <= 5; ++i) s += std::sin(std::ldexp(1.0, i) * kPi * x[0]);
    return s;
  };
  p.rhs = p.exact;
  p.boundary = p.exact;
  p.default_interior = 2000;
  p.default_boundary = 0;
  p.grid_shape = {500};
  return p;
}

Problem poisson_one_peak() {
  Problem p;
  p.name = "poisson-one-peak";
  p.domain = square();
  p.op = OperatorKind::neg_laplacian;
  p.exact = [](std::span<const double> x) { return gaussian_peak(x[0], x[1]); };
  p.rhs = [](std::span<const double> x) { return gaussian_peak_rhs(x[0], x[1]); };
  p.boundary = p.exact;
  p.default_interior = 40000;
  p.default_boundary = 400;
  p.grid_shape = {200, 200};
  return p;
}

Problem poisson_two_peaks() {
  Problem p;
  p.name = "poisson-two-peaks";
  p.domain = square();
  p.op = OperatorKind::neg_laplacian;
  p.exact = [](std::span<const double> x) { return gaussian_peak(x[0], x[1] - 0.5) + gaussian_peak(x[0], x[1] + 0.5); };
  p.rhs = [](std::span<const double> x) {
    return gaussian_peak_rhs(x[0], x[1] - 0.5) + gaussian_peak_rhs(x[0], x[1] + 0.5);
  };
  p.boundary = p.exact;
  p.default_interior = 40000;
  p.default_boundary = 400;
  p.grid_shape = {200, 200};
  return p;
}

Problem poisson_lshape() {
  Problem p;
  p.name = "poisson-lshape";
  Domain& d = p.domain;
  d.kind = DomainKind::sector;
  d.dim = 2;
  d.lo = {-1.0, -1.0};
  d.hi = {1.0, 1.0};
  d.boundary = {{"edge-theta-0", 1.0, 1.0}, {"edge-theta-3pi/2", 1.0, 1.0}, {"arc", kSectorAngle, kSectorAngle}};
  p.op = OperatorKind::neg_laplacian;
  p.exact = [](std::span<const double> x) {
    const double r = std::hypot(x[0], x[1]);
    const double th = polar_angle(x[0], x[1]);
    return std::pow(r, 2.0 / 3.0) * std::sin(2.0 / 3.0 * th) + std::sin(2.0 * kPi * r * r);
  };
  p.rhs = [](std::span<const double> x) {
    const double r2 = x[0] * x[0] + x[1] * x[1];
    return -8.0 * kPi * std::cos(2.0 * kPi * r2) + 16.0 * kPi * kPi * r2 * std::sin(2.0 * kPi * r2);
  };
  p.boundary = p.exact;
  p.default_interior = 40000;
  p.default_boundary = 400;
  p.grid_shape = {200, 200};
  return p;
}

Problem burgers() {
  Problem p;
  p.name = "burgers";
  Domain& d = p.domain;
  d.kind = DomainKind::space_time;
  d.dim = 2;
  d.lo = {-1.0, 0.0};
  d.hi = {1.0, 1.0};
  d.boundary = {{"x=-1", 1.0, 2.0}, {"x=1", 1.0, 2.0}, {"t=0", 2.0, 1.0}};
  p.op = OperatorKind::burgers;
  p.exact = [](std::span<const double> x) { return burgers_reference(x[1], x[0]); };
  p.rhs = [](std::span<const double>) { return 0.0; };
  p.boundary = [](std::span<const double> x) { return x[1] <= 1e-12 ? -std::sin(kPi * x[0]) : 0.0; };
  p.default_interior = 40000;
  p.default_boundary = 500;
  p.grid_shape = {256, 100};
  return p;
}

std::vector<std::string> problem_names() {
  return {"fitting-singular", "fitting-highfreq", "poisson-one-peak", "poisson-two-peaks", "poisson-lshape", "burgers"};
}

Problem problem_by_name(std::string_view name) {
  if (name == "fitting-singular") return fitting_singular();
  if (name == "fitting-highfreq") return fitting_highfreq();
  if (name == "poisson-one-peak") return poisson_one_peak();
  if (name == "poisson-two-peaks") return poisson_two_peaks();
  if (name == "poisson-lshape") return poisson_lshape();
  if (name == "burgers") return burgers();
  std::string valid;
  for (const auto& n : problem_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigurationError("unknown problem '" + std::string(name) + "' (valid: " + valid + ")");
}

namespace {

const GaussHermiteRule& cached_rule(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, GaussHermiteRule> rules;
  std::lock_guard<std::mutex> lock(mu);
  auto it = rules.find(n);
  if (it == rules.end()) it = rules.emplace(n, gauss_hermite(n)).first;
  return it->second;
}

}  // namespace

double burgers_reference(double t, double x, std::size_t nodes) {
  if (t < 0.0 || !std::isfinite(t)) throw ConfigurationError("burgers_reference: t must be nonnegative");
  if (t < 1e-4) return -std::sin(kPi * x);
  const GaussHermiteRule& rule = cached_rule(nodes);
  const double nu = kBurgersViscosity;
  const double c = std::sqrt(4.0 * nu * t);
  const double k = 1.0 / (2.0 * kPi * nu);
  // log of w_i F(x - c z_i); sums are formed after factoring out the maximum.
  std::vector<double> e(rule.nodes.size());
  double emax = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double y = x - c * rule.nodes[i];
    e[i] = rule.log_weights[i] - k * std::cos(kPi * y);
    emax = std::max(emax, e[i]);
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double y = x - c * rule.nodes[i];
    const double w = std::exp(e[i] - emax);
    num += std::sin(kPi * y) * w;
    den += w;
  }
  return -num / den;
}

}  // namespace abidnn
