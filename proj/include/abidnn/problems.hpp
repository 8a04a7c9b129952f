#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "abidnn/random.hpp"

namespace abidnn {

enum class DomainKind { interval, rectangle, sector, space_time };
enum class OperatorKind {
  identity,       // fitting: L u = u
  neg_laplacian,  // L u = -(u_11 + u_22)
  burgers,        // L u = u_t + u u_x - nu u_xx, point = (x, t)
};

std::string_view to_string(OperatorKind op);

inline constexpr double kBurgersViscosity = 0.01 / 3.14159265358979323846;

struct BoundaryComponent {
  std::string name;
  double length = 0.0;
  /// Share of the boundary samples given to this component.
  double weight = 0.0;
};

struct Domain {
  DomainKind kind = DomainKind::interval;
  std::size_t dim = 1;
  std::vector<double> lo;  // bounding box
  std::vector<double> hi;
  std::vector<BoundaryComponent> boundary;

  /// Open interior.
  bool contains(std::span<const double> p) const;
  /// Closure, with tolerance `tol`.
  bool in_closure(std::span<const double> p, double tol = 1e-12) const;
  /// Whether p lies on component `c` to within `tol`.
  bool on_component(std::size_t c, std::span<const double> p, double tol = 1e-12) const;
  bool on_boundary(std::span<const double> p, double tol = 1e-12) const;
  double measure() const;

  std::vector<double> sample_interior(Rng& rng) const;
  std::vector<double> sample_component(std::size_t c, Rng& rng) const;
};

/// Ordered evaluation points; `shape` lists the lattice sizes per axis before
/// any exclusion (e.g. {500} or {200, 200}).
struct TestGrid {
  std::size_t dim = 1;
  std::vector<double> points;  // point i at [i*dim, (i+1)*dim)
  std::vector<std::size_t> shape;

  std::size_t size() const { return dim == 0 ? 0 : points.size() / dim; }
  std::span<const double> point(std::size_t i) const { return {points.data() + i * dim, dim}; }
};

using PointFn = std::function<double(std::span<const double>)>;

struct Problem {
  std::string name;
  Domain domain;
  OperatorKind op = OperatorKind::identity;
  PointFn exact;     // u_* (reference solution for Burgers)
  PointFn rhs;       // f
  PointFn boundary;  // g
  std::size_t default_interior = 0;
  std::size_t default_boundary = 0;
  /// Lattice of the test grid: points per axis.
  std::vector<std::size_t> grid_shape;

  TestGrid test_grid() const;
  bool is_fitting() const { return op == OperatorKind::identity; }
  bool needs_second_derivatives() const { return op != OperatorKind::identity; }
};

Problem fitting_singular();
Problem fitting_highfreq();
Problem poisson_one_peak();
Problem poisson_two_peaks();
Problem poisson_lshape();
Problem burgers();

std::vector<std::string> problem_names();
Problem problem_by_name(std::string_view name);

/// Viscous Burgers solution on x in [-1, 1] with u(0, x) = -sin(pi x) and zero
/// boundary values, by Gauss-Hermite quadrature of the Cole-Hopf integral.
double burgers_reference(double t, double x, std::size_t nodes = 256);

/// Polar angle in [0, 2 pi).
double polar_angle(double x1, double x2);

/// Splits `total` over components in proportion to their weights, largest
/// remainder first, ties to the lower index.
std::vector<std::size_t> split_counts(std::size_t total, std::span<const double> weights);

/// Evenly spaced values from a to b inclusive.
std::vector<double> linspace(double a, double b, std::size_t n);

}  // namespace abidnn
