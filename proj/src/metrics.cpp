#include "abidnn/metrics.hpp"

#include <cmath>

#include "abidnn/engine.hpp"
#include "abidnn/errors.hpp"

namespace abidnn {

double relative_l2(std::span<const double> u, std::span<const double> u_star) {
  if (u.size() != u_star.size()) throw DimensionMismatch("relative_l2: field lengths differ");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double e = u[i] - u_star[i];
    num += e * e;
    den += u_star[i] * u_star[i];
  }
  if (!(den > 0.0)) throw ConfigurationError("relative_l2: reference field is identically zero");
  return std::sqrt(num) / std::sqrt(den);
}

std::vector<double> evaluate_on_grid(const Network& net, const TestGrid& grid) {
  if (grid.dim != net.input_dim) throw DimensionMismatch("grid dimension does not match the network");
  Engine engine(net);
  std::vector<double> theta = net.flat_parameters();
  std::vector<double> u(grid.size());
  engine.predict(theta, grid.points, u);
  return u;
}

std::vector<double> exact_on_grid(const PointFn& u_star, const TestGrid& grid) {
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = u_star(grid.point(i));
  return v;
}

double relative_l2(const Network& net, const PointFn& u_star, const TestGrid& grid) {
  return relative_l2(evaluate_on_grid(net, grid), exact_on_grid(u_star, grid));
}

std::vector<double> pointwise_error_field(const Network& net, const PointFn& u_star, const TestGrid& grid) {
  std::vector<double> u = evaluate_on_grid(net, grid);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::fabs(u[i] - u_star(grid.point(i)));
  return u;
}

}  // namespace abidnn
