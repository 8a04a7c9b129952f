#pragma once

#include <span>
#include <vector>

#include "abidnn/network.hpp"
#include "abidnn/problems.hpp"

namespace abidnn {

/// sqrt(sum |u - u*|^2) / sqrt(sum |u*|^2). Throws ConfigurationError when u*
/// vanishes on every point.
double relative_l2(std::span<const double> u, std::span<const double> u_star);
double relative_l2(const Network& net, const PointFn& u_star, const TestGrid& grid);

/// Network values at the grid points, in grid order.
std::vector<double> evaluate_on_grid(const Network& net, const TestGrid& grid);
std::vector<double> exact_on_grid(const PointFn& u_star, const TestGrid& grid);

/// |u - u*| at every grid point, in grid order.
std::vector<double> pointwise_error_field(const Network& net, const PointFn& u_star, const TestGrid& grid);

}  // namespace abidnn
