#pragma once

#include <cstddef>
#include <vector>

namespace abidnn {

/// Gauss-Hermite rule for weight exp(-z^2). Weights are kept as logarithms so
/// rules with hundreds of nodes keep their tiny tail weights.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> log_weights;
};

/// Nodes in ascending order. Throws ConfigurationError for n == 0.
GaussHermiteRule gauss_hermite(std::size_t n);

}  // namespace abidnn
