#include "abidnn/quadrature.hpp"

#include <cmath>
#include <numbers>

#include "abidnn/errors.hpp"

namespace abidnn {

namespace {

struct HermiteEval {
  double psi_n;       // scaled psi_n(z)
  double psi_nm1;     // scaled psi_{n-1}(z)
  double log_scale;   // true value = scaled * exp(log_scale)
};

// Normalized Hermite functions by the three-term recurrence, rescaled on the
// fly so large |z| and large n neither overflow nor underflow.
HermiteEval hermite_functions(std::size_t n, double z) {
  double log_scale = -0.5 * z * z - 0.25 * std::log(std::numbers::pi);
  double p_prev = 0.0;
  double p = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double kk = static_cast<double>(k);
    const double next = z * std::sqrt(2.0 / (kk + 1.0)) * p - std::sqrt(kk / (kk + 1.0)) * p_prev;
    p_prev = p;
    p = next;
    const double mag = std::fabs(p);
    if (mag > 1e150 || (mag < 1e-150 && mag > 0.0)) {
      const double s = std::log(mag);
      p /= mag;
      p_prev /= mag;
      log_scale += s;
    }
  }
  return {p, p_prev, log_scale};
}

}  // namespace

GaussHermiteRule gauss_hermite(std::size_t n) {
  if (n == 0) throw ConfigurationError("gauss_hermite: need at least one node");
  const double nd = static_cast<double>(n);
  const std::size_t half = (n + 1) / 2;
  std::vector<double> roots(half);  // descending, roots[i] >= 0
  double z = 0.0;
  for (std::size_t i = 0; i < half; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * nd + 1.0) - 1.85575 * std::pow(2.0 * nd + 1.0, -0.16667);
    } else if (i == 1) {
      z -= 1.14 * std::pow(nd, 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * roots[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * roots[1];
    } else {
      z = 2.0 * z - roots[i - 2];
    }
    for (int it = 0; it < 100; ++it) {
      HermiteEval h = hermite_functions(n, z);
      // psi_n' = sqrt(2n) psi_{n-1} - z psi_n
      const double dpsi = std::sqrt(2.0 * nd) * h.psi_nm1 - z * h.psi_n;
      const double step = h.psi_n / dpsi;
      z -= step;
      if (std::fabs(step) <= 1e-15 * std::max(1.0, std::fabs(z))) break;
    }
    if (n % 2 == 1 && i + 1 == half) z = 0.0;
    roots[i] = z;
  }

  GaussHermiteRule rule;
  rule.nodes.resize(n);
  rule.log_weights.resize(n);
  for (std::size_t i = 0; i < half; ++i) {
    const double r = roots[i];
    HermiteEval h = hermite_functions(n, r);
    // w = exp(-z^2) / (n psi_{n-1}(z)^2)
    const double log_w = -r * r - std::log(nd) - 2.0 * (std::log(std::fabs(h.psi_nm1)) + h.log_scale);
    rule.nodes[i] = -r;
    rule.log_weights[i] = log_w;
    rule.nodes[n - 1 - i] = r;
    rule.log_weights[n - 1 - i] = log_w;
  }
  return rule;
}

}  // namespace abidnn
