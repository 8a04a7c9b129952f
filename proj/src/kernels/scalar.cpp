#include <algorithm>
#include <cmath>
#include <vector>

#include "abidnn/kernels.hpp"

namespace abidnn {

namespace {

void tanh_scalar(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

void gemm_nn_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
                    std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  std::vector<double> s(n);
  for (std::size_t i = 0; i < m; ++i) {
    std::fill(s.begin(), s.end(), 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * lda + p];
      const double* brow = b + p * ldb;
      for (std::size_t j = 0; j < n; ++j) s[j] += av * brow[j];
    }
    double* crow = c + i * ldc;
    for (std::size_t j = 0; j < n; ++j) crow[j] = accumulate ? crow[j] + s[j] : s[j];
  }
}

void gemm_nt_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
                    std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * lda;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * ldb;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      c[i * ldc + j] = accumulate ? c[i * ldc + j] + s : s;
    }
  }
}

struct Slopes {
  double s1, s2, s3;
};

inline Slopes slopes(Activation act, double z, double y) {
  switch (act) {
    case Activation::tanh: {
      const double s1 = 1.0 - y * y;
      const double s2 = -2.0 * y * s1;
      return {s1, s2, -2.0 * s1 * s1 + 4.0 * y * y * s1};
    }
    case Activation::relu:
      return {z > 0.0 ? 1.0 : 0.0, 0.0, 0.0};
    case Activation::identity:
      break;
  }
  return {1.0, 0.0, 0.0};
}

void jet_act_forward_scalar(Activation act, const double* z, double* y, std::size_t C, std::size_t K) {
  if (act == Activation::tanh) {
    tanh_scalar(z, y, C);
  } else {
    for (std::size_t p = 0; p < C; ++p) y[p] = act == Activation::relu ? (z[p] > 0.0 ? z[p] : 0.0) : z[p];
  }
  if (K == 0) return;
  for (std::size_t p = 0; p < C; ++p) {
    const Slopes s = slopes(act, z[p], y[p]);
    for (std::size_t k = 0; k < K; ++k) {
      const double zd = z[(1 + k) * C + p];
      const double zdd = z[(1 + K + k) * C + p];
      y[(1 + k) * C + p] = s.s1 * zd;
      y[(1 + K + k) * C + p] = s.s2 * zd * zd + s.s1 * zdd;
    }
  }
}

void jet_act_backward_scalar(Activation act, const double* z, const double* y, const double* ybar, double* zbar,
                             std::size_t C, std::size_t K) {
  for (std::size_t p = 0; p < C; ++p) {
    const Slopes s = slopes(act, z[p], y[p]);
    double v = ybar[p] * s.s1;
    for (std::size_t k = 0; k < K; ++k) {
      const double zd = z[(1 + k) * C + p];
      const double zdd = z[(1 + K + k) * C + p];
      const double bd = ybar[(1 + k) * C + p];
      const double bdd = ybar[(1 + K + k) * C + p];
      v += bd * s.s2 * zd + bdd * (s.s3 * zd * zd + s.s2 * zdd);
      zbar[(1 + k) * C + p] = bd * s.s1 + 2.0 * bdd * s.s2 * zd;
      zbar[(1 + K + k) * C + p] = bdd * s.s1;
    }
    zbar[p] = v;
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar", tanh_scalar, gemm_nn_scalar, gemm_nt_scalar, jet_act_forward_scalar,
                                 jet_act_backward_scalar};
  return table;
}

}  // namespace abidnn
