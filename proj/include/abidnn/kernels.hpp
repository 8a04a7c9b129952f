#pragma once

#include <cstddef>
#include <string_view>

#include "abidnn/biblock.hpp"

namespace abidnn {

// Batched dense kernels used by the training engine.
//
// A "jet row" holds one neuron over a chunk of C points as 1 + 2K contiguous
// components of length C: value, first derivatives d_0..d_{K-1}, then diagonal
// second derivatives dd_0..dd_{K-1}.

/// C[m x n] (+)= A[m x k] * B[k x n], row-major with leading dimensions.
using GemmFn = void (*)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                        const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate);

using TanhFn = void (*)(const double* x, double* y, std::size_t n);

/// y = act(z) on one jet row.
using JetActForwardFn = void (*)(Activation act, const double* z, double* y, std::size_t C, std::size_t K);

/// zbar from ybar on one jet row; z and y are the forward values.
using JetActBackwardFn = void (*)(Activation act, const double* z, const double* y, const double* ybar, double* zbar,
                                  std::size_t C, std::size_t K);

struct KernelTable {
  const char* name;
  TanhFn tanh;
  GemmFn gemm_nn;
  /// C[m x n] (+)= A[m x k] * B[n x k]^T.
  GemmFn gemm_nt;
  JetActForwardFn jet_act_forward;
  JetActBackwardFn jet_act_backward;
};

const KernelTable& scalar_kernels();

/// AVX2/FMA table, or nullptr when not compiled in or not supported by the CPU.
const KernelTable* avx2_kernels();

/// Table chosen at first use: ABIDNN_KERNELS=scalar|avx2|auto, default auto.
const KernelTable& kernels();

const KernelTable& kernels_by_name(std::string_view name);

}  // namespace abidnn
