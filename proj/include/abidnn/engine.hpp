#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "abidnn/kernels.hpp"
#include "abidnn/network.hpp"
#include "abidnn/problems.hpp"

namespace abidnn {

/// Points with one target value each; the residual is r = L u - target.
struct ResidualBatch {
  OperatorKind op = OperatorKind::identity;
  std::span<const double> points;   // count * dim
  std::span<const double> targets;  // count
};

/// Batched evaluator for a fixed architecture. Processes points in chunks,
/// propagating value/derivative jets through the blocks and the dense layers,
/// and back-propagates the mean squared residual analytically.
///
/// Results depend only on the inputs and the kernel table, never on timing.
/// An Engine owns scratch buffers and must not be shared between threads.
class Engine {
 public:
  explicit Engine(const Network& net, const KernelTable& kernels = abidnn::kernels(), std::size_t chunk = 128);

  std::size_t input_dim() const { return dim_; }
  std::size_t param_count() const { return n_params_; }
  const KernelTable& kernel_table() const { return *kt_; }

  /// mean(r^2) over the batch. When `grad` is nonempty, adds
  /// scale * d mean(r^2) / d theta into it.
  double mean_square(std::span<const double> theta, const ResidualBatch& batch, std::span<double> grad,
                     double scale = 1.0);

  /// Pointwise residuals r = L u - target.
  void residuals(std::span<const double> theta, const ResidualBatch& batch, std::span<double> out);

  /// Network values at the points.
  void predict(std::span<const double> theta, std::span<const double> points, std::span<double> out);

 private:
  struct BlockInfo {
    std::size_t dimension;
    std::size_t width;
    std::size_t offset;
    Activation act;
    bool frozen;
  };
  struct LayerInfo {
    std::size_t in;
    std::size_t out;
    std::size_t offset;
    Activation act;
  };

  void forward_chunk(std::span<const double> theta, const double* pts, std::size_t C, std::size_t K);
  void backward_chunk(std::span<const double> theta, const double* pts, std::size_t C, std::size_t K,
                      std::span<double> grad);
  double chunk_residuals(OperatorKind op, const double* targets, std::size_t C, std::size_t K, double* r) const;

  const KernelTable* kt_;
  NetworkKind kind_;
  std::size_t dim_;
  std::size_t chunk_;
  std::size_t n_params_;
  bool relu_ = false;
  std::vector<BlockInfo> blocks_;
  std::vector<LayerInfo> layers_;

  // Scratch for the current chunk.
  std::vector<std::vector<double>> acts_;  // acts_[l]: input of layer l; acts_.back(): output
  std::vector<std::vector<double>> pre_;   // pre-activations of each dense layer
  std::vector<double> block_z1_;           // per block neuron, C values
  std::vector<double> block_y_;
  std::vector<double> z2_;
  std::vector<double> bar_;
  std::vector<double> bar_prev_;
  std::vector<double> zbar_;
  std::vector<double> wt_;
  std::vector<double> ubar_;
  std::vector<double> resid_;
};

}  // namespace abidnn
