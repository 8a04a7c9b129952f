#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "abidnn/autodiff.hpp"

namespace abidnn {

enum class Activation { tanh, relu, identity };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

template <class S>
S activate(Activation a, const S& z) {
  using std::tanh;
  switch (a) {
    case Activation::tanh:
      return tanh(z);
    case Activation::relu:
      return relu(z);
    case Activation::identity:
      break;
  }
  return z;
}

/// Mesh node x_j with the lengths of its left and right elements.
struct NodeTriple {
  double x = 0.0;
  double h_left = 0.0;
  double h_right = 0.0;

  void validate() const;
  bool operator==(const NodeTriple&) const = default;
};

/// Neurons per block layer: 3 for ReLU (exact hat), 2 for Tanh (approximate hat).
std::size_t block_width(Activation a);

/// Parameter count of one block: per-neuron layer-1 weight and bias, diagonal
/// layer-2 weight and bias, output weight, plus one output bias.
inline std::size_t block_param_count(Activation a) { return 5 * block_width(a) + 1; }

/// One basis-inspired block: out = W2 . sigma(D2 (W1 x + b1) + b2) + b2_out,
/// with D2 diagonal.
struct BIBlock {
  Activation activation = Activation::tanh;
  std::vector<double> layer1_weights;
  std::vector<double> layer1_bias;
  std::vector<double> layer2_diag;
  std::vector<double> layer2_bias;
  std::vector<double> output_weights;
  double output_bias = 0.0;
  bool frozen = false;

  std::size_t width() const { return layer1_weights.size(); }
  std::size_t param_count() const { return 5 * width() + 1; }

  /// Parameters in store order: w1, b1, w2, b2, w_out, b_out.
  std::vector<double> packed() const;
  static BIBlock unpack(Activation a, std::span<const double> p, bool frozen = false);

  void validate() const;
  bool operator==(const BIBlock&) const = default;
};

BIBlock init_relu_block(const NodeTriple& node);
BIBlock init_tanh_block(const NodeTriple& node);
BIBlock init_block(Activation a, const NodeTriple& node);

/// Evaluates a block stored in packed order. S is the evaluation carrier
/// (double, Var, Jet<...>), P the parameter carrier.
template <class S, class P>
S eval_block_packed(Activation a, std::size_t width, std::span<const P> p, const S& x) {
  const P* w1 = p.data();
  const P* b1 = w1 + width;
  const P* w2 = b1 + width;
  const P* b2 = w2 + width;
  const P* w3 = b2 + width;
  const P& b3 = w3[width];
  S out{};
  for (std::size_t q = 0; q < width; ++q) {
    S z1 = x * w1[q] + b1[q];
    S z2 = z1 * w2[q] + b2[q];
    out = out + activate(a, z2) * w3[q];
  }
  return out + b3;
}

template <class S>
S eval_block(const BIBlock& block, const S& x) {
  std::vector<double> p = block.packed();
  return eval_block_packed<S, double>(block.activation, block.width(), std::span<const double>(p), x);
}

}  // namespace abidnn
