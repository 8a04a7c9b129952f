#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "abidnn/autodiff.hpp"
#include "abidnn/biblock.hpp"

namespace abidnn {

/// Blocks acting on one input coordinate.
struct BlockStack {
  std::size_t dimension = 0;
  std::vector<BIBlock> blocks;

  bool operator==(const BlockStack&) const = default;
};

/// Fully connected layer, weights stored row-major (out x in).
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> biases;
  Activation activation = Activation::identity;

  std::size_t param_count() const { return weights.size() + biases.size(); }
  bool operator==(const DenseLayer&) const = default;
};

enum class NetworkKind {
  bidnn,  // per-dimension block stacks feeding the dense subnetwork
  dnn,    // plain fully connected network on the raw input
};

std::string_view to_string(NetworkKind k);
NetworkKind parse_network_kind(std::string_view name);

class Network {
 public:
  NetworkKind kind = NetworkKind::bidnn;
  std::size_t input_dim = 1;
  Activation activation = Activation::tanh;
  std::vector<BlockStack> stacks;
  std::vector<DenseLayer> layers;

  std::size_t total_blocks() const;
  std::size_t blocks_in(std::size_t dim) const;
  /// Width of the vector entering the dense subnetwork.
  std::size_t feature_width() const;
  std::size_t hidden_layers() const { return layers.empty() ? 0 : layers.size() - 1; }

  /// Layer-width descriptor such as "1-40-40-20-20-20-1". The leading entry is
  /// always 1; the true input dimension is carried in input_dim.
  std::string structure() const;
  std::size_t param_count() const;

  /// Flat parameters: every block in stack order, then per dense layer its
  /// weights and biases.
  ParameterStore parameters() const;
  std::vector<double> flat_parameters() const;
  void set_parameters(std::span<const double> theta);
  std::vector<bool> trainable_mask() const;
  bool any_frozen() const;
  void set_blocks_frozen(bool frozen);

  /// Offset of block j of stack s in the flat parameter vector.
  std::size_t block_offset(std::size_t stack, std::size_t block) const;
  /// Offset of the weights of dense layer l; biases follow them.
  std::size_t layer_offset(std::size_t layer) const;

  void validate() const;

  double forward(std::span<const double> x) const;
  double forward(double x) const { return forward(std::span<const double>(&x, 1)); }

  /// Evaluation with explicit parameter vector. S carries the inputs (double,
  /// Jet, DiffScalar), P the parameters (double or Var).
  template <class S, class P>
  S forward_generic(std::span<const P> theta, std::span<const S> x) const;

  bool operator==(const Network&) const = default;
};

using BIDNN = Network;

/// Nodes x_i = a + i h, h = (b - a) / (m - 1), each with equal element lengths h.
std::vector<NodeTriple> uniform_nodes(double a, double b, std::size_t m);

Network build_bidnn(const std::vector<std::vector<NodeTriple>>& nodes_per_dim, Activation activation,
                    std::size_t hidden_layers, std::uint64_t seed, bool frozen = false);

/// Plain fully connected network with the given hidden widths.
Network build_dnn(std::size_t input_dim, const std::vector<std::size_t>& hidden_widths, Activation activation,
                  std::uint64_t seed);

/// Rebuilds an architecture from its structure string. Blocks are split evenly
/// across dimensions and initialized on uniform nodes of [0, 1].
Network build_from_structure(std::string_view structure, NetworkKind kind, std::size_t input_dim,
                             Activation activation, std::uint64_t seed);

std::vector<std::size_t> parse_structure(std::string_view structure);

std::size_t count_params(const Network& net);

/// Parameter count of a BI-DNN with `blocks` blocks in total and hidden widths
/// equal to the block count.
std::size_t predicted_bidnn_params(Activation activation, std::size_t blocks, std::size_t hidden_layers);

struct EnhanceResult {
  Network network;
  /// For every old flat parameter index, its index in the enhanced network.
  std::vector<std::size_t> index_map;
};

/// Appends blocks for the new nodes and widens the hidden layers, with every new
/// weight and bias zero. The enhanced network computes the same function.
EnhanceResult enhance_with_map(const Network& net, const std::vector<std::vector<NodeTriple>>& new_nodes_per_dim);
Network enhance(const Network& net, const std::vector<std::vector<NodeTriple>>& new_nodes_per_dim);

std::vector<double> input_jacobian(const Network& net, std::span<const double> x);
/// Throws ConfigurationError for ReLU networks, whose second derivatives vanish.
double input_laplacian(const Network& net, std::span<const double> x);

/// Block outputs in feature order; used to inspect per-dimension separability.
std::vector<double> block_features(const Network& net, std::span<const double> x);

template <class S, class P>
S Network::forward_generic(std::span<const P> theta, std::span<const S> x) const {
  if (x.size() != input_dim) {
    throw DimensionMismatch("network takes " + std::to_string(input_dim) + " inputs, got " +
                            std::to_string(x.size()));
  }
  std::vector<S> a;
  std::size_t off = 0;
  if (kind == NetworkKind::bidnn) {
    a.reserve(total_blocks());
    for (const auto& st : stacks) {
      for (const auto& b : st.blocks) {
        const std::size_t n = b.param_count();
        a.push_back(eval_block_packed<S, P>(b.activation, b.width(), theta.subspan(off, n), x[st.dimension]));
        off += n;
      }
    }
  } else {
    a.assign(x.begin(), x.end());
  }
  std::vector<S> z;
  for (const auto& layer : layers) {
    z.assign(layer.out, S{});
    const P* w = theta.data() + off;
    const P* bias = w + layer.in * layer.out;
    for (std::size_t i = 0; i < layer.out; ++i) {
      S s{};
      for (std::size_t j = 0; j < layer.in; ++j) s = s + a[j] * w[i * layer.in + j];
      z[i] = activate(layer.activation, s + bias[i]);
    }
    off += layer.in * layer.out + layer.out;
    a.swap(z);
  }
  return a.at(0);
}

}  // namespace abidnn
