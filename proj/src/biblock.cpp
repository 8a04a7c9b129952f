#include "abidnn/biblock.hpp"

#include <string>

namespace abidnn {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::tanh:
      return "tanh";
    case Activation::relu:
      return "relu";
    case Activation::identity:
      return "identity";
  }
  return "identity";
}

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  if (name == "identity") return Activation::identity;
  throw ConfigurationError("unknown activation '" + std::string(name) + "' (valid: tanh, relu, identity)");
}

void NodeTriple::validate() const {
  if (!(h_left > 0.0) || !(h_right > 0.0) || !std::isfinite(h_left) || !std::isfinite(h_right) ||
      !std::isfinite(x)) {
    throw ConfigurationError("node triple (" + std::to_string(x) + ", " + std::to_string(h_left) + ", " +
                             std::to_string(h_right) + ") needs finite x and positive element lengths");
  }
}

std::size_t block_width(Activation a) {
  switch (a) {
    case Activation::relu:
      return 3;
    case Activation::tanh:
      return 2;
    case Activation::identity:
      break;
  }
  throw ConfigurationError("blocks support relu or tanh activations only");
}

std::vector<double> BIBlock::packed() const {
  std::vector<double> p;
  p.reserve(param_count());
  p.insert(p.end(), layer1_weights.begin(), layer1_weights.end());
  p.insert(p.end(), layer1_bias.begin(), layer1_bias.end());
  p.insert(p.end(), layer2_diag.begin(), layer2_diag.end());
  p.insert(p.end(), layer2_bias.begin(), layer2_bias.end());
  p.insert(p.end(), output_weights.begin(), output_weights.end());
  p.push_back(output_bias);
  return p;
}

BIBlock BIBlock::unpack(Activation a, std::span<const double> p, bool frozen) {
  const std::size_t w = block_width(a);
  if (p.size() != 5 * w + 1) {
    throw DimensionMismatch("block of activation " + std::string(to_string(a)) + " expects " +
                            std::to_string(5 * w + 1) + " parameters, got " + std::to_string(p.size()));
  }
  BIBlock b;
  b.activation = a;
  auto take = [&](std::size_t i) { return std::vector<double>(p.begin() + i * w, p.begin() + (i + 1) * w); };
  b.layer1_weights = take(0);
  b.layer1_bias = take(1);
  b.layer2_diag = take(2);
  b.layer2_bias = take(3);
  b.output_weights = take(4);
  b.output_bias = p[5 * w];
  b.frozen = frozen;
  return b;
}

void BIBlock::validate() const {
  const std::size_t w = block_width(activation);
  if (layer1_weights.size() != w || layer1_bias.size() != w || layer2_diag.size() != w ||
      layer2_bias.size() != w || output_weights.size() != w) {
    throw DimensionMismatch("block layer sizes must all equal " + std::to_string(w));
  }
}

BIBlock init_relu_block(const NodeTriple& node) {
  node.validate();
  const double left = std::sqrt(1.0 / node.h_left);
  const double mid = std::sqrt(0.5 * (1.0 / node.h_left + 1.0 / node.h_right));
  const double right = std::sqrt(1.0 / node.h_right);
  const double x_prev = node.x - node.h_left;
  const double x_next = node.x + node.h_right;

  BIBlock b;
  b.activation = Activation::relu;
  b.layer1_weights = {left, mid, right};
  b.layer1_bias = {-left * x_prev, -mid * node.x, -right * x_next};
  b.layer2_diag = b.layer1_weights;
  b.layer2_bias = {0.0, 0.0, 0.0};
  b.output_weights = {1.0, -2.0, 1.0};
  b.output_bias = 0.0;
  return b;
}

BIBlock init_tanh_block(const NodeTriple& node) {
  node.validate();
  const double left = std::sqrt(2.0 / node.h_left);
  const double right = std::sqrt(2.0 / node.h_right);
  const double mid_left = node.x - 0.5 * node.h_left;
  const double mid_right = node.x + 0.5 * node.h_right;

  BIBlock b;
  b.activation = Activation::tanh;
  b.layer1_weights = {left, right};
  b.layer1_bias = {-left * mid_left, -right * mid_right};
  b.layer2_diag = b.layer1_weights;
  b.layer2_bias = {0.0, 0.0};
  b.output_weights = {0.5, -0.5};
  b.output_bias = 0.0;
  return b;
}

BIBlock init_block(Activation a, const NodeTriple& node) {
  switch (a) {
    case Activation::relu:
      return init_relu_block(node);
    case Activation::tanh:
      return init_tanh_block(node);
    case Activation::identity:
      break;
  }
  throw ConfigurationError("blocks support relu or tanh activations only");
}

}  // namespace abidnn
