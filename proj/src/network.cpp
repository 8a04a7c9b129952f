#include "abidnn/network.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "abidnn/random.hpp"

namespace abidnn {

std::string_view to_string(NetworkKind k) { return k == NetworkKind::bidnn ? "bidnn" : "dnn"; }

NetworkKind parse_network_kind(std::string_view name) {
  if (name == "bidnn") return NetworkKind::bidnn;
  if (name == "dnn") return NetworkKind::dnn;
  throw ConfigurationError("unknown network kind '" + std::string(name) + "' (valid: bidnn, dnn)");
}

std::size_t Network::total_blocks() const {
  std::size_t n = 0;
  for (const auto& s : stacks) n += s.blocks.size();
  return n;
}

std::size_t Network::blocks_in(std::size_t dim) const {
  for (const auto& s : stacks) {
    if (s.dimension == dim) return s.blocks.size();
  }
  return 0;
}

std::size_t Network::feature_width() const { return kind == NetworkKind::bidnn ? total_blocks() : input_dim; }

std::string Network::structure() const {
  std::string s = "1";
  if (kind == NetworkKind::bidnn) {
    std::size_t neurons = 0;
    for (const auto& st : stacks) {
      for (const auto& b : st.blocks) neurons += b.width();
    }
    s += "-" + std::to_string(neurons) + "-" + std::to_string(neurons) + "-" + std::to_string(total_blocks());
  }
  for (const auto& l : layers) s += "-" + std::to_string(l.out);
  return s;
}

std::size_t Network::param_count() const {
  std::size_t n = 0;
  for (const auto& st : stacks) {
    for (const auto& b : st.blocks) n += b.param_count();
  }
  for (const auto& l : layers) n += l.param_count();
  return n;
}

ParameterStore Network::parameters() const {
  ParameterStore store;
  for (std::size_t s = 0; s < stacks.size(); ++s) {
    for (std::size_t j = 0; j < stacks[s].blocks.size(); ++j) {
      const BIBlock& b = stacks[s].blocks[j];
      std::vector<double> p = b.packed();
      store.add_group("stack" + std::to_string(s) + ".block" + std::to_string(j), p, !b.frozen);
    }
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    store.add_group("layer" + std::to_string(l) + ".weight", layers[l].weights);
    store.add_group("layer" + std::to_string(l) + ".bias", layers[l].biases);
  }
  return store;
}

std::vector<double> Network::flat_parameters() const {
  ParameterStore p = parameters();
  return {p.values().begin(), p.values().end()};
}

void Network::set_parameters(std::span<const double> theta) {
  if (theta.size() != param_count()) {
    throw DimensionMismatch("network has " + std::to_string(param_count()) + " parameters, got " +
                            std::to_string(theta.size()));
  }
  std::size_t off = 0;
  for (auto& st : stacks) {
    for (auto& b : st.blocks) {
      const std::size_t n = b.param_count();
      b = BIBlock::unpack(b.activation, theta.subspan(off, n), b.frozen);
      off += n;
    }
  }
  for (auto& l : layers) {
    std::copy_n(theta.begin() + static_cast<std::ptrdiff_t>(off), l.weights.size(), l.weights.begin());
    off += l.weights.size();
    std::copy_n(theta.begin() + static_cast<std::ptrdiff_t>(off), l.biases.size(), l.biases.begin());
    off += l.biases.size();
  }
}

std::vector<bool> Network::trainable_mask() const {
  std::vector<bool> mask;
  mask.reserve(param_count());
  for (const auto& st : stacks) {
    for (const auto& b : st.blocks) mask.insert(mask.end(), b.param_count(), !b.frozen);
  }
  for (const auto& l : layers) mask.insert(mask.end(), l.param_count(), true);
  return mask;
}

bool Network::any_frozen() const {
  for (const auto& st : stacks) {
    for (const auto& b : st.blocks) {
      if (b.frozen) return true;
    }
  }
  return false;
}

void Network::set_blocks_frozen(bool frozen) {
  for (auto& st : stacks) {
    for (auto& b : st.blocks) b.frozen = frozen;
  }
}

std::size_t Network::block_offset(std::size_t stack, std::size_t block) const {
  std::size_t off = 0;
  for (std::size_t s = 0; s < stacks.size(); ++s) {
    for (std::size_t j = 0; j < stacks[s].blocks.size(); ++j) {
      if (s == stack && j == block) return off;
      off += stacks[s].blocks[j].param_count();
    }
  }
  throw DimensionMismatch("no block " + std::to_string(block) + " in stack " + std::to_string(stack));
}

std::size_t Network::layer_offset(std::size_t layer) const {
  std::size_t off = 0;
  for (const auto& st : stacks) {
    for (const auto& b : st.blocks) off += b.param_count();
  }
  for (std::size_t l = 0; l < layer && l < layers.size(); ++l) off += layers[l].param_count();
  return off;
}

void Network::validate() const {
  if (input_dim < 1 || input_dim > static_cast<std::size_t>(kMaxInputDims)) {
    throw ConfigurationError("input dimension must lie in [1, " + std::to_string(kMaxInputDims) + "]");
  }
  if (kind == NetworkKind::bidnn) {
    if (stacks.size() != input_dim) throw ConfigurationError("BI-DNN needs one block stack per input dimension");
    for (std::size_t s = 0; s < stacks.size(); ++s) {
      if (stacks[s].dimension != s) throw ConfigurationError("block stacks must be ordered by dimension");
      if (stacks[s].blocks.empty()) throw ConfigurationError("block stack " + std::to_string(s) + " is empty");
      for (const auto& b : stacks[s].blocks) {
        if (b.activation != activation) throw ConfigurationError("all blocks must share the network activation");
        b.validate();
      }
    }
  } else if (!stacks.empty()) {
    throw ConfigurationError("plain DNN carries no block stacks");
  }
  if (layers.empty()) throw ConfigurationError("network needs at least one dense layer");
  std::size_t width = feature_width();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const DenseLayer& d = layers[l];
    if (d.in != width) throw DimensionMismatch("layer " + std::to_string(l) + " input width mismatch");
    if (d.weights.size() != d.in * d.out || d.biases.size() != d.out) {
      throw DimensionMismatch("layer " + std::to_string(l) + " parameter sizes do not match its shape");
    }
    width = d.out;
  }
  if (width != 1) throw DimensionMismatch("network output width must be 1");
  if (layers.back().activation != Activation::identity) {
    throw ConfigurationError("last layer must use the identity activation");
  }
}

double Network::forward(std::span<const double> x) const {
  std::vector<double> theta = flat_parameters();
  return forward_generic<double, double>(theta, x);
}

std::vector<NodeTriple> uniform_nodes(double a, double b, std::size_t m) {
  if (m == 0) throw ConfigurationError("uniform_nodes: need at least one node");
  if (!(b > a)) throw ConfigurationError("uniform_nodes: empty interval");
  std::vector<NodeTriple> nodes(m);
  const double h = m == 1 ? b - a : (b - a) / static_cast<double>(m - 1);
  for (std::size_t i = 0; i < m; ++i) nodes[i] = {a + static_cast<double>(i) * h, h, h};
  if (m > 1) nodes.back().x = b;
  return nodes;
}

namespace {

DenseLayer xavier_layer(std::size_t in, std::size_t out, Activation act, Rng& rng) {
  DenseLayer l;
  l.in = in;
  l.out = out;
  l.activation = act;
  l.weights.resize(in * out);
  l.biases.assign(out, 0.0);
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  for (double& w : l.weights) w = rng.uniform(-bound, bound);
  return l;
}

std::vector<DenseLayer> dense_stack(std::size_t in, const std::vector<std::size_t>& widths, Activation act,
                                    std::uint64_t seed) {
  Rng rng(seed);
  std::vector<DenseLayer> layers;
  std::size_t width = in;
  for (std::size_t w : widths) {
    layers.push_back(xavier_layer(width, w, act, rng));
    width = w;
  }
  layers.push_back(xavier_layer(width, 1, Activation::identity, rng));
  return layers;
}

}  // namespace

Network build_bidnn(const std::vector<std::vector<NodeTriple>>& nodes_per_dim, Activation activation,
                    std::size_t hidden_layers, std::uint64_t seed, bool frozen) {
  if (nodes_per_dim.empty()) throw ConfigurationError("build_bidnn: no dimensions given");
  block_width(activation);
  Network net;
  net.kind = NetworkKind::bidnn;
  net.input_dim = nodes_per_dim.size();
  net.activation = activation;
  for (std::size_t d = 0; d < nodes_per_dim.size(); ++d) {
    if (nodes_per_dim[d].empty()) {
      throw ConfigurationError("build_bidnn: dimension " + std::to_string(d) + " has no nodes");
    }
    BlockStack st;
    st.dimension = d;
    for (const auto& node : nodes_per_dim[d]) {
      BIBlock b = init_block(activation, node);
      b.frozen = frozen;
      st.blocks.push_back(std::move(b));
    }
    net.stacks.push_back(std::move(st));
  }
  const std::size_t B = net.total_blocks();
  net.layers = dense_stack(B, std::vector<std::size_t>(hidden_layers, B), activation, seed);
  net.validate();
  return net;
}

Network build_dnn(std::size_t input_dim, const std::vector<std::size_t>& hidden_widths, Activation activation,
                  std::uint64_t seed) {
  for (std::size_t w : hidden_widths) {
    if (w == 0) throw ConfigurationError("build_dnn: hidden width must be positive");
  }
  Network net;
  net.kind = NetworkKind::dnn;
  net.input_dim = input_dim;
  net.activation = activation;
  net.layers = dense_stack(input_dim, hidden_widths, activation, seed);
  net.validate();
  return net;
}

std::vector<std::size_t> parse_structure(std::string_view structure) {
  std::vector<std::size_t> widths;
  std::size_t pos = 0;
  while (pos <= structure.size()) {
    std::size_t end = structure.find('-', pos);
    if (end == std::string_view::npos) end = structure.size();
    std::string_view tok = structure.substr(pos, end - pos);
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size() || v == 0) {
      throw ParseError("structure: bad layer width '" + std::string(tok) + "' in '" + std::string(structure) + "'");
    }
    widths.push_back(v);
    pos = end + 1;
  }
  if (widths.size() < 2 || widths.front() != 1 || widths.back() != 1) {
    throw ParseError("structure: '" + std::string(structure) + "' must start and end with 1");
  }
  return widths;
}

Network build_from_structure(std::string_view structure, NetworkKind kind, std::size_t input_dim,
                             Activation activation, std::uint64_t seed) {
  std::vector<std::size_t> w = parse_structure(structure);
  if (kind == NetworkKind::dnn) {
    return build_dnn(input_dim, std::vector<std::size_t>(w.begin() + 1, w.end() - 1), activation, seed);
  }
  const std::size_t k = block_width(activation);
  if (w.size() < 5 || w[1] != w[2] || w[1] != k * w[3]) {
    throw ParseError("structure: '" + std::string(structure) + "' is not a " + std::string(to_string(activation)) +
                     " BI-DNN descriptor");
  }
  const std::size_t B = w[3];
  if (input_dim == 0 || B % input_dim != 0) {
    throw ParseError("structure: " + std::to_string(B) + " blocks cannot be split over " + std::to_string(input_dim) +
                     " dimensions");
  }
  for (std::size_t i = 4; i + 1 < w.size(); ++i) {
    if (w[i] != B) throw ParseError("structure: hidden widths must equal the block count");
  }
  std::vector<std::vector<NodeTriple>> nodes(input_dim, uniform_nodes(0.0, 1.0, B / input_dim));
  return build_bidnn(nodes, activation, w.size() - 5, seed);
}

std::size_t count_params(const Network& net) { return net.param_count(); }

std::size_t predicted_bidnn_params(Activation activation, std::size_t blocks, std::size_t hidden_layers) {
  return block_param_count(activation) * blocks + hidden_layers * (blocks * blocks + blocks) + blocks + 1;
}

EnhanceResult enhance_with_map(const Network& net, const std::vector<std::vector<NodeTriple>>& new_nodes_per_dim) {
  if (net.kind != NetworkKind::bidnn) throw ConfigurationError("enhance: only BI-DNNs can grow blocks");
  if (new_nodes_per_dim.size() != net.input_dim) {
    throw DimensionMismatch("enhance: expected node lists for " + std::to_string(net.input_dim) + " dimensions");
  }

  EnhanceResult r;
  Network& out = r.network;
  out = net;

  // Old feature index -> new feature index.
  std::vector<std::size_t> feature_map;
  std::size_t new_feature = 0;
  for (std::size_t s = 0; s < out.stacks.size(); ++s) {
    for (std::size_t j = 0; j < net.stacks[s].blocks.size(); ++j) feature_map.push_back(new_feature + j);
    for (const auto& node : new_nodes_per_dim[s]) out.stacks[s].blocks.push_back(init_block(net.activation, node));
    new_feature += out.stacks[s].blocks.size();
  }
  const std::size_t B = out.total_blocks();

  std::vector<std::size_t> in_map = feature_map;
  for (std::size_t l = 0; l < out.layers.size(); ++l) {
    const DenseLayer& old = net.layers[l];
    DenseLayer& d = out.layers[l];
    const bool hidden = l + 1 < out.layers.size();
    d.in = B;
    d.out = hidden ? B : old.out;
    d.weights.assign(d.in * d.out, 0.0);
    d.biases.assign(d.out, 0.0);
    for (std::size_t i = 0; i < old.out; ++i) {
      for (std::size_t j = 0; j < old.in; ++j) d.weights[i * d.in + in_map[j]] = old.weights[i * old.in + j];
      d.biases[i] = old.biases[i];
    }
    in_map.resize(old.out);
    for (std::size_t i = 0; i < old.out; ++i) in_map[i] = i;
  }

  r.index_map.resize(net.param_count());
  for (std::size_t s = 0; s < net.stacks.size(); ++s) {
    for (std::size_t j = 0; j < net.stacks[s].blocks.size(); ++j) {
      const std::size_t from = net.block_offset(s, j);
      const std::size_t to = out.block_offset(s, j);
      for (std::size_t q = 0; q < net.stacks[s].blocks[j].param_count(); ++q) r.index_map[from + q] = to + q;
    }
  }
  in_map = feature_map;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const DenseLayer& old = net.layers[l];
    const DenseLayer& d = out.layers[l];
    const std::size_t from = net.layer_offset(l);
    const std::size_t to = out.layer_offset(l);
    for (std::size_t i = 0; i < old.out; ++i) {
      for (std::size_t j = 0; j < old.in; ++j) r.index_map[from + i * old.in + j] = to + i * d.in + in_map[j];
      r.index_map[from + old.weights.size() + i] = to + d.weights.size() + i;
    }
    in_map.resize(old.out);
    for (std::size_t i = 0; i < old.out; ++i) in_map[i] = i;
  }
  out.validate();
  return r;
}

Network enhance(const Network& net, const std::vector<std::vector<NodeTriple>>& new_nodes_per_dim) {
  return enhance_with_map(net, new_nodes_per_dim).network;
}

std::vector<double> input_jacobian(const Network& net, std::span<const double> x) {
  std::vector<double> theta = net.flat_parameters();
  return input_jacobian(
      [&](std::span<const InputJet> xs) { return net.forward_generic<InputJet, double>(theta, xs); }, x);
}

double input_laplacian(const Network& net, std::span<const double> x) {
  if (net.activation == Activation::relu) {
    throw ConfigurationError("Laplacian of a ReLU network is identically zero almost everywhere; use tanh");
  }
  std::vector<double> theta = net.flat_parameters();
  return input_laplacian(
      [&](std::span<const InputJet> xs) { return net.forward_generic<InputJet, double>(theta, xs); }, x);
}

std::vector<double> block_features(const Network& net, std::span<const double> x) {
  if (x.size() != net.input_dim) throw DimensionMismatch("block_features: input dimension mismatch");
  std::vector<double> f;
  for (const auto& st : net.stacks) {
    for (const auto& b : st.blocks) f.push_back(eval_block(b, x[st.dimension]));
  }
  return f;
}

}  // namespace abidnn
