#include "abidnn/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

namespace abidnn {

namespace {

constexpr std::string_view kMagic = "abidnn-checkpoint";
constexpr int kVersion = 1;

class Lines {
 public:
  explicit Lines(std::string_view text) : text_(text) {}

  /// Next non-empty line split on spaces; `field` names what is expected.
  std::vector<std::string_view> next(std::string_view field) {
    while (pos_ < text_.size()) {
      std::size_t end = text_.find('\n', pos_);
      if (end == std::string_view::npos) end = text_.size();
      std::string_view line = text_.substr(pos_, end - pos_);
      pos_ = end + 1;
      ++line_no_;
      std::vector<std::string_view> toks;
      std::size_t i = 0;
      while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\r' || line[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\r' && line[j] != '\t') ++j;
        if (j > i) toks.push_back(line.substr(i, j - i));
        i = j;
      }
      if (!toks.empty()) return toks;
    }
    throw ParseError("checkpoint: unexpected end of file, expected field '" + std::string(field) + "'");
  }

  std::vector<std::string_view> expect(std::string_view key, std::size_t count) {
    auto toks = next(key);
    if (toks[0] != key || toks.size() != count + 1) {
      throw ParseError("checkpoint line " + std::to_string(line_no_) + ": expected field '" + std::string(key) +
                       "' with " + std::to_string(count) + " value(s)");
    }
    return toks;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_no_ = 0;
};

std::uint64_t parse_uint(std::string_view s, std::string_view field) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("checkpoint: field '" + std::string(field) + "' is not an unsigned integer: '" +
                     std::string(s) + "'");
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

double parse_double(std::string_view s, std::string_view field) {
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ParseError("field '" + std::string(field) + "' is not a number: '" + std::string(s) + "'");
  }
  return v;
}

std::string format_checkpoint(const Network& net, std::uint64_t seed) {
  net.validate();
  std::ostringstream os;
  os << kMagic << ' ' << kVersion << '\n';
  os << "kind " << to_string(net.kind) << '\n';
  os << "structure " << net.structure() << '\n';
  os << "input_dim " << net.input_dim << '\n';
  os << "activation " << to_string(net.activation) << '\n';
  os << "seed " << seed << '\n';
  os << "stacks " << net.stacks.size() << '\n';
  for (const auto& st : net.stacks) os << "stack " << st.dimension << ' ' << st.blocks.size() << '\n';
  os << "layers " << net.layers.size() << '\n';
  for (const auto& l : net.layers) os << "layer " << l.in << ' ' << l.out << ' ' << to_string(l.activation) << '\n';
  ParameterStore store = net.parameters();
  os << "groups " << store.groups().size() << '\n';
  for (const auto& g : store.groups()) {
    os << "group " << g.name << ' ' << g.size << ' ' << (g.trainable ? "trainable" : "frozen");
    for (std::size_t i = 0; i < g.size; ++i) os << ' ' << format_double(store.values()[g.offset + i]);
    os << '\n';
  }
  os << "end\n";
  return os.str();
}

Checkpoint parse_checkpoint(std::string_view text) {
  Lines in(text);
  auto header = in.expect(kMagic, 1);
  if (parse_uint(header[1], "version") != static_cast<std::uint64_t>(kVersion)) {
    throw ParseError("checkpoint: unsupported field 'version' " + std::string(header[1]));
  }
  Checkpoint cp;
  Network& net = cp.network;
  try {
    net.kind = parse_network_kind(in.expect("kind", 1)[1]);
  } catch (const ConfigurationError& e) {
    throw ParseError(std::string("checkpoint: bad field 'kind': ") + e.what());
  }
  std::string structure(in.expect("structure", 1)[1]);
  net.input_dim = parse_uint(in.expect("input_dim", 1)[1], "input_dim");
  try {
    net.activation = parse_activation(in.expect("activation", 1)[1]);
  } catch (const ConfigurationError& e) {
    throw ParseError(std::string("checkpoint: bad field 'activation': ") + e.what());
  }
  cp.seed = parse_uint(in.expect("seed", 1)[1], "seed");

  const std::size_t n_stacks = parse_uint(in.expect("stacks", 1)[1], "stacks");
  std::vector<std::size_t> stack_sizes;
  for (std::size_t s = 0; s < n_stacks; ++s) {
    auto t = in.expect("stack", 2);
    BlockStack st;
    st.dimension = parse_uint(t[1], "stack.dimension");
    stack_sizes.push_back(parse_uint(t[2], "stack.blocks"));
    net.stacks.push_back(std::move(st));
  }
  const std::size_t n_layers = parse_uint(in.expect("layers", 1)[1], "layers");
  for (std::size_t l = 0; l < n_layers; ++l) {
    auto t = in.expect("layer", 3);
    DenseLayer d;
    d.in = parse_uint(t[1], "layer.in");
    d.out = parse_uint(t[2], "layer.out");
    d.activation = parse_activation(t[3]);
    net.layers.push_back(std::move(d));
  }

  const std::size_t n_groups = parse_uint(in.expect("groups", 1)[1], "groups");
  std::size_t expected_groups = 2 * n_layers;
  for (std::size_t n : stack_sizes) expected_groups += n;
  if (n_groups != expected_groups) {
    throw ParseError("checkpoint: field 'groups' is " + std::to_string(n_groups) + ", layout implies " +
                     std::to_string(expected_groups));
  }

  auto read_group = [&](const std::string& name, std::size_t size, bool* trainable) {
    auto t = in.next("group " + name);
    if (t.size() < 4 || t[0] != "group" || t[1] != name) {
      throw ParseError("checkpoint: expected field 'group " + name + "'");
    }
    if (parse_uint(t[2], "group " + name + " size") != size || t.size() != 4 + size) {
      throw ParseError("checkpoint: field 'group " + name + "' has wrong size");
    }
    if (t[3] != "trainable" && t[3] != "frozen") {
      throw ParseError("checkpoint: field 'group " + name + "' flag must be trainable or frozen");
    }
    if (trainable) *trainable = t[3] == "trainable";
    std::vector<double> v(size);
    for (std::size_t i = 0; i < size; ++i) v[i] = parse_double(t[4 + i], "group " + name);
    return v;
  };

  const std::size_t bp = net.kind == NetworkKind::bidnn ? block_param_count(net.activation) : 0;
  for (std::size_t s = 0; s < net.stacks.size(); ++s) {
    for (std::size_t j = 0; j < stack_sizes[s]; ++j) {
      bool trainable = true;
      auto v = read_group("stack" + std::to_string(s) + ".block" + std::to_string(j), bp, &trainable);
      net.stacks[s].blocks.push_back(BIBlock::unpack(net.activation, v, !trainable));
    }
  }
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    DenseLayer& d = net.layers[l];
    d.weights = read_group("layer" + std::to_string(l) + ".weight", d.in * d.out, nullptr);
    d.biases = read_group("layer" + std::to_string(l) + ".bias", d.out, nullptr);
  }
  in.expect("end", 0);

  try {
    net.validate();
  } catch (const Error& e) {
    throw ParseError(std::string("checkpoint: inconsistent layout: ") + e.what());
  }
  if (net.structure() != structure) {
    throw ParseError("checkpoint: field 'structure' " + structure + " does not match layout " + net.structure());
  }
  return cp;
}

void save_checkpoint(const Network& net, const std::filesystem::path& path, std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << format_checkpoint(net, seed);
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

Network load_checkpoint(const std::filesystem::path& path) { return read_checkpoint(path).network; }

}  // namespace abidnn
