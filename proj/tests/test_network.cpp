#include <doctest.h>

#include <cmath>
#include <random>

#include "abidnn/network.hpp"

using namespace abidnn;

namespace {

std::size_t bidnn_count(std::size_t k, std::size_t blocks, std::size_t hidden) {
  return (5 * k + 1) * blocks + hidden * (blocks * blocks + blocks) + blocks + 1;
}

Network randomized(Network net, std::mt19937_64& gen, double spread = 0.3) {
  std::uniform_real_distribution<double> u(-spread, spread);
  std::vector<double> theta = net.flat_parameters();
  for (double& v : theta) v += u(gen);
  net.set_parameters(theta);
  return net;
}

std::vector<std::vector<NodeTriple>> nodes_1d(std::size_t n) { return {uniform_nodes(0.0, 1.0, n)}; }

}  // namespace

TEST_CASE("structure strings") {
  CHECK(build_bidnn(nodes_1d(10), Activation::tanh, 0, 1).structure() == "1-20-20-10-1");
  CHECK(build_bidnn({uniform_nodes(-1, 1, 10), uniform_nodes(-1, 1, 10)}, Activation::tanh, 2, 1).structure() ==
        "1-40-40-20-20-20-1");
  CHECK(build_bidnn({{{0.5, 0.5, 0.5}}}, Activation::tanh, 0, 1).structure() == "1-2-2-1-1");
  CHECK(build_bidnn(nodes_1d(5), Activation::relu, 1, 1).structure() == "1-15-15-5-5-1");
  CHECK(build_dnn(1, {9, 9, 9}, Activation::tanh, 1).structure() == "1-9-9-9-1");
}

TEST_CASE("parameter counts of published architectures") {
  CHECK(count_params(build_bidnn(nodes_1d(10), Activation::tanh, 0, 1)) == 121);
  CHECK(count_params(build_bidnn(nodes_1d(16), Activation::tanh, 0, 1)) == 193);
  CHECK(count_params(build_bidnn({uniform_nodes(-1, 1, 10), uniform_nodes(-1, 1, 10)}, Activation::tanh, 2, 1)) ==
        1081);
  CHECK(count_params(build_bidnn({uniform_nodes(-1, 1, 12), uniform_nodes(-1, 1, 12)}, Activation::tanh, 2, 1)) ==
        1489);
  CHECK(count_params(build_dnn(1, {9, 9, 9}, Activation::tanh, 1)) == 208);
  CHECK(count_params(build_dnn(2, {19, 19, 19, 19, 19}, Activation::tanh, 1)) == 1597);
}

TEST_CASE("count_params agrees with the closed form and the parameter store") {
  for (Activation act : {Activation::tanh, Activation::relu}) {
    for (std::size_t b = 1; b < 30; b += 3) {
      for (std::size_t h = 0; h < 4; ++h) {
        Network net = build_bidnn(nodes_1d(b + 1), act, h, 2);
        CHECK(count_params(net) == bidnn_count(block_width(act), b + 1, h));
        CHECK(net.parameters().size() == count_params(net));
        CHECK(predicted_bidnn_params(act, b + 1, h) == count_params(net));
      }
    }
  }
}

TEST_CASE("xavier initialization of the dense layers") {
  Network net = build_bidnn({uniform_nodes(-1, 1, 6), uniform_nodes(-1, 1, 6)}, Activation::tanh, 2, 42);
  for (const DenseLayer& l : net.layers) {
    const double bound = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
    double mx = 0.0;
    for (double w : l.weights) mx = std::max(mx, std::fabs(w));
    CHECK(mx <= bound);
    CHECK(mx > 0.0);
    for (double b : l.biases) CHECK(b == 0.0);
  }
  CHECK(net.layers.back().activation == Activation::identity);
  CHECK(net.layers.back().out == 1);
  CHECK(build_bidnn(nodes_1d(6), Activation::tanh, 1, 42) == build_bidnn(nodes_1d(6), Activation::tanh, 1, 42));
  CHECK_FALSE(build_bidnn(nodes_1d(6), Activation::tanh, 1, 42) == build_bidnn(nodes_1d(6), Activation::tanh, 1, 43));
}

TEST_CASE("build errors") {
  CHECK_THROWS_AS(build_bidnn({}, Activation::tanh, 0, 1), ConfigurationError);
  CHECK_THROWS_AS(build_bidnn({{}}, Activation::tanh, 0, 1), ConfigurationError);
}

TEST_CASE("single relu block through an identity layer equals the block") {
  const NodeTriple n{0.5, 0.5, 0.5};
  Network net = build_bidnn({{n}}, Activation::relu, 0, 1);
  net.layers[0].weights = {1.0};
  net.layers[0].biases = {0.0};
  BIBlock b = init_relu_block(n);
  for (int i = 0; i <= 100; ++i) {
    const double x = i / 100.0;
    CHECK(net.forward(x) == eval_block(b, x));
  }
}

TEST_CASE("frozen relu network reproduces the nodal interpolant") {
  const std::size_t n = 9;
  Network net = build_bidnn(nodes_1d(n), Activation::relu, 0, 1, true);
  std::vector<double> u(n);
  for (std::size_t j = 0; j < n; ++j) u[j] = std::sin(3.0 * j / (n - 1.0)) + 0.1 * j;
  net.layers[0].weights = u;
  net.layers[0].biases = {0.0};
  double worst = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double x = i / 1000.0;
    const double h = 1.0 / (n - 1.0);
    std::size_t e = std::min<std::size_t>(static_cast<std::size_t>(x / h), n - 2);
    const double t = (x - e * h) / h;
    const double interp = (1 - t) * u[e] + t * u[e + 1];
    worst = std::max(worst, std::fabs(net.forward(x) - interp));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("zeroed second-dimension pathway makes the output constant in x2") {
  std::mt19937_64 gen(3);
  Network net = randomized(build_bidnn({uniform_nodes(-1, 1, 4), uniform_nodes(-1, 1, 5)}, Activation::tanh, 1, 3), gen);
  DenseLayer& first = net.layers[0];
  for (std::size_t r = 0; r < first.out; ++r) {
    for (std::size_t c = 4; c < first.in; ++c) first.weights[r * first.in + c] = 0.0;
  }
  for (double x1 : {-0.7, 0.1, 0.9}) {
    const double ref = net.forward(std::vector<double>{x1, -1.0});
    for (double x2 : {-0.5, 0.0, 0.3, 1.0}) CHECK(net.forward(std::vector<double>{x1, x2}) == ref);
  }
}

TEST_CASE("forward checks the input dimension") {
  Network net = build_bidnn(nodes_1d(3), Activation::tanh, 0, 1);
  CHECK_THROWS_AS(net.forward(std::vector<double>{0.1, 0.2}), DimensionMismatch);
}

TEST_CASE("each coordinate drives only its own stack") {
  std::mt19937_64 gen(8);
  Network net = randomized(build_bidnn({uniform_nodes(-1, 1, 3), uniform_nodes(-1, 1, 4)}, Activation::tanh, 1, 5), gen);
  std::vector<double> x{0.2, -0.4};
  std::vector<double> base = block_features(net, x);
  REQUIRE(base.size() == 7);
  std::vector<double> x1{0.25, -0.4};
  std::vector<double> f1 = block_features(net, x1);
  for (std::size_t j = 0; j < 3; ++j) CHECK(f1[j] != base[j]);
  for (std::size_t j = 3; j < 7; ++j) CHECK(f1[j] == base[j]);
  std::vector<double> x2{0.2, -0.3};
  std::vector<double> f2 = block_features(net, x2);
  for (std::size_t j = 0; j < 3; ++j) CHECK(f2[j] == base[j]);
  for (std::size_t j = 3; j < 7; ++j) CHECK(f2[j] != base[j]);
}

TEST_CASE("enhance examples") {
  Network a = build_bidnn({uniform_nodes(-1, 1, 10), uniform_nodes(-1, 1, 10)}, Activation::tanh, 2, 1);
  Network b = enhance(a, {{{0.1, 0.05, 0.05}}, {{0.1, 0.05, 0.05}}});
  CHECK(b.structure() == "1-44-44-22-22-22-1");
  CHECK(count_params(b) == 1277);
  Network c = enhance(build_bidnn(nodes_1d(10), Activation::tanh, 0, 1), {{{0.2, 0.05, 0.05}}});
  CHECK(c.structure() == "1-22-22-11-1");
  CHECK(count_params(c) == 133);
  CHECK(enhance(c, {{}}) == c);
  CHECK_THROWS(enhance(c, {{}, {}}));
}

TEST_CASE("enhance preserves the function and follows the width-growth rule") {
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<int> dims(1, 2), blocks(2, 8), hidden(0, 3), extra(0, 3), act(0, 1);
  std::uniform_real_distribution<double> pos(-1.0, 1.0), rad(0.01, 0.4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = static_cast<std::size_t>(dims(gen));
    const Activation a = act(gen) ? Activation::relu : Activation::tanh;
    std::vector<std::vector<NodeTriple>> nodes;
    for (std::size_t k = 0; k < d; ++k) nodes.push_back(uniform_nodes(-1, 1, static_cast<std::size_t>(blocks(gen))));
    const std::size_t h = static_cast<std::size_t>(hidden(gen));
    Network net = randomized(build_bidnn(nodes, a, h, static_cast<std::uint64_t>(trial)), gen);
    std::vector<std::vector<NodeTriple>> added(d);
    std::size_t n_added = 0;
    while (n_added == 0) {
      for (std::size_t k = 0; k < d; ++k) {
        const int m = extra(gen);
        for (int i = 0; i < m; ++i) added[k].push_back({pos(gen), rad(gen), rad(gen)});
        n_added += static_cast<std::size_t>(m);
      }
    }
    EnhanceResult r = enhance_with_map(net, added);
    const Network& grown = r.network;
    const std::size_t k = block_width(a);
    CHECK(count_params(grown) - count_params(net) ==
          bidnn_count(k, net.total_blocks() + n_added, h) - bidnn_count(k, net.total_blocks(), h));
    CHECK(grown.parameters().size() == count_params(grown));
    for (std::size_t l = 0; l + 1 < grown.layers.size(); ++l) CHECK(grown.layers[l].out == grown.total_blocks());

    std::vector<double> before = net.flat_parameters(), after = grown.flat_parameters();
    REQUIRE(r.index_map.size() == before.size());
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(after[r.index_map[i]] == before[i]);
    for (std::size_t i = 1; i < r.index_map.size(); ++i) CHECK(r.index_map[i] > r.index_map[i - 1]);

    for (int p = 0; p < 1000; ++p) {
      std::vector<double> x(d);
      for (double& v : x) v = pos(gen);
      CHECK(grown.forward(x) == net.forward(x));
    }
  }
}

TEST_CASE("structure strings rebuild the same architecture") {
  for (std::size_t b : {2, 5, 10, 16}) {
    for (std::size_t h : {0, 1, 2}) {
      Network net = build_bidnn(nodes_1d(b), Activation::tanh, h, 1);
      Network re = build_from_structure(net.structure(), NetworkKind::bidnn, 1, Activation::tanh, 1);
      CHECK(re.structure() == net.structure());
      CHECK(count_params(re) == count_params(net));
    }
  }
  Network two = build_bidnn({uniform_nodes(-1, 1, 12), uniform_nodes(-1, 1, 12)}, Activation::tanh, 2, 1);
  Network re2 = build_from_structure(two.structure(), NetworkKind::bidnn, 2, Activation::tanh, 1);
  CHECK(count_params(re2) == 1489);
  Network dnn = build_from_structure("1-21-21-21-21-21-1", NetworkKind::dnn, 2, Activation::tanh, 1);
  CHECK(count_params(dnn) == 1933);
  CHECK(parse_structure("1-20-20-10-1") == std::vector<std::size_t>{1, 20, 20, 10, 1});
  CHECK_THROWS_AS(parse_structure("1-x-1"), ParseError);
}

TEST_CASE("network input derivatives against finite differences") {
  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> pos(-0.9, 0.9);
  Network net = randomized(build_bidnn({uniform_nodes(-1, 1, 5), uniform_nodes(-1, 1, 5)}, Activation::tanh, 2, 9), gen);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> x{pos(gen), pos(gen)};
    auto j = input_jacobian(net, x);
    const double h = 1e-4;
    for (std::size_t k = 0; k < 2; ++k) {
      std::vector<double> xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      CHECK(std::fabs(j[k] - (net.forward(xp) - net.forward(xm)) / (2 * h)) <= 1e-5);
    }
    const double s = 1e-4;
    double fd = 0.0;
    for (std::size_t k = 0; k < 2; ++k) {
      std::vector<double> xp = x, xm = x;
      xp[k] += s;
      xm[k] -= s;
      fd += (net.forward(xp) - 2 * net.forward(x) + net.forward(xm)) / (s * s);
    }
    CHECK(std::fabs(input_laplacian(net, x) - fd) <= 1e-4);
  }
  Network relu = build_bidnn(nodes_1d(4), Activation::relu, 0, 1);
  CHECK_THROWS_AS(input_laplacian(relu, std::vector<double>{0.3}), ConfigurationError);
}

TEST_CASE("frozen flags and masks") {
  Network net = build_bidnn(nodes_1d(4), Activation::relu, 1, 1, true);
  CHECK(net.any_frozen());
  std::vector<bool> mask = net.trainable_mask();
  const std::size_t block_params = 4 * block_param_count(Activation::relu);
  for (std::size_t i = 0; i < mask.size(); ++i) CHECK(mask[i] == (i >= block_params));
  net.set_blocks_frozen(false);
  CHECK_FALSE(net.any_frozen());
  CHECK(net.block_offset(0, 2) == 2 * block_param_count(Activation::relu));
  CHECK(net.layer_offset(0) == block_params);
  CHECK(net.layer_offset(1) == block_params + 4 * 4 + 4);
}
