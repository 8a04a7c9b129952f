#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "abidnn/training.hpp"

using namespace abidnn;

namespace {

Network small_net(std::uint64_t seed = 1) { return build_bidnn({uniform_nodes(0, 1, 6)}, Activation::tanh, 0, seed); }

}  // namespace

TEST_CASE("sampling the unit interval") {
  SampleSet s = sample(fitting_singular(), 2000, 0, 1);
  CHECK(s.interior_count() == 2000);
  CHECK(s.boundary_count() == 0);
  for (double x : s.interior) {
    CHECK(x > 0.0);
    CHECK(x < 1.0);
  }
}

TEST_CASE("square boundary gets 100 points per edge") {
  Problem p = poisson_one_peak();
  SampleSet s = sample(p, 500, 400, 2);
  REQUIRE(s.boundary_count() == 400);
  std::vector<int> per(4, 0);
  for (std::size_t i = 0; i < 400; ++i) {
    ++per[s.boundary_labels[i]];
    CHECK(p.domain.on_component(s.boundary_labels[i], s.boundary_point(i)));
    CHECK(p.domain.on_boundary(s.boundary_point(i)));
  }
  CHECK(per == std::vector<int>{100, 100, 100, 100});
  for (std::size_t i = 0; i < s.interior_count(); ++i) CHECK(p.domain.contains(s.interior_point(i)));
}

TEST_CASE("sector and space-time sampling respect their domains") {
  for (Problem p : {poisson_lshape(), burgers()}) {
    SampleSet s = sample(p, 3000, p.default_boundary, 3);
    for (std::size_t i = 0; i < s.interior_count(); ++i) CHECK(p.domain.contains(s.interior_point(i)));
    for (std::size_t i = 0; i < s.boundary_count(); ++i) {
      CHECK(p.domain.on_component(s.boundary_labels[i], s.boundary_point(i), 1e-12));
    }
  }
}

TEST_CASE("sampling is reproducible") {
  SampleSet a = sample(poisson_lshape(), 1000, 400, 9);
  SampleSet b = sample(poisson_lshape(), 1000, 400, 9);
  SampleSet c = sample(poisson_lshape(), 1000, 400, 10);
  CHECK(a.interior == b.interior);
  CHECK(a.boundary == b.boundary);
  CHECK(a.boundary_labels == b.boundary_labels);
  CHECK(a.interior != c.interior);
  CHECK_THROWS_AS(sample(fitting_singular(), 0, 0, 1), ConfigurationError);
}

TEST_CASE("fitting loss of a zero network is the mean of u*^2") {
  Network net = small_net();
  net.set_parameters(std::vector<double>(count_params(net), 0.0));
  Problem p = fitting_singular();
  SampleSet s = sample(p, 2000, 0, 4);
  double direct = 0.0;
  for (std::size_t i = 0; i < s.interior_count(); ++i) direct += std::pow(p.exact(s.interior_point(i)), 2);
  direct /= static_cast<double>(s.interior_count());
  LossTerms t = pinn_loss(net, p, s, 1000.0);
  CHECK(t.loss == doctest::Approx(direct).epsilon(1e-12));
  CHECK(t.boundary == 0.0);
}

TEST_CASE("an exactly representable target gives zero loss") {
  // A frozen relu network is a piecewise-linear interpolant; fit it to itself.
  Network net = build_bidnn({uniform_nodes(0, 1, 5)}, Activation::relu, 0, 1, true);
  net.layers[0].weights = {0.0, 0.5, 1.0, 0.25, 0.0};
  Problem p = fitting_singular();
  p.exact = [net](std::span<const double> x) { return net.forward(x); };
  p.rhs = p.exact;
  SampleSet s = sample(p, 500, 0, 5);
  CHECK(pinn_loss(net, p, s, 1000.0).loss <= 1e-20);
}

TEST_CASE("beta weights only the boundary term") {
  Problem p = poisson_one_peak();
  Network net = build_bidnn({uniform_nodes(-1, 1, 3), uniform_nodes(-1, 1, 3)}, Activation::tanh, 1, 2);
  SampleSet s = sample(p, 200, 40, 6);
  LossTerms zero = pinn_loss(net, p, s, 0.0);
  LossTerms full = pinn_loss(net, p, s, 1000.0);
  CHECK(zero.loss == zero.interior);
  CHECK(full.interior == zero.interior);
  CHECK(full.loss == doctest::Approx(full.interior + 1000.0 * full.boundary).epsilon(1e-15));
}

TEST_CASE("full loss gradient agrees with central differences") {
  Problem p = fitting_singular();
  std::mt19937_64 gen(31);
  for (int trial = 0; trial < 3; ++trial) {
    Network net = build_bidnn({uniform_nodes(0, 1, 4)}, Activation::tanh, 1, static_cast<std::uint64_t>(trial));
    SampleSet s = sample(p, 10, 0, static_cast<std::uint64_t>(trial));
    GradientVector g = reference_gradient(net, p, s, 0.0);
    std::vector<double> theta = net.flat_parameters();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double h = 1e-5;
      std::vector<double> tp = theta, tm = theta;
      tp[i] += h;
      tm[i] -= h;
      Network np = net, nm = net;
      np.set_parameters(tp);
      nm.set_parameters(tm);
      const double fd = (pinn_loss(np, p, s, 0.0).loss - pinn_loss(nm, p, s, 0.0).loss) / (2 * h);
      CHECK(std::fabs(g[i] - fd) <= 1e-5 * std::max(1.0, std::fabs(g[i])));
    }
  }
}

TEST_CASE("learning-rate staircase") {
  TrainingConfig c;
  CHECK(learning_rate(c, 0) == 5e-3);
  CHECK(learning_rate(c, 2499) == 5e-3);
  CHECK(learning_rate(c, 2500) == doctest::Approx(4.5e-3).epsilon(1e-15));
  CHECK(learning_rate(c, 5000) == doctest::Approx(4.05e-3).epsilon(1e-15));
}

TEST_CASE("adam step") {
  TrainingConfig c;
  AdamState st;
  std::vector<double> p{1.0, 2.0, 3.0};
  std::vector<double> zero(3, 0.0);
  std::vector<bool> mask{true, true, true};
  adam_step(p, zero, st, 0, c, mask);
  CHECK(p == std::vector<double>{1.0, 2.0, 3.0});

  // First step with bias correction moves every entry by lr * sign(g).
  AdamState st2;
  std::vector<double> q{1.0, 2.0, 3.0};
  std::vector<double> g{0.5, -2.0, 1e-3};
  adam_step(q, g, st2, 0, c, {true, false, true});
  CHECK(q[0] == doctest::Approx(1.0 - 5e-3).epsilon(1e-9));
  CHECK(q[1] == 2.0);
  CHECK(q[2] == doctest::Approx(3.0 - 5e-3).epsilon(1e-6));

  // Second step matches the textbook update.
  std::vector<double> g2{0.25, 0.0, -1e-3};
  const double m = 0.9 * (0.1 * 0.5) + 0.1 * 0.25;
  const double v = 0.999 * (0.001 * 0.25) + 0.001 * 0.0625;
  const double expected = q[0] - 5e-3 * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.999 * 0.999)) + 1e-8);
  adam_step(q, g2, st2, 1, c, {true, false, true});
  CHECK(q[0] == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("non-finite gradients name their parameter group") {
  Network net = small_net();
  ParameterStore store = net.parameters();
  GradientVector g(store.size(), 0.0);
  g[store.size() - 1] = std::numeric_limits<double>::quiet_NaN();
  AdamState st;
  try {
    adam_step(store, g, st, 0, TrainingConfig{});
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("layer0.bias") != std::string::npos);
  }
}

TEST_CASE("zero epochs return the network unchanged") {
  Network net = small_net();
  TrainingConfig c;
  c.epochs = 0;
  TrainResult r = train(net, fitting_singular(), sample(fitting_singular(), 100, 0, 1), c);
  CHECK(r.network == net);
  REQUIRE(r.trace.records.size() == 1);
  CHECK(r.trace.records[0].epoch == 0);
}

TEST_CASE("training descends on a simple target") {
  Problem p = fitting_singular();
  p.exact = [](std::span<const double> x) { return x[0]; };
  p.rhs = p.exact;
  Network net = build_bidnn({uniform_nodes(0, 1, 2)}, Activation::tanh, 0, 3);
  TrainingConfig c;
  c.epochs = 200;
  TrainResult r = train(net, p, sample(p, 200, 0, 3), c);
  CHECK(r.trace.records.back().loss <= r.trace.records.front().loss);
  CHECK(r.final_loss.loss < 0.5 * r.trace.records.front().loss);
}

TEST_CASE("trace records follow the schedule and the loss decomposition") {
  Problem p = poisson_two_peaks();
  Network net = build_bidnn({uniform_nodes(-1, 1, 3), uniform_nodes(-1, 1, 3)}, Activation::tanh, 1, 4);
  TrainingConfig c;
  c.epochs = 30;
  c.decay_every = 7;
  TrainResult r = train(net, p, sample(p, 200, 40, 4), c);
  REQUIRE(r.trace.records.size() == 31);
  for (std::size_t i = 0; i < r.trace.records.size(); ++i) {
    const TraceRecord& rec = r.trace.records[i];
    CHECK(rec.epoch == i);
    CHECK(rec.lr == c.lr0 * std::pow(c.decay_base, static_cast<double>(rec.epoch / c.decay_every)));
    CHECK(rec.loss == doctest::Approx(rec.interior_term + c.beta * rec.boundary_term).epsilon(1e-12));
  }
  c.trace_every = 10;
  TrainResult sparse = train(net, p, sample(p, 200, 40, 4), c);
  REQUIRE(sparse.trace.records.size() == 4);
  CHECK(sparse.trace.records.back().epoch == 30);
  CHECK(sparse.trace.records.back().loss == r.trace.records.back().loss);
}

TEST_CASE("training is deterministic") {
  Problem p = burgers();
  Network net = build_bidnn({uniform_nodes(-1, 1, 3), uniform_nodes(0, 1, 3)}, Activation::tanh, 1, 5);
  TrainingConfig c;
  c.epochs = 15;
  SampleSet s = sample(p, 300, 50, 5);
  TrainResult a = train(net, p, s, c);
  TrainResult b = train(net, p, s, c);
  CHECK(a.network == b.network);
  REQUIRE(a.trace.records.size() == b.trace.records.size());
  for (std::size_t i = 0; i < a.trace.records.size(); ++i) {
    TraceRecord x = a.trace.records[i], y = b.trace.records[i];
    x.wall_ms = y.wall_ms = 0.0;
    CHECK(x == y);
  }
}

TEST_CASE("frozen blocks are untouched by training") {
  Network net = build_bidnn({uniform_nodes(0, 1, 9)}, Activation::relu, 0, 1, true);
  TrainingConfig c;
  c.epochs = 50;
  TrainResult r = train(net, fitting_singular(), sample(fitting_singular(), 300, 0, 6), c);
  for (std::size_t j = 0; j < 9; ++j) CHECK(r.network.stacks[0].blocks[j] == net.stacks[0].blocks[j]);
  CHECK_FALSE(r.network.layers[0] == net.layers[0]);
}

TEST_CASE("non-finite loss aborts with the last finite network") {
  Problem p = fitting_singular();
  p.rhs = [](std::span<const double> x) { return x[0] > 0.5 ? std::numeric_limits<double>::infinity() : 0.0; };
  Network net = small_net();
  TrainingConfig c;
  c.epochs = 5;
  try {
    train(net, p, sample(p, 100, 0, 7), c);
    FAIL("expected TrainingAborted");
  } catch (const TrainingAborted& e) {
    CHECK(e.network == net);
    CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
  }
}

TEST_CASE("relu networks are rejected for second-order problems") {
  Network net = build_bidnn({uniform_nodes(-1, 1, 3), uniform_nodes(-1, 1, 3)}, Activation::relu, 0, 1);
  Problem p = poisson_one_peak();
  CHECK_THROWS_AS(pinn_loss(net, p, sample(p, 10, 4, 1), 1.0), ConfigurationError);
  CHECK_THROWS_AS(pinn_loss(small_net(), p, sample(p, 10, 4, 1), 1.0), DimensionMismatch);
}

TEST_CASE("training config validation") {
  TrainingConfig c;
  c.lr0 = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigurationError);
  c = TrainingConfig{};
  c.decay_base = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigurationError);
  c = TrainingConfig{};
  c.decay_every = 0;
  CHECK_THROWS_AS(c.validate(), ConfigurationError);
  CHECK_NOTHROW(TrainingConfig{}.validate());
}

TEST_CASE("trace csv columns") {
  TrainingTrace t;
  t.records.push_back({0, 1.5, 1.0, 0.0005, 0.005, 1.25});
  CHECK(format_trace_csv(t) == "epoch,loss,interior_term,boundary_term,lr,wall_ms\n0,1.5,1,5e-04,0.005,1.25\n");
}
