#include <doctest.h>

#include <cmath>
#include <random>

#include "abidnn/engine.hpp"
#include "abidnn/training.hpp"

using namespace abidnn;

namespace {

Network randomized(Network net, std::uint64_t seed, double spread = 0.3) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-spread, spread);
  std::vector<double> theta = net.flat_parameters();
  for (double& v : theta) v += u(gen);
  net.set_parameters(theta);
  return net;
}

std::vector<const KernelTable*> tables() {
  std::vector<const KernelTable*> t{&scalar_kernels()};
  if (avx2_kernels()) t.push_back(avx2_kernels());
  return t;
}

double max_rel(const std::vector<double>& a, const std::vector<double>& b) {
  double scale = 0.0, worst = 0.0;
  for (double v : b) scale = std::max(scale, std::fabs(v));
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::fabs(a[i] - b[i]));
  return worst / std::max(scale, 1e-300);
}

struct Case {
  Problem problem;
  Network net;
  std::size_t nr, nb;
};

std::vector<Case> cases() {
  std::vector<Case> out;
  out.push_back({fitting_singular(), randomized(build_bidnn({uniform_nodes(0, 1, 6)}, Activation::tanh, 1, 1), 1), 300, 0});
  out.push_back({fitting_highfreq(), randomized(build_bidnn({uniform_nodes(0, 1, 5)}, Activation::relu, 1, 2), 2), 257, 0});
  out.push_back({fitting_singular(), randomized(build_dnn(1, {6, 5}, Activation::tanh, 3), 3), 200, 0});
  out.push_back({poisson_one_peak(),
                 randomized(build_bidnn({uniform_nodes(-1, 1, 3), uniform_nodes(-1, 1, 4)}, Activation::tanh, 2, 4), 4),
                 150, 40});
  out.push_back({poisson_lshape(), randomized(build_dnn(2, {7, 6}, Activation::tanh, 5), 5), 130, 33});
  out.push_back({burgers(),
                 randomized(build_bidnn({uniform_nodes(-1, 1, 3), uniform_nodes(0, 1, 3)}, Activation::tanh, 1, 6), 6),
                 140, 25});
  return out;
}

}  // namespace

TEST_CASE("engine gradient equals the reverse-mode reference") {
  for (const Case& c : cases()) {
    CAPTURE(c.problem.name);
    SampleSet s = sample(c.problem, c.nr, c.nb, 11);
    const double beta = 1000.0;
    const double ref_loss = value_of(pinn_loss_generic<double>(c.net, std::span<const double>(c.net.flat_parameters()),
                                                               c.problem, s, beta));
    GradientVector ref = reference_gradient(c.net, c.problem, s, beta);
    for (const KernelTable* kt : tables()) {
      CAPTURE(kt->name);
      Engine engine(c.net, *kt, 64);
      PreparedSamples prepared = prepare(c.problem, s);
      std::vector<double> theta = c.net.flat_parameters();
      std::vector<double> grad(theta.size());
      LossTerms t = pinn_loss_and_grad(engine, theta, prepared, c.problem.is_fitting() ? 0.0 : beta, grad);
      CHECK(t.loss == doctest::Approx(ref_loss).epsilon(1e-12));
      CHECK(max_rel(grad, ref) <= 1e-11);
    }
  }
}

TEST_CASE("engine residuals and predictions match the scalar network") {
  for (const Case& c : cases()) {
    CAPTURE(c.problem.name);
    SampleSet s = sample(c.problem, c.nr, c.nb, 12);
    PreparedSamples prepared = prepare(c.problem, s);
    std::vector<double> theta = c.net.flat_parameters();
    for (const KernelTable* kt : tables()) {
      Engine engine(c.net, *kt, 32);
      std::vector<double> u(s.interior_count());
      engine.predict(theta, s.interior, u);
      for (std::size_t i = 0; i < u.size(); ++i) {
        CHECK(u[i] == doctest::Approx(c.net.forward(s.interior_point(i))).epsilon(1e-13).scale(1.0));
      }
      std::vector<double> r(s.interior_count());
      engine.residuals(theta, prepared.interior_batch(), r);
      for (std::size_t i = 0; i < r.size(); ++i) {
        auto pt = s.interior_point(i);
        double lu = 0.0;
        if (c.problem.op == OperatorKind::identity) {
          lu = c.net.forward(pt);
        } else if (c.problem.op == OperatorKind::neg_laplacian) {
          lu = -input_laplacian(c.net, pt);
        } else {
          auto g = input_jacobian(c.net, pt);
          const double h = 1e-4;
          std::vector<double> xp(pt.begin(), pt.end()), xm = xp;
          xp[0] += h;
          xm[0] -= h;
          const double uxx = (c.net.forward(xp) - 2 * c.net.forward(pt) + c.net.forward(xm)) / (h * h);
          lu = g[1] + c.net.forward(pt) * g[0] - kBurgersViscosity * uxx;
          CHECK(r[i] == doctest::Approx(lu - c.problem.rhs(pt)).epsilon(1e-5).scale(1.0));
          continue;
        }
        CHECK(r[i] == doctest::Approx(lu - c.problem.rhs(pt)).epsilon(1e-11).scale(1.0));
      }
    }
  }
}

TEST_CASE("results do not depend on the chunk size beyond rounding") {
  Case c = cases()[3];
  SampleSet s = sample(c.problem, c.nr, c.nb, 13);
  PreparedSamples prepared = prepare(c.problem, s);
  std::vector<double> theta = c.net.flat_parameters();
  std::vector<double> g1(theta.size()), g2(theta.size());
  Engine e1(c.net, scalar_kernels(), 7), e2(c.net, scalar_kernels(), 128);
  LossTerms t1 = pinn_loss_and_grad(e1, theta, prepared, 1000.0, g1);
  LossTerms t2 = pinn_loss_and_grad(e2, theta, prepared, 1000.0, g2);
  CHECK(t1.loss == doctest::Approx(t2.loss).epsilon(1e-13));
  CHECK(max_rel(g1, g2) <= 1e-13);
}

TEST_CASE("engine evaluation is deterministic") {
  Case c = cases()[5];
  SampleSet s = sample(c.problem, c.nr, c.nb, 14);
  PreparedSamples prepared = prepare(c.problem, s);
  std::vector<double> theta = c.net.flat_parameters();
  std::vector<double> g1(theta.size()), g2(theta.size());
  Engine e(c.net);
  LossTerms t1 = pinn_loss_and_grad(e, theta, prepared, 1000.0, g1);
  LossTerms t2 = pinn_loss_and_grad(e, theta, prepared, 1000.0, g2);
  CHECK(t1 == t2);
  CHECK(g1 == g2);
}

TEST_CASE("frozen blocks receive no gradient updates through the mask") {
  Network net = build_bidnn({uniform_nodes(0, 1, 5)}, Activation::relu, 0, 1, true);
  Engine e(net);
  CHECK(e.param_count() == count_params(net));
}

TEST_CASE("engine rejects relu under second-order operators") {
  Network net = build_bidnn({uniform_nodes(-1, 1, 3), uniform_nodes(-1, 1, 3)}, Activation::relu, 0, 1);
  Engine e(net);
  std::vector<double> pts{0.1, 0.2}, tg{0.0}, out(1);
  std::vector<double> theta = net.flat_parameters();
  CHECK_THROWS_AS(e.residuals(theta, {OperatorKind::neg_laplacian, pts, tg}, out), ConfigurationError);
  CHECK_NOTHROW(e.residuals(theta, {OperatorKind::identity, pts, tg}, out));
}

TEST_CASE("enhanced networks predict identically in the engine") {
  for (const KernelTable* kt : tables()) {
    Network net = randomized(build_bidnn({uniform_nodes(-1, 1, 4), uniform_nodes(-1, 1, 4)}, Activation::tanh, 2, 7), 7);
    Network grown = enhance(net, {{{0.1, 0.2, 0.2}, {-0.5, 0.1, 0.1}}, {{0.3, 0.2, 0.2}, {0.0, 0.05, 0.05}}});
    SampleSet s = sample(poisson_one_peak(), 1000, 0, 15);
    std::vector<double> a(1000), b(1000);
    Engine(net, *kt).predict(net.flat_parameters(), s.interior, a);
    Engine(grown, *kt).predict(grown.flat_parameters(), s.interior, b);
    CHECK(a == b);
    std::vector<double> ta(1000), ra(1000), rb(1000);
    PreparedSamples pa = prepare(poisson_one_peak(), s);
    Engine(net, *kt).residuals(net.flat_parameters(), pa.interior_batch(), ra);
    Engine(grown, *kt).residuals(grown.flat_parameters(), pa.interior_batch(), rb);
    CHECK(ra == rb);
  }
}
