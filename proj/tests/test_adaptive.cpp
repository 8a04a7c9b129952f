#include <doctest.h>

#include <algorithm>
#include <functional>
#include <map>
#include <cmath>
#include <numeric>
#include <random>

#include "abidnn/adaptive.hpp"

using namespace abidnn;

namespace {

Network zero_net(Network net) {
  net.set_parameters(std::vector<double>(count_params(net), 0.0));
  return net;
}

// Union-find connected components of the closed eps-graph under L-infinity.
std::vector<std::vector<std::size_t>> components(const std::vector<double>& pts, std::size_t dim, double eps) {
  const std::size_t n = pts.size() / dim;
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t i) {
    return parent[i] == i ? i : parent[i] = find(parent[i]);
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double d = 0.0;
      for (std::size_t k = 0; k < dim; ++k) d = std::max(d, std::fabs(pts[i * dim + k] - pts[j * dim + k]));
      if (d <= eps) parent[find(i)] = find(j);
    }
  }
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[find(i)].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [root, members] : groups) out.push_back(members);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("indicator of a zero network on the fitting problem") {
  Problem p = fitting_singular();
  Network net = zero_net(build_bidnn({uniform_nodes(0, 1, 4)}, Activation::tanh, 0, 1));
  std::vector<double> pts{0.1, 0.2, 0.7};
  IndicatorField f = estimate(net, p, pts);
  REQUIRE(f.size() == 3);
  CHECK(f.eta[0] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(f.eta[1] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(f.eta[2] == 0.0);
  CHECK(f.points == pts);
}

TEST_CASE("indicator of a zero network on the one-peak problem is |f|") {
  Problem p = poisson_one_peak();
  Network net = zero_net(build_bidnn({uniform_nodes(-1, 1, 3), uniform_nodes(-1, 1, 3)}, Activation::tanh, 1, 1));
  std::vector<double> pts{0.0, 0.0, 0.01, -0.02, 0.5, 0.5};
  IndicatorField f = estimate(net, p, pts);
  CHECK(f.eta[0] == doctest::Approx(4000.0).epsilon(1e-14));
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(f.eta[i] == doctest::Approx(std::fabs(p.rhs(std::span<const double>(pts).subspan(2 * i, 2)))).epsilon(1e-14));
  }
}

TEST_CASE("indicator vanishes when the network is the solution") {
  std::mt19937_64 gen(1);
  Network net = build_bidnn({uniform_nodes(-1, 1, 3), uniform_nodes(-1, 1, 3)}, Activation::tanh, 1, 4);
  Problem p = poisson_one_peak();
  p.exact = [net](std::span<const double> x) { return net.forward(x); };
  p.rhs = [net](std::span<const double> x) { return -input_laplacian(net, x); };
  SampleSet s = sample(p, 300, 0, 2);
  IndicatorField f = estimate(net, p, s.interior);
  for (double e : f.eta) CHECK(e <= 1e-10);

  Problem fit = fitting_singular();
  Network one = build_bidnn({uniform_nodes(0, 1, 5)}, Activation::tanh, 1, 4);
  fit.rhs = [one](std::span<const double> x) { return one.forward(x); };
  for (double e : estimate(one, fit, sample(fit, 300, 0, 3).interior).eta) CHECK(e <= 1e-10);
}

TEST_CASE("total indicator") {
  CHECK(total_indicator(std::vector<double>{2.5, 2.5, 2.5}) == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(total_indicator(std::vector<double>{3.0, 4.0}) == doctest::Approx(std::sqrt(12.5)).epsilon(1e-15));
  CHECK(total_indicator(std::vector<double>{3.0, 4.0}) == doctest::Approx(3.53553).epsilon(1e-6));
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::vector<double> eta(1000);
  for (double& e : eta) e = u(gen);
  long double sum = 0.0L;
  for (double e : eta) sum += static_cast<long double>(e) * e;
  const double oracle = std::sqrt(static_cast<double>(sum / 1000.0L));
  CHECK(std::fabs(total_indicator(eta) - oracle) <= 1e-12 * oracle);
  CHECK_THROWS(total_indicator(std::vector<double>{}));
}

TEST_CASE("maximum marking") {
  CHECK(mark(std::vector<double>{1.0, 0.6, 0.4}, 0.5) == std::vector<std::size_t>{0, 1});
  CHECK(mark(std::vector<double>{0.3, 0.3, 0.3}, 0.5) == std::vector<std::size_t>{0, 1, 2});
  CHECK(mark(std::vector<double>{0.0, 0.0}, 0.5).empty());
  CHECK(mark(std::vector<double>{1.0, 0.5}, 0.5) == std::vector<std::size_t>{0});
  CHECK_THROWS_AS(mark(std::vector<double>{1.0}, 1.5), ConfigurationError);
  CHECK_THROWS_AS(mark(std::vector<double>{1.0}, 0.0), ConfigurationError);
}

TEST_CASE("marking equals the brute-force filter and always keeps the maximum") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 3.0), g(0.05, 0.95);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> eta(500);
    for (double& e : eta) e = u(gen);
    const double gamma = g(gen);
    const double mx = *std::max_element(eta.begin(), eta.end());
    std::vector<std::size_t> expect;
    for (std::size_t i = 0; i < eta.size(); ++i) {
      if (eta[i] > gamma * mx) expect.push_back(i);
    }
    auto got = mark(eta, gamma);
    CHECK(got == expect);
    const auto arg = static_cast<std::size_t>(std::max_element(eta.begin(), eta.end()) - eta.begin());
    CHECK(std::find(got.begin(), got.end(), arg) != got.end());
  }
}

TEST_CASE("dbscan examples") {
  auto c = dbscan(std::vector<double>{0.0, 0.05, 0.5}, 1, 0.1, 1);
  REQUIRE(c.size() == 2);
  CHECK(c[0].members == std::vector<std::size_t>{0, 1});
  CHECK(c[0].centroid[0] == doctest::Approx(0.025).epsilon(1e-15));
  CHECK(c[0].radius == doctest::Approx(0.025).epsilon(1e-15));
  CHECK(c[1].members == std::vector<std::size_t>{2});
  CHECK(c[1].radius == 0.0);

  auto single = dbscan(std::vector<double>{0.3}, 1, 0.1, 1);
  REQUIRE(single.size() == 1);
  CHECK(single[0].radius == 0.0);

  auto pair = dbscan(std::vector<double>{0.0, 0.0, 0.1, 0.1}, 2, 0.1, 1);
  CHECK(pair.size() == 1);

  CHECK(dbscan(std::vector<double>{}, 2, 0.1, 1).empty());
  CHECK_THROWS_AS(dbscan(std::vector<double>{0.0}, 1, 0.0, 1), ConfigurationError);
  CHECK_THROWS_AS(dbscan(std::vector<double>{0.0}, 1, 0.1, 0), ConfigurationError);
}

TEST_CASE("dbscan with min_pts 1 partitions into eps-graph components") {
  std::mt19937_64 gen(6);
  std::uniform_int_distribution<int> count(1, 200), dims(1, 2);
  std::uniform_real_distribution<double> u(-1.0, 1.0), eps(0.01, 0.3);
  for (int t = 0; t < 100; ++t) {
    const std::size_t dim = static_cast<std::size_t>(dims(gen));
    const std::size_t n = static_cast<std::size_t>(count(gen));
    std::vector<double> pts(n * dim);
    for (double& v : pts) v = std::round(u(gen) * 100.0) / 100.0;  // lattice values hit the eps boundary
    const double e = std::round(eps(gen) * 100.0) / 100.0;
    auto clusters = dbscan(pts, dim, e, 1);
    std::vector<std::vector<std::size_t>> got;
    std::vector<int> seen(n, 0);
    for (const auto& c : clusters) {
      got.push_back(c.members);
      for (std::size_t m : c.members) ++seen[m];
      CHECK(!c.members.empty());
      CHECK(c.radius >= 0.0);
      for (std::size_t k = 0; k < dim; ++k) {
        double lo = 1e9, hi = -1e9;
        for (std::size_t m : c.members) {
          lo = std::min(lo, pts[m * dim + k]);
          hi = std::max(hi, pts[m * dim + k]);
        }
        CHECK(c.centroid[k] >= lo);
        CHECK(c.centroid[k] <= hi);
      }
    }
    for (int s : seen) CHECK(s == 1);
    std::sort(got.begin(), got.end());
    CHECK(got == components(pts, dim, e));
    for (std::size_t i = 1; i < clusters.size(); ++i) CHECK(clusters[i - 1].centroid <= clusters[i].centroid);
  }
}

TEST_CASE("dbscan with larger min_pts leaves sparse points as noise") {
  auto c = dbscan(std::vector<double>{0.0, 0.01, 0.02, 0.5}, 1, 0.05, 3);
  REQUIRE(c.size() == 1);
  CHECK(c[0].members == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("clusters become node triples") {
  Cluster a{{0}, {0.2}, 0.05};
  auto n = clusters_to_nodes({a}, 1, 2.0, 0.05);
  REQUIRE(n.size() == 1);
  CHECK(n[0][0] == NodeTriple{0.2, 0.1, 0.1});
  Cluster s{{0}, {0.7}, 0.0};
  CHECK(clusters_to_nodes({s}, 1, 2.0, 0.05)[0][0] == NodeTriple{0.7, 0.05, 0.05});
  Cluster p{{0}, {0.1, 0.2}, 0.1}, q{{1}, {-0.3, 0.4}, 0.02};
  auto two = clusters_to_nodes({p, q}, 2, 2.0, 0.05);
  REQUIRE(two.size() == 2);
  CHECK(two[0].size() == 2);
  CHECK(two[1].size() == 2);
  CHECK(two[0][1] == NodeTriple{-0.3, 0.05, 0.05});
  CHECK(two[1][0] == NodeTriple{0.2, 0.2, 0.2});
  Network net = build_bidnn({uniform_nodes(-1, 1, 3), uniform_nodes(-1, 1, 3)}, Activation::tanh, 1, 1);
  CHECK(enhance(net, two).total_blocks() == net.total_blocks() + 4);
  CHECK_THROWS_AS(clusters_to_nodes({a}, 1, 0.0, 0.05), ConfigurationError);
}

TEST_CASE("indicator is unchanged by enhancement") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  Problem p = poisson_two_peaks();
  Network net = build_bidnn({uniform_nodes(-1, 1, 4), uniform_nodes(-1, 1, 4)}, Activation::tanh, 2, 3);
  std::vector<double> theta = net.flat_parameters();
  for (double& v : theta) v += u(gen);
  net.set_parameters(theta);
  SampleSet s = sample(p, 2000, 0, 8);
  IndicatorField before = estimate(net, p, s.interior);
  auto marked = mark(before.eta, 0.5);
  std::vector<double> pts;
  for (std::size_t m : marked) pts.insert(pts.end(), before.points.begin() + 2 * m, before.points.begin() + 2 * m + 2);
  auto clusters = dbscan(pts, 2, 0.1, 1);
  Network grown = enhance(net, clusters_to_nodes(clusters, 2, 2.0, 0.05));
  IndicatorField after = estimate(grown, p, s.interior);
  CHECK(after.eta == before.eta);
  CHECK(total_indicator(after) == total_indicator(before));
}

TEST_CASE("adaptive config validation") {
  AdaptiveConfig a;
  a.eta_tol = 1e-3;
  CHECK_NOTHROW(a.validate());
  CHECK(a.effective_min_radius() == 0.05);
  a.gamma = 1.5;
  CHECK_THROWS_AS(a.validate(), ConfigurationError);
  a = AdaptiveConfig{};
  CHECK_THROWS_AS(a.validate(), ConfigurationError);  // eta_tol unset
  a.eta_tol = 1e-3;
  a.max_iters = 0;
  CHECK_THROWS_AS(a.validate(), ConfigurationError);
}

TEST_CASE("adaptive loop with a huge tolerance trains once") {
  Problem p = fitting_singular();
  Network net = build_bidnn({uniform_nodes(0, 1, 10)}, Activation::tanh, 0, 1);
  TrainingConfig tc;
  tc.epochs = 20;
  AdaptiveConfig ac;
  ac.eta_tol = 1e30;
  AdaptiveResult r = run_abidnn(net, p, sample(p, 200, 0, 1), tc, ac);
  REQUIRE(r.rows.size() == 1);
  CHECK(r.traces.size() == 1);
  CHECK(r.rows[0].structure == "1-20-20-10-1");
  CHECK(r.rows[0].params == 121);
  CHECK(r.rows[0].model == "ABI-DNN(b=10)");
  CHECK(r.network.total_blocks() == 10);
  CHECK_FALSE(r.aborted);
}

TEST_CASE("adaptive loop respects the iteration cap and the tolerance") {
  Problem p = fitting_singular();
  Network net = build_bidnn({uniform_nodes(0, 1, 6)}, Activation::tanh, 0, 1);
  TrainingConfig tc;
  tc.epochs = 30;
  SampleSet s = sample(p, 300, 0, 2);
  for (std::size_t J : {1, 2, 3}) {
    AdaptiveConfig ac;
    ac.eta_tol = 1e-12;
    ac.max_iters = J;
    AdaptiveResult r = run_abidnn(net, p, s, tc, ac);
    CHECK(r.rows.size() <= J + 1);
    CHECK(r.rows.size() == r.traces.size());
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
      CHECK(r.rows[i].iteration == i);
      if (i > 0) {
        CHECK(r.rows[i - 1].eta > ac.eta_tol);
        CHECK(r.rows[i].params > r.rows[i - 1].params);
        CHECK(r.rows[i].cluster_count >= 1);
        CHECK(r.rows[i].marked_count >= r.rows[i].cluster_count);
      }
    }
    CHECK(r.network.structure() == r.rows.back().structure);
  }
  // A tolerance between the first and later indicators stops right after crossing it.
  AdaptiveConfig ac;
  ac.eta_tol = 1e-12;
  ac.max_iters = 3;
  AdaptiveResult full = run_abidnn(net, p, s, tc, ac);
  ac.eta_tol = full.rows[0].eta * (1 + 1e-12);
  AdaptiveResult stop = run_abidnn(net, p, s, tc, ac);
  CHECK(stop.rows.size() == 1);
}

TEST_CASE("adaptive loop is deterministic") {
  Problem p = fitting_singular();
  Network net = build_bidnn({uniform_nodes(0, 1, 6)}, Activation::tanh, 0, 1);
  TrainingConfig tc;
  tc.epochs = 25;
  AdaptiveConfig ac;
  ac.eta_tol = 1e-12;
  ac.max_iters = 2;
  SampleSet s = sample(p, 300, 0, 3);
  AdaptiveResult a = run_abidnn(net, p, s, tc, ac);
  AdaptiveResult b = run_abidnn(net, p, s, tc, ac);
  CHECK(a.rows == b.rows);
  CHECK(a.network == b.network);
  ac.continue_optimizer = true;
  AdaptiveResult c = run_abidnn(net, p, s, tc, ac);
  AdaptiveResult d = run_abidnn(net, p, s, tc, ac);
  CHECK(c.rows == d.rows);
  CHECK(c.rows[0] == a.rows[0]);
}

TEST_CASE("adaptive csv and labels") {
  IterationRecord r{0, "ABI-DNN(b=10)", "1-20-20-10-1", 121, 0.5, 0, 0, 0.25};
  CHECK(format_adaptive_csv({r}) ==
        "iteration,structure,params,eta,marked_count,cluster_count,test_error\n0,1-20-20-10-1,121,0.5,0,0,0.25\n");
  Network two = build_bidnn({uniform_nodes(-1, 1, 12), uniform_nodes(-1, 1, 12)}, Activation::tanh, 2, 1);
  CHECK(model_label(two, false) == "BI-DNN(b=[12,12])");
  CHECK(model_label(two, true) == "ABI-DNN(b=[12,12])");
  CHECK(model_label(build_bidnn({uniform_nodes(0, 1, 9)}, Activation::relu, 0, 1, true), false) == "frozen BI-DNN(b=9)");
  CHECK(model_label(build_dnn(1, {9, 9, 9}, Activation::tanh, 1), false) == "DNN(w=9)");
}
