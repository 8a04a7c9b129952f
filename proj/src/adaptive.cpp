#include "abidnn/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <sstream>

#include "abidnn/checkpoint.hpp"
#include "abidnn/engine.hpp"
#include "abidnn/metrics.hpp"

namespace abidnn {

IndicatorField estimate(const Network& net, const Problem& problem, std::span<const double> points) {
  check_compatible(net, problem);
  const std::size_t dim = problem.domain.dim;
  if (points.empty() || points.size() % dim != 0) throw DimensionMismatch("estimate: need a nonempty point list");
  IndicatorField field;
  field.dim = dim;
  field.points.assign(points.begin(), points.end());
  const std::size_t n = points.size() / dim;
  std::vector<double> targets(n);
  for (std::size_t i = 0; i < n; ++i) targets[i] = problem.rhs(points.subspan(i * dim, dim));
  field.eta.resize(n);
  Engine engine(net);
  std::vector<double> theta = net.flat_parameters();
  engine.residuals(theta, {problem.op, points, targets}, field.eta);
  for (double& e : field.eta) e = std::fabs(e);
  return field;
}

double total_indicator(std::span<const double> eta) {
  if (eta.empty()) throw ConfigurationError("total_indicator: empty field");
  double s = 0.0;
  for (double e : eta) s += e * e;
  return std::sqrt(s / static_cast<double>(eta.size()));
}

double total_indicator(const IndicatorField& field) { return total_indicator(field.eta); }

std::vector<std::size_t> mark(std::span<const double> eta, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigurationError("gamma must lie in (0,1)");
  double mx = 0.0;
  for (double e : eta) mx = std::max(mx, e);
  std::vector<std::size_t> marked;
  const double threshold = gamma * mx;
  for (std::size_t i = 0; i < eta.size(); ++i) {
    if (eta[i] > threshold) marked.push_back(i);
  }
  return marked;
}

namespace {

using CellKey = std::vector<long long>;

double linf(const double* a, const double* b, std::size_t dim) {
  double d = 0.0;
  for (std::size_t k = 0; k < dim; ++k) d = std::max(d, std::fabs(a[k] - b[k]));
  return d;
}

}  // namespace

std::vector<Cluster> dbscan(std::span<const double> points, std::size_t dim, double eps, std::size_t min_pts) {
  if (!(eps > 0.0)) throw ConfigurationError("dbscan: eps must be positive");
  if (min_pts < 1) throw ConfigurationError("dbscan: min_pts must be at least 1");
  if (dim == 0 || points.size() % dim != 0) throw DimensionMismatch("dbscan: point list does not match dimension");
  const std::size_t n = points.size() / dim;
  if (n == 0) return {};

  // Cells of side eps: neighbors lie in the 3^dim surrounding cells.
  std::map<CellKey, std::vector<std::size_t>> grid;
  std::vector<CellKey> keys(n, CellKey(dim));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < dim; ++k) keys[i][k] = static_cast<long long>(std::floor(points[i * dim + k] / eps));
    grid[keys[i]].push_back(i);
  }
  auto neighbors = [&](std::size_t i) {
    std::vector<std::size_t> out;
    std::size_t combos = 1;
    for (std::size_t k = 0; k < dim; ++k) combos *= 3;
    CellKey key(dim);
    for (std::size_t c = 0; c < combos; ++c) {
      std::size_t r = c;
      for (std::size_t k = 0; k < dim; ++k) {
        key[k] = keys[i][k] + static_cast<long long>(r % 3) - 1;
        r /= 3;
      }
      auto it = grid.find(key);
      if (it == grid.end()) continue;
      for (std::size_t j : it->second) {
        if (linf(&points[i * dim], &points[j * dim], dim) <= eps) out.push_back(j);
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  };

  constexpr std::size_t kUnvisited = static_cast<std::size_t>(-1);
  constexpr std::size_t kNoise = static_cast<std::size_t>(-2);
  std::vector<std::size_t> label(n, kUnvisited);
  std::size_t n_clusters = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] != kUnvisited) continue;
    std::vector<std::size_t> nb = neighbors(i);
    if (nb.size() < min_pts) {
      label[i] = kNoise;
      continue;
    }
    const std::size_t cid = n_clusters++;
    label[i] = cid;
    std::deque<std::size_t> queue(nb.begin(), nb.end());
    while (!queue.empty()) {
      const std::size_t j = queue.front();
      queue.pop_front();
      if (label[j] == kNoise) label[j] = cid;
      if (label[j] != kUnvisited) continue;
      label[j] = cid;
      std::vector<std::size_t> nj = neighbors(j);
      if (nj.size() >= min_pts) queue.insert(queue.end(), nj.begin(), nj.end());
    }
  }

  std::vector<Cluster> clusters(n_clusters);
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] < n_clusters) clusters[label[i]].members.push_back(i);
  }
  for (Cluster& c : clusters) {
    c.centroid.assign(dim, 0.0);
    for (std::size_t m : c.members) {
      for (std::size_t k = 0; k < dim; ++k) c.centroid[k] += points[m * dim + k];
    }
    for (double& v : c.centroid) v /= static_cast<double>(c.members.size());
    c.radius = 0.0;
    for (std::size_t m : c.members) c.radius = std::max(c.radius, linf(&points[m * dim], c.centroid.data(), dim));
  }
  std::stable_sort(clusters.begin(), clusters.end(),
                   [](const Cluster& a, const Cluster& b) { return a.centroid < b.centroid; });
  return clusters;
}

std::vector<std::vector<NodeTriple>> clusters_to_nodes(const std::vector<Cluster>& clusters, std::size_t dim,
                                                       double scale, double min_radius) {
  if (!(scale > 0.0)) throw ConfigurationError("block scale s must be positive");
  std::vector<std::vector<NodeTriple>> nodes(dim);
  for (const Cluster& c : clusters) {
    if (c.centroid.size() != dim) throw DimensionMismatch("cluster centroid dimension mismatch");
    const double r = std::max(scale * c.radius, min_radius);
    for (std::size_t k = 0; k < dim; ++k) nodes[k].push_back({c.centroid[k], r, r});
  }
  return nodes;
}

void AdaptiveConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigurationError("gamma must lie in (0,1)");
  if (!(dbscan_eps > 0.0)) throw ConfigurationError("eps must be positive");
  if (min_pts < 1) throw ConfigurationError("min_pts must be at least 1");
  if (!(scale > 0.0)) throw ConfigurationError("scale must be positive");
  if (max_iters < 1) throw ConfigurationError("max_iters must be at least 1");
  if (!(eta_tol > 0.0)) throw ConfigurationError("eta_tol must be positive");
  if (!(effective_min_radius() > 0.0)) throw ConfigurationError("min_radius must be positive");
}

std::string format_adaptive_csv(const std::vector<IterationRecord>& rows) {
  std::ostringstream os;
  os << "iteration,structure,params,eta,marked_count,cluster_count,test_error\n";
  for (const auto& r : rows) {
    os << r.iteration << ',' << r.structure << ',' << r.params << ',' << format_double(r.eta) << ',' << r.marked_count
       << ',' << r.cluster_count << ',' << format_double(r.test_error) << '\n';
  }
  return os.str();
}

std::string model_label(const Network& net, bool adaptive) {
  if (net.kind == NetworkKind::dnn) {
    const std::string w = net.layers.size() > 1 ? std::to_string(net.layers[0].out) : "0";
    return (net.input_dim == 1 ? "DNN(w=" : "PINN(w=") + w + ")";
  }
  std::string b;
  if (net.input_dim == 1) {
    b = std::to_string(net.total_blocks());
  } else {
    b = "[";
    for (std::size_t d = 0; d < net.stacks.size(); ++d) b += (d ? "," : "") + std::to_string(net.stacks[d].blocks.size());
    b += "]";
  }
  std::string name = adaptive ? "ABI-DNN" : "BI-DNN";
  if (!adaptive && net.any_frozen()) name = "frozen BI-DNN";
  return name + "(b=" + b + ")";
}

namespace {

std::vector<double> remap(const std::vector<double>& old, const std::vector<std::size_t>& index_map, std::size_t n) {
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < old.size() && i < index_map.size(); ++i) out[index_map[i]] = old[i];
  return out;
}

}  // namespace

AdaptiveResult run_abidnn(const Network& initial, const Problem& problem, const SampleSet& samples,
                          const TrainingConfig& tconfig, const AdaptiveConfig& aconfig) {
  aconfig.validate();
  tconfig.validate();
  check_compatible(initial, problem);
  if (initial.kind != NetworkKind::bidnn) throw ConfigurationError("adaptive runs need a BI-DNN");

  const TestGrid grid = problem.test_grid();
  const std::vector<double> u_star = exact_on_grid(problem.exact, grid);
  const std::size_t dim = problem.domain.dim;

  AdaptiveResult result;
  result.network = initial;
  TrainingState state;
  IndicatorField field;

  auto phase = [&](std::size_t iteration, std::size_t marked, std::size_t clusters) {
    TrainingState fresh;
    TrainResult tr = train(result.network, problem, samples, tconfig, aconfig.continue_optimizer ? &state : &fresh);
    result.network = std::move(tr.network);
    result.traces.push_back(std::move(tr.trace));
    field = estimate(result.network, problem, samples.interior);
    IterationRecord row;
    row.iteration = iteration;
    row.model = model_label(result.network, true);
    row.structure = result.network.structure();
    row.params = result.network.param_count();
    row.eta = total_indicator(field);
    row.marked_count = marked;
    row.cluster_count = clusters;
    row.test_error = relative_l2(evaluate_on_grid(result.network, grid), u_star);
    result.rows.push_back(row);
    return row.eta;
  };

  try {
    double eta = phase(0, 0, 0);
    for (std::size_t it = 1; it <= aconfig.max_iters && eta > aconfig.eta_tol; ++it) {
      const std::vector<std::size_t> marked = mark(field.eta, aconfig.gamma);
      std::vector<double> marked_points;
      marked_points.reserve(marked.size() * dim);
      for (std::size_t m : marked) {
        marked_points.insert(marked_points.end(), field.points.begin() + m * dim, field.points.begin() + (m + 1) * dim);
      }
      const std::vector<Cluster> clusters = dbscan(marked_points, dim, aconfig.dbscan_eps, aconfig.min_pts);
      if (clusters.empty()) break;
      EnhanceResult grown = enhance_with_map(
          result.network, clusters_to_nodes(clusters, dim, aconfig.scale, aconfig.effective_min_radius()));
      if (aconfig.continue_optimizer && !state.adam.m.empty()) {
        const std::size_t n = grown.network.param_count();
        state.adam.m = remap(state.adam.m, grown.index_map, n);
        state.adam.v = remap(state.adam.v, grown.index_map, n);
      }
      result.network = std::move(grown.network);
      eta = phase(it, marked.size(), clusters.size());
    }
  } catch (const TrainingAborted& e) {
    result.network = e.network;
    result.traces.push_back(e.trace);
    result.aborted = true;
    result.diagnostic = e.what();
  }
  return result;
}

}  // namespace abidnn
