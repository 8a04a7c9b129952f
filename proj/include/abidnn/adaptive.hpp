#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "abidnn/network.hpp"
#include "abidnn/problems.hpp"
#include "abidnn/training.hpp"

namespace abidnn {

struct IndicatorField {
  std::size_t dim = 1;
  std::vector<double> points;  // count * dim
  std::vector<double> eta;

  std::size_t size() const { return eta.size(); }
};

/// eta_p = |L u(x_p) - f(x_p)| at every point.
IndicatorField estimate(const Network& net, const Problem& problem, std::span<const double> points);

/// Root mean square of eta_p.
double total_indicator(std::span<const double> eta);
double total_indicator(const IndicatorField& field);

/// Indices with eta_p > gamma * max eta, ascending.
std::vector<std::size_t> mark(std::span<const double> eta, double gamma);

struct Cluster {
  std::vector<std::size_t> members;  // ascending indices into the input points
  std::vector<double> centroid;
  double radius = 0.0;  // max L-infinity distance from the centroid to a member
};

/// DBSCAN under the L-infinity metric. Neighborhoods are closed (distance <= eps)
/// and include the point itself. Clusters come out sorted by centroid.
std::vector<Cluster> dbscan(std::span<const double> points, std::size_t dim, double eps, std::size_t min_pts);

/// One node (c_i, r_s, r_s) per cluster and dimension, r_s = max(s r, min_radius).
std::vector<std::vector<NodeTriple>> clusters_to_nodes(const std::vector<Cluster>& clusters, std::size_t dim,
                                                       double scale, double min_radius);

struct AdaptiveConfig {
  double gamma = 0.5;
  double dbscan_eps = 0.1;
  std::size_t min_pts = 1;
  double scale = 2.0;
  std::size_t max_iters = 10;
  double eta_tol = 0.0;
  /// Negative means dbscan_eps / 2.
  double min_radius = -1.0;
  /// Keep Adam moments and the schedule step across enhancements.
  bool continue_optimizer = false;

  double effective_min_radius() const { return min_radius < 0.0 ? 0.5 * dbscan_eps : min_radius; }
  void validate() const;
};

struct IterationRecord {
  std::size_t iteration = 0;
  std::string model;
  std::string structure;
  std::size_t params = 0;
  double eta = 0.0;
  std::size_t marked_count = 0;
  std::size_t cluster_count = 0;
  double test_error = 0.0;

  bool operator==(const IterationRecord&) const = default;
};

std::string format_adaptive_csv(const std::vector<IterationRecord>& rows);

struct AdaptiveResult {
  Network network;
  std::vector<IterationRecord> rows;
  std::vector<TrainingTrace> traces;
  bool aborted = false;
  std::string diagnostic;
};

/// Label such as "ABI-DNN(b=10)" or "BI-DNN(b=[12,12])".
std::string model_label(const Network& net, bool adaptive);

/// Train, estimate, then mark, cluster, enhance and retrain while
/// eta > eta_tol and fewer than max_iters enhancements have been made. The
/// indicator is evaluated on the interior training points.
AdaptiveResult run_abidnn(const Network& initial, const Problem& problem, const SampleSet& samples,
                          const TrainingConfig& tconfig, const AdaptiveConfig& aconfig);

}  // namespace abidnn
