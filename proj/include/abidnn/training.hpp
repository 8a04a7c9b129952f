#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "abidnn/autodiff.hpp"
#include "abidnn/engine.hpp"
#include "abidnn/network.hpp"
#include "abidnn/problems.hpp"

namespace abidnn {

struct SampleSet {
  std::size_t dim = 1;
  std::vector<double> interior;  // N_r * dim
  std::vector<double> boundary;  // N_b * dim
  std::vector<std::size_t> boundary_labels;
  std::uint64_t seed = 0;

  std::size_t interior_count() const { return interior.size() / dim; }
  std::size_t boundary_count() const { return boundary.size() / dim; }
  std::span<const double> interior_point(std::size_t i) const { return {interior.data() + i * dim, dim}; }
  std::span<const double> boundary_point(std::size_t i) const { return {boundary.data() + i * dim, dim}; }
};

/// Interior points i.i.d. uniform in the open domain; boundary points split over
/// the components in proportion to their weights, uniform along each.
SampleSet sample(const Domain& domain, std::size_t n_interior, std::size_t n_boundary, std::uint64_t seed);
SampleSet sample(const Problem& problem, std::size_t n_interior, std::size_t n_boundary, std::uint64_t seed);

struct TrainingConfig {
  double beta = 1000.0;
  double lr0 = 5e-3;
  double decay_base = 0.9;
  std::size_t decay_every = 2500;
  std::size_t epochs = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  /// Record every n-th epoch in the trace (the first and last are always kept).
  std::size_t trace_every = 1;

  void validate() const;
};

/// lr0 * decay_base^floor(step / decay_every).
double learning_rate(const TrainingConfig& config, std::size_t step);

struct TraceRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double interior_term = 0.0;
  double boundary_term = 0.0;
  double lr = 0.0;
  double wall_ms = 0.0;

  bool operator==(const TraceRecord&) const = default;
};

struct TrainingTrace {
  std::vector<TraceRecord> records;

  bool operator==(const TrainingTrace&) const = default;
};

std::string format_trace_csv(const TrainingTrace& trace);
void write_trace_csv(const TrainingTrace& trace, const std::filesystem::path& path);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t updates = 0;
};

/// One Adam update with bias correction. Entries with mask false are left
/// untouched. Throws NumericError naming the parameter group of the first
/// non-finite gradient entry.
void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state, std::size_t step,
               const TrainingConfig& config, const std::vector<bool>& mask, const ParameterStore* groups = nullptr);
void adam_step(ParameterStore& params, const GradientVector& grad, AdamState& state, std::size_t step,
               const TrainingConfig& config);

struct LossTerms {
  double loss = 0.0;
  double interior = 0.0;
  double boundary = 0.0;

  bool operator==(const LossTerms&) const = default;
};

/// Residual targets for a sample set: f at interior points, g at boundary points.
struct PreparedSamples {
  const SampleSet* samples = nullptr;
  OperatorKind op = OperatorKind::identity;
  std::vector<double> interior_targets;
  std::vector<double> boundary_targets;

  ResidualBatch interior_batch() const;
  ResidualBatch boundary_batch() const;
};

PreparedSamples prepare(const Problem& problem, const SampleSet& samples);

/// Throws ConfigurationError when the network cannot represent the operator
/// (dimension mismatch, ReLU under a second-order operator).
void check_compatible(const Network& net, const Problem& problem);

/// Interior term + beta * boundary term, evaluated with the batched engine.
/// The boundary term is dropped for fitting problems.
LossTerms pinn_loss(const Network& net, const Problem& problem, const SampleSet& samples, double beta);

/// Loss and its parameter gradient with the batched engine.
LossTerms pinn_loss_and_grad(Engine& engine, std::span<const double> theta, const PreparedSamples& prepared,
                             double beta, std::span<double> grad);

/// Same loss composed from differentiable scalars; the reference for the engine.
template <class P>
P pinn_loss_generic(const Network& net, std::span<const P> theta, const Problem& problem, const SampleSet& samples,
                    double beta);

/// Gradient of the reference loss via reverse mode.
GradientVector reference_gradient(const Network& net, const Problem& problem, const SampleSet& samples, double beta);

/// Optimizer state carried across calls (e.g. adaptive phases).
struct TrainingState {
  AdamState adam;
  std::size_t step = 0;
};

class TrainingAborted : public NumericError {
 public:
  TrainingAborted(const std::string& what, Network last_finite, TrainingTrace partial)
      : NumericError(what), network(std::move(last_finite)), trace(std::move(partial)) {}
  Network network;
  TrainingTrace trace;
};

struct TrainResult {
  Network network;
  TrainingTrace trace;
  LossTerms final_loss;
};

/// Full-batch Adam for config.epochs epochs. With `state` the optimizer moments
/// and schedule step continue from it and are written back; without it a fresh
/// optimizer starts at step 0.
TrainResult train(const Network& net, const Problem& problem, const SampleSet& samples, const TrainingConfig& config,
                  TrainingState* state = nullptr);

// ---------------------------------------------------------------------------

template <class P>
P pinn_loss_generic(const Network& net, std::span<const P> theta, const Problem& problem, const SampleSet& samples,
                    double beta) {
  using S = Jet<P, kMaxInputDims>;
  const std::size_t dim = samples.dim;
  const std::size_t nr = samples.interior_count();
  P interior(0.0);
  std::vector<S> x(dim);
  for (std::size_t i = 0; i < nr; ++i) {
    auto pt = samples.interior_point(i);
    for (std::size_t k = 0; k < dim; ++k) {
      x[k] = problem.op == OperatorKind::identity ? S(P(pt[k])) : S::variable(P(pt[k]), static_cast<int>(k));
    }
    S u = net.forward_generic<S, P>(theta, x);
    const double f = problem.rhs(pt);
    P r(0.0);
    switch (problem.op) {
      case OperatorKind::identity:
        r = u.v - P(f);
        break;
      case OperatorKind::neg_laplacian: {
        P lap(0.0);
        for (std::size_t k = 0; k < dim; ++k) lap = lap + u.dd[k];
        r = -lap - P(f);
        break;
      }
      case OperatorKind::burgers:
        r = u.d[1] + u.v * u.d[0] - P(kBurgersViscosity) * u.dd[0] - P(f);
        break;
    }
    interior = interior + r * r;
  }
  P loss = nr ? interior / P(static_cast<double>(nr)) : P(0.0);
  const std::size_t nb = samples.boundary_count();
  if (problem.op != OperatorKind::identity && nb > 0) {
    P bsum(0.0);
    for (std::size_t i = 0; i < nb; ++i) {
      auto pt = samples.boundary_point(i);
      for (std::size_t k = 0; k < dim; ++k) x[k] = S(P(pt[k]));
      S u = net.forward_generic<S, P>(theta, x);
      P r = u.v - P(problem.boundary(pt));
      bsum = bsum + r * r;
    }
    loss = loss + P(beta) * (bsum / P(static_cast<double>(nb)));
  }
  return loss;
}

}  // namespace abidnn
