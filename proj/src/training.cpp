#include "abidnn/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "abidnn/checkpoint.hpp"

namespace abidnn {

SampleSet sample(const Domain& domain, std::size_t n_interior, std::size_t n_boundary, std::uint64_t seed) {
  if (n_interior < 1) throw ConfigurationError("sample: need at least one interior point");
  if (!(domain.measure() > 0.0)) throw ConfigurationError("sample: domain has zero measure");
  if (n_boundary > 0 && domain.boundary.empty()) {
    throw ConfigurationError("sample: domain has no boundary components to sample");
  }
  SampleSet s;
  s.dim = domain.dim;
  s.seed = seed;
  Rng rng(seed);
  s.interior.reserve(n_interior * domain.dim);
  for (std::size_t i = 0; i < n_interior; ++i) {
    std::vector<double> p = domain.sample_interior(rng);
    s.interior.insert(s.interior.end(), p.begin(), p.end());
  }
  std::vector<double> weights;
  for (const auto& c : domain.boundary) weights.push_back(c.weight);
  std::vector<std::size_t> counts = split_counts(n_boundary, weights);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    for (std::size_t i = 0; i < counts[c]; ++i) {
      std::vector<double> p = domain.sample_component(c, rng);
      s.boundary.insert(s.boundary.end(), p.begin(), p.end());
      s.boundary_labels.push_back(c);
    }
  }
  return s;
}

SampleSet sample(const Problem& problem, std::size_t n_interior, std::size_t n_boundary, std::uint64_t seed) {
  return sample(problem.domain, n_interior, problem.is_fitting() ? 0 : n_boundary, seed);
}

void TrainingConfig::validate() const {
  if (!(lr0 > 0.0)) throw ConfigurationError("lr0 must be positive");
  if (!(decay_base > 0.0 && decay_base <= 1.0)) throw ConfigurationError("decay_base must lie in (0,1]");
  if (decay_every < 1) throw ConfigurationError("decay_every must be at least 1");
  if (!(beta >= 0.0)) throw ConfigurationError("beta must be nonnegative");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigurationError("Adam betas must lie in [0,1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigurationError("Adam epsilon must be positive");
  if (trace_every < 1) throw ConfigurationError("trace_every must be at least 1");
}

double learning_rate(const TrainingConfig& config, std::size_t step) {
  return config.lr0 * std::pow(config.decay_base, static_cast<double>(step / config.decay_every));
}

std::string format_trace_csv(const TrainingTrace& trace) {
  std::ostringstream os;
  os << "epoch,loss,interior_term,boundary_term,lr,wall_ms\n";
  for (const auto& r : trace.records) {
    os << r.epoch << ',' << format_double(r.loss) << ',' << format_double(r.interior_term) << ','
       << format_double(r.boundary_term) << ',' << format_double(r.lr) << ',' << format_double(r.wall_ms) << '\n';
  }
  return os.str();
}

void write_trace_csv(const TrainingTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << format_trace_csv(trace);
}

void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state, std::size_t step,
               const TrainingConfig& config, const std::vector<bool>& mask, const ParameterStore* groups) {
  const std::size_t n = params.size();
  if (grad.size() != n || mask.size() != n) throw DimensionMismatch("adam_step: gradient or mask length mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (mask[i] && !std::isfinite(grad[i])) {
      std::string where = groups ? groups->group_of(i).name : "index " + std::to_string(i);
      throw NumericError("non-finite gradient in parameter group " + where + " at step " + std::to_string(step));
    }
  }
  if (state.m.size() != n) {
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
    state.updates = 0;
  }
  ++state.updates;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double t = static_cast<double>(state.updates);
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  const double lr = learning_rate(config, step);
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const double g = grad[i];
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + config.adam_eps);
  }
}

void adam_step(ParameterStore& params, const GradientVector& grad, AdamState& state, std::size_t step,
               const TrainingConfig& config) {
  adam_step(params.values(), grad, state, step, config, params.trainable_mask(), &params);
}

ResidualBatch PreparedSamples::interior_batch() const {
  return {op, samples->interior, interior_targets};
}

ResidualBatch PreparedSamples::boundary_batch() const {
  return {OperatorKind::identity, samples->boundary, boundary_targets};
}

PreparedSamples prepare(const Problem& problem, const SampleSet& samples) {
  if (samples.dim != problem.domain.dim) throw DimensionMismatch("sample set dimension does not match the problem");
  PreparedSamples p;
  p.samples = &samples;
  p.op = problem.op;
  p.interior_targets.resize(samples.interior_count());
  for (std::size_t i = 0; i < p.interior_targets.size(); ++i) p.interior_targets[i] = problem.rhs(samples.interior_point(i));
  if (!problem.is_fitting()) {
    p.boundary_targets.resize(samples.boundary_count());
    for (std::size_t i = 0; i < p.boundary_targets.size(); ++i) {
      p.boundary_targets[i] = problem.boundary(samples.boundary_point(i));
    }
  }
  return p;
}

void check_compatible(const Network& net, const Problem& problem) {
  if (net.input_dim != problem.domain.dim) {
    throw DimensionMismatch("network takes " + std::to_string(net.input_dim) + " inputs, problem " + problem.name +
                            " is " + std::to_string(problem.domain.dim) + "-dimensional");
  }
  if (net.activation == Activation::relu && problem.needs_second_derivatives()) {
    throw ConfigurationError("problem " + problem.name + " needs second derivatives, which vanish for ReLU networks");
  }
}

LossTerms pinn_loss_and_grad(Engine& engine, std::span<const double> theta, const PreparedSamples& prepared,
                             double beta, std::span<double> grad) {
  LossTerms t;
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  t.interior = engine.mean_square(theta, prepared.interior_batch(), grad, 1.0);
  if (!prepared.boundary_targets.empty()) {
    t.boundary = engine.mean_square(theta, prepared.boundary_batch(), grad, beta);
  }
  t.loss = t.interior + beta * t.boundary;
  return t;
}

LossTerms pinn_loss(const Network& net, const Problem& problem, const SampleSet& samples, double beta) {
  check_compatible(net, problem);
  Engine engine(net);
  PreparedSamples prepared = prepare(problem, samples);
  std::vector<double> theta = net.flat_parameters();
  return pinn_loss_and_grad(engine, theta, prepared, beta, {});
}

GradientVector reference_gradient(const Network& net, const Problem& problem, const SampleSet& samples, double beta) {
  check_compatible(net, problem);
  return grad_params([&](std::span<const Var> theta) { return pinn_loss_generic<Var>(net, theta, problem, samples, beta); },
                     net.parameters());
}

namespace {

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

TrainResult train(const Network& net, const Problem& problem, const SampleSet& samples, const TrainingConfig& config,
                  TrainingState* state) {
  config.validate();
  check_compatible(net, problem);
  const auto start = std::chrono::steady_clock::now();
  auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };

  TrainResult result;
  result.network = net;
  Engine engine(net);
  PreparedSamples prepared = prepare(problem, samples);
  const ParameterStore store = net.parameters();
  const std::vector<bool> mask = store.trainable_mask();
  std::vector<double> theta(store.values().begin(), store.values().end());
  std::vector<double> last_good = theta;
  std::vector<double> grad(theta.size(), 0.0);

  TrainingState local;
  TrainingState& st = state ? *state : local;
  const double beta = problem.is_fitting() ? 0.0 : config.beta;

  auto abort = [&](const std::string& msg) {
    Network last = net;
    last.set_parameters(last_good);
    throw TrainingAborted(msg, std::move(last), std::move(result.trace));
  };

  for (std::size_t epoch = 0; epoch <= config.epochs; ++epoch) {
    const bool last = epoch == config.epochs;
    LossTerms t = pinn_loss_and_grad(engine, theta, prepared, beta, last ? std::span<double>() : std::span<double>(grad));
    if (!std::isfinite(t.loss)) abort("non-finite loss at epoch " + std::to_string(epoch));
    const std::size_t step = st.step;
    if (epoch % config.trace_every == 0 || last) {
      result.trace.records.push_back({epoch, t.loss, t.interior, t.boundary, learning_rate(config, step), elapsed_ms()});
    }
    if (last) {
      result.final_loss = t;
      break;
    }
    if (!all_finite(grad)) {
      for (std::size_t i = 0; i < grad.size(); ++i) {
        if (mask[i] && !std::isfinite(grad[i])) {
          abort("non-finite gradient in parameter group " + store.group_of(i).name + " at epoch " +
                std::to_string(epoch));
        }
      }
    }
    last_good = theta;
    adam_step(theta, grad, st.adam, step, config, mask, &store);
    ++st.step;
  }
  result.network.set_parameters(theta);
  return result;
}

}  // namespace abidnn
