#include "abidnn/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ostream>
#include <set>

#include "abidnn/checkpoint.hpp"
#include "abidnn/metrics.hpp"
#include "abidnn/report.hpp"

namespace abidnn {

using nlohmann::json;

std::string_view to_string(RunMode m) {
  switch (m) {
    case RunMode::fit:
      return "fit";
    case RunMode::solve:
      return "solve";
    case RunMode::adapt:
      return "adapt";
  }
  return "fit";
}

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

void check_keys(const json& obj, const std::string& section, const std::vector<std::string>& allowed,
                std::vector<std::string>& violations) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      const std::string key = section.empty() ? it.key() : section + "." + it.key();
      violations.push_back(key + ": unknown key (valid: " + join(allowed) + ")");
    }
  }
}

// Reads obj[key] into out if present; type errors become violations.
template <class T>
bool read(const json& obj, const std::string& section, const char* key, T& out, std::vector<std::string>& violations) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return false;
  try {
    out = it->get<T>();
    return true;
  } catch (const json::exception&) {
    violations.push_back(section + "." + key + ": wrong type");
    return false;
  }
}

const json& section(const json& j, const char* name, std::vector<std::string>& violations) {
  static const json empty = json::object();
  auto it = j.find(name);
  if (it == j.end() || it->is_null()) return empty;
  if (!it->is_object()) {
    violations.push_back(std::string(name) + ": must be an object");
    return empty;
  }
  return *it;
}

}  // namespace

RunConfig parse_run_config(const json& j, std::vector<std::string>& violations) {
  RunConfig c;
  if (!j.is_object()) {
    violations.push_back("config: top level must be an object");
    return c;
  }
  check_keys(j, "", {"mode", "problem", "model", "training", "adaptive", "samples", "seeds", "output_dir"}, violations);

  std::string mode;
  if (read(j, "config", "mode", mode, violations)) {
    if (mode == "fit") {
      c.mode = RunMode::fit;
    } else if (mode == "solve") {
      c.mode = RunMode::solve;
    } else if (mode == "adapt") {
      c.mode = RunMode::adapt;
    } else {
      violations.push_back("mode: unknown mode \"" + mode + "\" (valid: fit, solve, adapt)");
    }
  }
  read(j, "config", "problem", c.problem, violations);
  read(j, "config", "output_dir", c.output_dir, violations);

  const json& m = section(j, "model", violations);
  check_keys(m, "model", {"kind", "activation", "blocks", "hidden_layers", "widths", "frozen"}, violations);
  std::string s;
  if (read(m, "model", "kind", s, violations)) {
    try {
      c.model.kind = parse_network_kind(s);
    } catch (const Error&) {
      violations.push_back("model.kind: unknown kind \"" + s + "\" (valid: bidnn, dnn)");
    }
  }
  if (read(m, "model", "activation", s, violations)) {
    try {
      c.model.activation = parse_activation(s);
    } catch (const Error&) {
      violations.push_back("model.activation: unknown activation \"" + s + "\" (valid: tanh, relu)");
    }
  }
  read(m, "model", "blocks", c.model.blocks, violations);
  std::size_t hidden = 0;
  if (read(m, "model", "hidden_layers", hidden, violations)) c.model.hidden_layers = hidden;
  read(m, "model", "widths", c.model.widths, violations);
  read(m, "model", "frozen", c.model.frozen, violations);

  const json& t = section(j, "training", violations);
  check_keys(t, "training",
             {"epochs", "beta", "lr0", "decay_base", "decay_every", "adam_beta1", "adam_beta2", "adam_eps",
              "trace_every"},
             violations);
  std::size_t epochs = 0;
  if (read(t, "training", "epochs", epochs, violations)) c.epochs = epochs;
  read(t, "training", "beta", c.training.beta, violations);
  read(t, "training", "lr0", c.training.lr0, violations);
  read(t, "training", "decay_base", c.training.decay_base, violations);
  read(t, "training", "decay_every", c.training.decay_every, violations);
  read(t, "training", "adam_beta1", c.training.adam_beta1, violations);
  read(t, "training", "adam_beta2", c.training.adam_beta2, violations);
  read(t, "training", "adam_eps", c.training.adam_eps, violations);
  read(t, "training", "trace_every", c.training.trace_every, violations);

  const json& a = section(j, "adaptive", violations);
  check_keys(a, "adaptive",
             {"gamma", "eps", "min_pts", "scale", "max_iters", "eta_tol", "min_radius", "continue_optimizer"},
             violations);
  read(a, "adaptive", "gamma", c.adaptive.gamma, violations);
  read(a, "adaptive", "eps", c.adaptive.dbscan_eps, violations);
  read(a, "adaptive", "min_pts", c.adaptive.min_pts, violations);
  read(a, "adaptive", "scale", c.adaptive.scale, violations);
  read(a, "adaptive", "max_iters", c.adaptive.max_iters, violations);
  c.eta_tol_set = read(a, "adaptive", "eta_tol", c.adaptive.eta_tol, violations);
  read(a, "adaptive", "min_radius", c.adaptive.min_radius, violations);
  read(a, "adaptive", "continue_optimizer", c.adaptive.continue_optimizer, violations);

  const json& sm = section(j, "samples", violations);
  check_keys(sm, "samples", {"interior", "boundary"}, violations);
  std::size_t n = 0;
  if (read(sm, "samples", "interior", n, violations)) c.interior = n;
  if (read(sm, "samples", "boundary", n, violations)) c.boundary = n;

  const json& sd = section(j, "seeds", violations);
  check_keys(sd, "seeds", {"init", "samples"}, violations);
  read(sd, "seeds", "init", c.init_seed, violations);
  read(sd, "seeds", "samples", c.sample_seed, violations);
  return c;
}

std::vector<std::string> validate(const RunConfig& c) {
  std::vector<std::string> v;
  const std::vector<std::string> names = problem_names();
  if (std::find(names.begin(), names.end(), c.problem) == names.end()) {
    v.push_back("problem: unknown problem \"" + c.problem + "\" (valid: " + join(names) + ")");
    return v;
  }
  const Problem p = problem_by_name(c.problem);
  const std::size_t dim = p.domain.dim;
  if (c.mode == RunMode::fit && !p.is_fitting()) v.push_back("mode: fit needs a fitting problem, " + c.problem + " is a PDE");
  if (c.mode == RunMode::solve && p.is_fitting()) v.push_back("mode: solve needs a PDE problem, " + c.problem + " is a fitting problem");

  const TrainingConfig& t = c.training;
  if (!(t.lr0 > 0.0)) v.push_back("training.lr0: must be positive");
  if (!(t.decay_base > 0.0 && t.decay_base <= 1.0)) v.push_back("training.decay_base: must lie in (0,1]");
  if (t.decay_every < 1) v.push_back("training.decay_every: must be at least 1");
  if (!(t.beta >= 0.0)) v.push_back("training.beta: must be nonnegative");
  if (!(t.adam_beta1 >= 0.0 && t.adam_beta1 < 1.0)) v.push_back("training.adam_beta1: must lie in [0,1)");
  if (!(t.adam_beta2 >= 0.0 && t.adam_beta2 < 1.0)) v.push_back("training.adam_beta2: must lie in [0,1)");
  if (!(t.adam_eps > 0.0)) v.push_back("training.adam_eps: must be positive");
  if (t.trace_every < 1) v.push_back("training.trace_every: must be at least 1");

  const ModelSpec& m = c.model;
  if (m.activation == Activation::identity) v.push_back("model.activation: must be tanh or relu");
  if (m.activation == Activation::relu && p.needs_second_derivatives()) {
    v.push_back("model.activation: relu has vanishing second derivatives and cannot solve " + c.problem);
  }
  if (m.kind == NetworkKind::bidnn) {
    if (!m.blocks.empty() && m.blocks.size() != dim) {
      v.push_back("model.blocks: needs one entry per input dimension (" + std::to_string(dim) + ")");
    }
    for (std::size_t b : m.blocks) {
      if (b < 2) v.push_back("model.blocks: each dimension needs at least 2 blocks");
    }
    if (!m.widths.empty()) v.push_back("model.widths: only used by kind dnn");
  } else {
    if (m.widths.empty()) v.push_back("model.widths: required for kind dnn");
    for (std::size_t w : m.widths) {
      if (w < 1) v.push_back("model.widths: every width must be positive");
    }
    if (m.frozen) v.push_back("model.frozen: only a BI-DNN has blocks to freeze");
    if (!m.blocks.empty()) v.push_back("model.blocks: only used by kind bidnn");
    if (c.mode == RunMode::adapt) v.push_back("model.kind: adapt mode needs a BI-DNN");
  }

  if (c.interior && *c.interior < 1) v.push_back("samples.interior: must be at least 1");

  if (c.mode == RunMode::adapt) {
    const AdaptiveConfig& a = c.adaptive;
    if (!(a.gamma > 0.0 && a.gamma < 1.0)) v.push_back("adaptive.gamma: gamma must lie in (0,1)");
    if (!(a.dbscan_eps > 0.0)) v.push_back("adaptive.eps: must be positive");
    if (a.min_pts < 1) v.push_back("adaptive.min_pts: must be at least 1");
    if (!(a.scale > 0.0)) v.push_back("adaptive.scale: must be positive");
    if (a.max_iters < 1) v.push_back("adaptive.max_iters: must be at least 1");
    if (!c.eta_tol_set) {
      v.push_back("adaptive.eta_tol: required in adapt mode");
    } else if (!(a.eta_tol > 0.0)) {
      v.push_back("adaptive.eta_tol: must be positive");
    }
    if (a.min_radius >= 0.0 && !(a.min_radius > 0.0)) v.push_back("adaptive.min_radius: must be positive");
  } else if (!(c.adaptive.gamma > 0.0 && c.adaptive.gamma < 1.0)) {
    v.push_back("adaptive.gamma: gamma must lie in (0,1)");
  }
  return v;
}

std::size_t resolved_epochs(const RunConfig& c, std::size_t dim) {
  if (c.epochs) return *c.epochs;
  if (c.mode == RunMode::adapt) return dim == 1 ? 10000 : 15000;
  return dim == 1 ? 50000 : 45000;
}

std::vector<std::size_t> resolved_blocks(const RunConfig& c, std::size_t dim) {
  if (!c.model.blocks.empty()) return c.model.blocks;
  const std::size_t b = dim == 1 ? (c.mode == RunMode::adapt ? 10 : 16) : (c.mode == RunMode::adapt ? 10 : 12);
  return std::vector<std::size_t>(dim, b);
}

std::size_t resolved_hidden_layers(const RunConfig& c, std::size_t dim) {
  if (c.model.hidden_layers) return *c.model.hidden_layers;
  return dim == 1 ? 0 : 2;
}

json echo(const RunConfig& c) {
  const Problem p = problem_by_name(c.problem);
  const std::size_t dim = p.domain.dim;
  json model = {{"kind", std::string(to_string(c.model.kind))},
                {"activation", std::string(to_string(c.model.activation))},
                {"frozen", c.model.frozen}};
  if (c.model.kind == NetworkKind::bidnn) {
    model["blocks"] = resolved_blocks(c, dim);
    model["hidden_layers"] = resolved_hidden_layers(c, dim);
  } else {
    model["widths"] = c.model.widths;
  }
  const TrainingConfig& t = c.training;
  json j = {
      {"mode", std::string(to_string(c.mode))},
      {"problem", c.problem},
      {"model", model},
      {"training",
       {{"epochs", resolved_epochs(c, dim)},
        {"beta", t.beta},
        {"lr0", t.lr0},
        {"decay_base", t.decay_base},
        {"decay_every", t.decay_every},
        {"adam_beta1", t.adam_beta1},
        {"adam_beta2", t.adam_beta2},
        {"adam_eps", t.adam_eps},
        {"trace_every", t.trace_every}}},
      {"samples",
       {{"interior", c.interior.value_or(p.default_interior)},
        {"boundary", p.is_fitting() ? 0 : c.boundary.value_or(p.default_boundary)}}},
      {"seeds", {{"init", c.init_seed}, {"samples", c.sample_seed}}},
  };
  const AdaptiveConfig& a = c.adaptive;
  j["adaptive"] = {{"gamma", a.gamma},
                   {"eps", a.dbscan_eps},
                   {"min_pts", a.min_pts},
                   {"scale", a.scale},
                   {"max_iters", a.max_iters},
                   {"min_radius", a.effective_min_radius()},
                   {"continue_optimizer", a.continue_optimizer}};
  if (c.eta_tol_set) j["adaptive"]["eta_tol"] = a.eta_tol;
  return j;
}

Network build_model(const RunConfig& c, const Problem& p) {
  const std::size_t dim = p.domain.dim;
  if (c.model.kind == NetworkKind::dnn) return build_dnn(dim, c.model.widths, c.model.activation, c.init_seed);
  const std::vector<std::size_t> blocks = resolved_blocks(c, dim);
  std::vector<std::vector<NodeTriple>> nodes;
  for (std::size_t d = 0; d < dim; ++d) nodes.push_back(uniform_nodes(p.domain.lo[d], p.domain.hi[d], blocks[d]));
  return build_bidnn(nodes, c.model.activation, resolved_hidden_layers(c, dim), c.init_seed, c.model.frozen);
}

std::filesystem::path output_directory(const RunConfig& c) {
  if (!c.output_dir.empty()) return c.output_dir;
  const char* root = std::getenv("ABIDNN_OUTPUT_ROOT");
  std::filesystem::path base = root && *root ? root : "runs";
  return base / (c.problem + "-" + std::string(to_string(c.mode)));
}

namespace {

IterationRecord fixed_row(const Network& net, const Problem& p, const SampleSet& samples, const TestGrid& grid,
                          const std::vector<double>& u) {
  IterationRecord r;
  r.model = model_label(net, false);
  r.structure = net.structure();
  r.params = net.param_count();
  r.eta = total_indicator(estimate(net, p, samples.interior));
  r.test_error = relative_l2(u, exact_on_grid(p.exact, grid));
  return r;
}

}  // namespace

int run(const RunConfig& c, std::ostream& log, std::ostream& err) {
  const std::vector<std::string> violations = validate(c);
  if (!violations.empty()) {
    for (const auto& v : violations) err << "config: " << v << '\n';
    return 1;
  }
  try {
    const Problem p = problem_by_name(c.problem);
    const std::size_t dim = p.domain.dim;
    TrainingConfig tc = c.training;
    tc.epochs = resolved_epochs(c, dim);
    tc.seed = c.init_seed;
    const json cfg = echo(c);
    const SampleSet samples = sample(p, cfg["samples"]["interior"].get<std::size_t>(),
                                     cfg["samples"]["boundary"].get<std::size_t>(), c.sample_seed);
    const Network initial = build_model(c, p);
    log << "problem " << p.name << ", mode " << to_string(c.mode) << ", model " << initial.structure() << " ("
        << initial.param_count() << " params), " << tc.epochs << " epochs per phase\n";

    RunReport report;
    report.problem = p.name;
    report.mode = std::string(to_string(c.mode));
    report.activation = std::string(to_string(c.model.activation));
    report.init_seed = c.init_seed;
    report.sample_seed = c.sample_seed;
    report.config = cfg;

    Network final_net = initial;
    int status = 0;
    if (c.mode == RunMode::adapt) {
      AdaptiveResult ar = run_abidnn(initial, p, samples, tc, c.adaptive);
      final_net = std::move(ar.network);
      report.rows = std::move(ar.rows);
      report.traces = std::move(ar.traces);
      for (const auto& r : report.rows) {
        log << "iteration " << r.iteration << ": " << r.structure << " (" << r.params << " params), eta "
            << format_double(r.eta) << ", error " << format_double(r.test_error) << '\n';
      }
      if (ar.aborted) {
        report.status = "aborted";
        report.diagnostic = ar.diagnostic;
        status = 2;
      }
    } else {
      try {
        TrainResult tr = train(initial, p, samples, tc);
        final_net = std::move(tr.network);
        report.traces.push_back(std::move(tr.trace));
      } catch (const TrainingAborted& e) {
        final_net = e.network;
        report.traces.push_back(e.trace);
        report.status = "aborted";
        report.diagnostic = e.what();
        status = 2;
      }
    }

    const TestGrid grid = p.test_grid();
    const std::vector<double> u = evaluate_on_grid(final_net, grid);
    const std::vector<double> u_star = exact_on_grid(p.exact, grid);
    if (c.mode != RunMode::adapt || report.rows.empty()) report.rows.push_back(fixed_row(final_net, p, samples, grid, u));
    std::vector<double> abs_error(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) abs_error[i] = std::fabs(u[i] - u_star[i]);

    report.model = model_label(final_net, c.mode == RunMode::adapt);
    report.structure = final_net.structure();
    report.params = count_params(final_net);
    report.final_error = relative_l2(u, u_star);
    report.final_loss = pinn_loss(final_net, p, samples, tc.beta);

    const std::filesystem::path out = output_directory(c);
    emit_report(report, grid, abs_error, out);
    save_checkpoint(final_net, out / "model.ckpt", c.init_seed);
    log << "final relative L2 error " << format_double(report.final_error) << ", written to " << out.string() << '\n';
    if (status != 0) err << "training aborted: " << report.diagnostic << '\n';
    return status;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace abidnn
