#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "abidnn/checkpoint.hpp"
#include "abidnn/config.hpp"
#include "abidnn/kernels.hpp"

using nlohmann::json;

namespace {

struct Overrides {
  std::optional<std::string> mode, problem, out;
  std::optional<double> gamma, eps, scale, eta_tol, beta;
  std::optional<std::size_t> min_pts, max_iters, epochs;
  std::optional<std::uint64_t> seed;

  void add_to(CLI::App* app) {
    app->add_option("--mode", mode, "fit, solve or adapt");
    app->add_option("--problem", problem, "Problem name");
    app->add_option("--out", out, "Output directory");
    app->add_option("--gamma", gamma, "Marking parameter");
    app->add_option("--eps", eps, "DBSCAN radius");
    app->add_option("--min-pts", min_pts, "DBSCAN MinPts");
    app->add_option("--scale", scale, "Block radius scale s");
    app->add_option("--eta-tol", eta_tol, "Stopping tolerance for the total indicator");
    app->add_option("--max-iters", max_iters, "Maximum number of enhancements J");
    app->add_option("--beta", beta, "Boundary penalty weight");
    app->add_option("--epochs", epochs, "Epochs per training phase");
    app->add_option("--seed", seed, "Initialization seed (sampling uses seed + 1)");
  }

  void apply(json& j) const {
    if (mode) j["mode"] = *mode;
    if (problem) j["problem"] = *problem;
    if (out) j["output_dir"] = *out;
    if (gamma) j["adaptive"]["gamma"] = *gamma;
    if (eps) j["adaptive"]["eps"] = *eps;
    if (min_pts) j["adaptive"]["min_pts"] = *min_pts;
    if (scale) j["adaptive"]["scale"] = *scale;
    if (eta_tol) j["adaptive"]["eta_tol"] = *eta_tol;
    if (max_iters) j["adaptive"]["max_iters"] = *max_iters;
    if (beta) j["training"]["beta"] = *beta;
    if (epochs) j["training"]["epochs"] = *epochs;
    if (seed) {
      j["seeds"]["init"] = *seed;
      j["seeds"]["samples"] = *seed + 1;
    }
  }
};

bool load_json(const std::string& path, json& j) {
  if (path.empty()) {
    j = json::object();
    return true;
  }
  std::ifstream in(path);
  if (!in) {
    std::cerr << "cannot read " << path << '\n';
    return false;
  }
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    std::cerr << path << ": " << e.what() << '\n';
    return false;
  }
  return true;
}

// Parses and validates; prints violations and returns nullopt on failure.
std::optional<abidnn::RunConfig> load_config(const std::string& path, const Overrides& ov) {
  json j;
  if (!load_json(path, j)) return std::nullopt;
  if (!j.is_object()) {
    std::cerr << "config: top level must be an object\n";
    return std::nullopt;
  }
  ov.apply(j);
  std::vector<std::string> violations;
  abidnn::RunConfig c = abidnn::parse_run_config(j, violations);
  if (violations.empty()) violations = abidnn::validate(c);
  if (!violations.empty()) {
    for (const auto& v : violations) std::cerr << "config: " << v << '\n';
    return std::nullopt;
  }
  return c;
}

std::vector<std::size_t> parse_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoul(item));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Basis-inspired and adaptive deep neural networks for function fitting and PDEs"};
  app.require_subcommand(1);

  std::string run_path;
  Overrides run_ov;
  auto* run_cmd = app.add_subcommand("run", "Train a model as described by a config file");
  run_cmd->add_option("config", run_path, "Config file (JSON)");
  run_ov.add_to(run_cmd);

  std::string val_path;
  Overrides val_ov;
  auto* val_cmd = app.add_subcommand("validate", "Check a config file without running it");
  val_cmd->add_option("config", val_path, "Config file (JSON)");
  val_ov.add_to(val_cmd);

  auto* prob_cmd = app.add_subcommand("problems", "List the built-in problems");

  std::string activation = "tanh", blocks, structure, kind = "bidnn", checkpoint, widths;
  std::size_t hidden = 0, input_dim = 1;
  auto* desc_cmd = app.add_subcommand("describe-model", "Print the structure and parameter count of a model");
  desc_cmd->add_option("--activation", activation, "tanh or relu");
  desc_cmd->add_option("--blocks", blocks, "Blocks per dimension, e.g. 12,12");
  desc_cmd->add_option("--hidden", hidden, "Hidden layers of BI-DNN width");
  desc_cmd->add_option("--widths", widths, "Hidden widths of a plain DNN, e.g. 9,9,9");
  desc_cmd->add_option("--input-dim", input_dim, "Input dimension of a plain DNN");
  desc_cmd->add_option("--structure", structure, "Structure string such as 1-32-32-16-1");
  desc_cmd->add_option("--kind", kind, "bidnn or dnn (with --structure)");
  desc_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      auto c = load_config(run_path, run_ov);
      if (!c) return 1;
      std::cout << "kernels: " << abidnn::kernels().name << '\n';
      return abidnn::run(*c, std::cout, std::cerr);
    }
    if (*val_cmd) {
      auto c = load_config(val_path, val_ov);
      if (!c) return 1;
      std::cout << "ok\n" << abidnn::echo(*c).dump(2) << '\n';
      return 0;
    }
    if (*prob_cmd) {
      for (const auto& name : abidnn::problem_names()) {
        const abidnn::Problem p = abidnn::problem_by_name(name);
        std::cout << name << "  dim=" << p.domain.dim << "  operator=" << abidnn::to_string(p.op)
                  << "  samples=" << p.default_interior << '/' << p.default_boundary << '\n';
      }
      return 0;
    }
    if (*desc_cmd) {
      abidnn::Network net;
      if (!checkpoint.empty()) {
        net = abidnn::load_checkpoint(checkpoint);
      } else if (!structure.empty()) {
        net = abidnn::build_from_structure(structure, abidnn::parse_network_kind(kind), input_dim,
                                           abidnn::parse_activation(activation), 0);
      } else if (!widths.empty()) {
        net = abidnn::build_dnn(input_dim, parse_list(widths), abidnn::parse_activation(activation), 0);
      } else {
        std::vector<std::size_t> b = parse_list(blocks.empty() ? "16" : blocks);
        std::vector<std::vector<abidnn::NodeTriple>> nodes;
        for (std::size_t n : b) nodes.push_back(abidnn::uniform_nodes(0.0, 1.0, n));
        net = abidnn::build_bidnn(nodes, abidnn::parse_activation(activation), hidden, 0);
      }
      std::cout << "model      " << abidnn::model_label(net, false) << '\n'
                << "structure  " << net.structure() << '\n'
                << "activation " << abidnn::to_string(net.activation) << '\n'
                << "params     " << abidnn::count_params(net) << '\n';
      return 0;
    }
  } catch (const abidnn::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
