#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "abidnn/adaptive.hpp"
#include "abidnn/biblock.hpp"
#include "abidnn/network.hpp"
#include "abidnn/problems.hpp"
#include "abidnn/training.hpp"

namespace abidnn {

enum class RunMode { fit, solve, adapt };

std::string_view to_string(RunMode m);

struct ModelSpec {
  NetworkKind kind = NetworkKind::bidnn;
  Activation activation = Activation::tanh;
  /// Blocks per input dimension (BI-DNN). Empty means the default for the problem.
  std::vector<std::size_t> blocks;
  std::optional<std::size_t> hidden_layers;
  /// Hidden widths (plain DNN).
  std::vector<std::size_t> widths;
  /// Freeze the block parameters; only the dense layers train.
  bool frozen = false;
};

/// A run as described by a config file. Unset optionals take defaults that
/// depend on the problem dimension and the mode.
struct RunConfig {
  RunMode mode = RunMode::fit;
  std::string problem = "fitting-singular";
  ModelSpec model;
  TrainingConfig training;
  std::optional<std::size_t> epochs;
  AdaptiveConfig adaptive;
  bool eta_tol_set = false;
  std::optional<std::size_t> interior;
  std::optional<std::size_t> boundary;
  std::uint64_t init_seed = 0;
  std::uint64_t sample_seed = 1;
  std::string output_dir;
};

/// Reads a config object. Every problem found is appended to `violations`
/// as "key: constraint"; the returned config holds whatever parsed cleanly.
RunConfig parse_run_config(const nlohmann::json& j, std::vector<std::string>& violations);

/// Invariant checks on a parsed config.
std::vector<std::string> validate(const RunConfig& config);

/// The config with every default filled in, in the file format.
nlohmann::json echo(const RunConfig& config);

std::size_t resolved_epochs(const RunConfig& config, std::size_t dim);
std::vector<std::size_t> resolved_blocks(const RunConfig& config, std::size_t dim);
std::size_t resolved_hidden_layers(const RunConfig& config, std::size_t dim);

/// Builds the initial network for a config.
Network build_model(const RunConfig& config, const Problem& problem);

/// Output directory: output_dir if set, else $ABIDNN_OUTPUT_ROOT (or "runs")
/// joined with "<problem>-<mode>".
std::filesystem::path output_directory(const RunConfig& config);

/// Runs the config and writes the report files. Returns 0 on success, 1 on a
/// configuration or I/O problem, 2 when training fails numerically.
int run(const RunConfig& config, std::ostream& log, std::ostream& err);

}  // namespace abidnn
