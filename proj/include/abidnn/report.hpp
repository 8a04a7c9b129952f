#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "abidnn/adaptive.hpp"
#include "abidnn/training.hpp"

namespace abidnn {

/// Everything a run leaves behind.
struct RunReport {
  std::string problem;
  std::string mode;
  std::string model;  // label, e.g. "BI-DNN(b=16)"
  std::string structure;
  std::string activation;
  std::size_t params = 0;
  std::vector<IterationRecord> rows;
  double final_error = 0.0;
  LossTerms final_loss;
  std::uint64_t init_seed = 0;
  std::uint64_t sample_seed = 0;
  std::vector<TrainingTrace> traces;
  nlohmann::json config;
  std::string status = "ok";
  std::string diagnostic;

  bool operator==(const RunReport&) const = default;
};

nlohmann::json to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& j);
RunReport parse_report(const std::string& text);

/// table.csv: model,structure,params,error (one line per row).
std::string format_table_csv(const RunReport& report);
/// trace.csv: every phase's trace, with a leading phase column.
std::string format_traces_csv(const RunReport& report);
/// error_field.csv: x1[,x2],abs_error in grid order.
std::string format_error_field_csv(const TestGrid& grid, const std::vector<double>& abs_error);

/// Writes report.json, table.csv, trace.csv and error_field.csv into out_dir,
/// creating it if needed. Throws IoError when a file cannot be written.
void emit_report(const RunReport& report, const TestGrid& grid, const std::vector<double>& abs_error,
                 const std::filesystem::path& out_dir);

}  // namespace abidnn
