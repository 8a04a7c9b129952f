#include "abidnn/report.hpp"

#include <fstream>
#include <sstream>

#include "abidnn/checkpoint.hpp"
#include "abidnn/errors.hpp"

namespace abidnn {

using nlohmann::json;

namespace {

json row_json(const IterationRecord& r) {
  return json{{"iteration", r.iteration}, {"model", r.model},           {"structure", r.structure},
              {"params", r.params},       {"eta", r.eta},               {"marked_count", r.marked_count},
              {"cluster_count", r.cluster_count}, {"test_error", r.test_error}};
}

IterationRecord row_from(const json& j) {
  IterationRecord r;
  r.iteration = j.at("iteration").get<std::size_t>();
  r.model = j.at("model").get<std::string>();
  r.structure = j.at("structure").get<std::string>();
  r.params = j.at("params").get<std::size_t>();
  r.eta = j.at("eta").get<double>();
  r.marked_count = j.at("marked_count").get<std::size_t>();
  r.cluster_count = j.at("cluster_count").get<std::size_t>();
  r.test_error = j.at("test_error").get<double>();
  return r;
}

json trace_json(const TrainingTrace& t) {
  json recs = json::array();
  for (const auto& r : t.records) {
    recs.push_back(json::array({r.epoch, r.loss, r.interior_term, r.boundary_term, r.lr, r.wall_ms}));
  }
  return recs;
}

TrainingTrace trace_from(const json& j) {
  TrainingTrace t;
  for (const auto& r : j) {
    t.records.push_back({r.at(0).get<std::size_t>(), r.at(1).get<double>(), r.at(2).get<double>(),
                         r.at(3).get<double>(), r.at(4).get<double>(), r.at(5).get<double>()});
  }
  return t;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

json to_json(const RunReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) rows.push_back(row_json(r));
  json traces = json::array();
  for (const auto& t : report.traces) traces.push_back(trace_json(t));
  json j;
  j["problem"] = report.problem;
  j["mode"] = report.mode;
  j["model"] = {{"label", report.model},
                {"structure", report.structure},
                {"activation", report.activation},
                {"params", report.params}};
  j["rows"] = std::move(rows);
  j["final_error"] = report.final_error;
  j["final_loss"] = {{"loss", report.final_loss.loss},
                     {"interior", report.final_loss.interior},
                     {"boundary", report.final_loss.boundary}};
  j["seeds"] = {{"init", report.init_seed}, {"samples", report.sample_seed}};
  j["status"] = report.status;
  j["diagnostic"] = report.diagnostic;
  j["config"] = report.config;
  j["trace_columns"] = json::array({"epoch", "loss", "interior_term", "boundary_term", "lr", "wall_ms"});
  j["traces"] = std::move(traces);
  return j;
}

RunReport report_from_json(const json& j) {
  try {
    RunReport r;
    r.problem = j.at("problem").get<std::string>();
    r.mode = j.at("mode").get<std::string>();
    const json& m = j.at("model");
    r.model = m.at("label").get<std::string>();
    r.structure = m.at("structure").get<std::string>();
    r.activation = m.at("activation").get<std::string>();
    r.params = m.at("params").get<std::size_t>();
    for (const auto& row : j.at("rows")) r.rows.push_back(row_from(row));
    r.final_error = j.at("final_error").get<double>();
    const json& fl = j.at("final_loss");
    r.final_loss = {fl.at("loss").get<double>(), fl.at("interior").get<double>(), fl.at("boundary").get<double>()};
    r.init_seed = j.at("seeds").at("init").get<std::uint64_t>();
    r.sample_seed = j.at("seeds").at("samples").get<std::uint64_t>();
    r.status = j.at("status").get<std::string>();
    r.diagnostic = j.at("diagnostic").get<std::string>();
    r.config = j.at("config");
    for (const auto& t : j.at("traces")) r.traces.push_back(trace_from(t));
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
}

RunReport parse_report(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
  return report_from_json(j);
}

std::string format_table_csv(const RunReport& report) {
  std::ostringstream os;
  os << "model,structure,params,error\n";
  for (const auto& r : report.rows) {
    os << '"' << r.model << "\"," << r.structure << ',' << r.params << ',' << format_double(r.test_error) << '\n';
  }
  return os.str();
}

std::string format_traces_csv(const RunReport& report) {
  std::ostringstream os;
  os << "phase,epoch,loss,interior_term,boundary_term,lr,wall_ms\n";
  for (std::size_t p = 0; p < report.traces.size(); ++p) {
    for (const auto& r : report.traces[p].records) {
      os << p << ',' << r.epoch << ',' << format_double(r.loss) << ',' << format_double(r.interior_term) << ','
         << format_double(r.boundary_term) << ',' << format_double(r.lr) << ',' << format_double(r.wall_ms) << '\n';
    }
  }
  return os.str();
}

std::string format_error_field_csv(const TestGrid& grid, const std::vector<double>& abs_error) {
  if (abs_error.size() != grid.size()) throw DimensionMismatch("error field does not match the grid");
  std::ostringstream os;
  for (std::size_t k = 0; k < grid.dim; ++k) os << 'x' << (k + 1) << ',';
  os << "abs_error\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (double c : grid.point(i)) os << format_double(c) << ',';
    os << format_double(abs_error[i]) << '\n';
  }
  return os.str();
}

void emit_report(const RunReport& report, const TestGrid& grid, const std::vector<double>& abs_error,
                 const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  write_file(out_dir / "report.json", to_json(report).dump(2) + "\n");
  write_file(out_dir / "table.csv", format_table_csv(report));
  write_file(out_dir / "trace.csv", format_traces_csv(report));
  write_file(out_dir / "error_field.csv", format_error_field_csv(grid, abs_error));
}

}  // namespace abidnn
