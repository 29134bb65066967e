#include "attrsel/serialize.hpp"

#include <fstream>

#include "attrsel/error.hpp"

namespace attrsel {
using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  return rows;
}

Matrix matrix_from_json(const json& j) {
  require(j.is_array(), ErrorCode::ParseError, "matrix must be an array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = rows ? j.at(0).size() : 0;
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = j.at(r).get<std::vector<double>>();
    require(row.size() == cols, ErrorCode::ParseError, "ragged matrix row " + std::to_string(r));
    std::copy(row.begin(), row.end(), m.row(r).begin());
  }
  require(all_finite(m), ErrorCode::NonFinite, "matrix has non-finite entries");
  return m;
}

json head_to_json(const Head& head) { return {{"weights", matrix_to_json(head.w)}, {"bias", head.b}}; }

Head head_from_json(const json& j) {
  try {
    const json& h = j.contains("head") ? j.at("head") : j;
    Head head{matrix_from_json(h.at("weights")), h.at("bias").get<Vector>()};
    require(head.b.size() == head.w.rows(), ErrorCode::ParseError, "bias length != weight rows");
    return head;
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, std::string("head: ") + e.what());
  }
}

json report_to_json(const TrainReport& report) {
  json curve = json::array();
  for (const auto& p : report.curve)
    curve.push_back({{"epoch", p.epoch}, {"train_loss", p.train_loss}, {"val_loss", p.val_loss},
                     {"val_accuracy", p.val_accuracy}});
  return {{"best_epoch", report.best_epoch},
          {"best_val_accuracy", report.best_val_accuracy},
          {"best_val_loss", report.best_val_loss},
          {"epochs_run", report.epochs_run},
          {"stop_reason", report.stop_reason},
          {"curve", curve}};
}

json selection_to_json(const SelectionResult& s) {
  json j = {{"method", s.method}, {"k", s.k()},          {"indices", s.indices}, {"names", s.names},
            {"seed", s.seed},     {"config", s.config}, {"metrics", s.metrics}};
  if (s.head) j["head"] = head_to_json(*s.head);
  return j;
}

SelectionResult selection_from_json(const json& j) {
  try {
    SelectionResult s;
    s.method = j.at("method").get<std::string>();
    s.indices = j.at("indices").get<std::vector<std::size_t>>();
    s.names = j.at("names").get<std::vector<std::string>>();
    s.seed = j.value("seed", std::uint64_t{0});
    s.config = j.value("config", json::object());
    s.metrics = j.value("metrics", json::object());
    if (j.contains("head")) s.head = head_from_json(j.at("head"));
    require(s.indices.size() == s.names.size(), ErrorCode::ParseError, "indices and names differ in length");
    if (j.contains("k"))
      require(j.at("k").get<std::size_t>() == s.indices.size(), ErrorCode::ParseError, "k != number of indices");
    return s;
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, std::string("selection: ") + e.what());
  }
}

json probe_to_json(const ProbeModel& p) {
  json metrics = {{"train_acc", p.metrics.train_acc}, {"val_acc", p.metrics.val_acc}};
  if (p.metrics.test_acc) metrics["test_acc"] = *p.metrics.test_acc;
  metrics["training"] = report_to_json(p.report);
  return {{"weights", matrix_to_json(p.w)},
          {"bias", p.b},
          {"selection", selection_to_json(p.selection)},
          {"metrics", metrics},
          {"config", p.config},
          {"seed", p.config.value("seed", std::uint64_t{0})}};
}

ProbeModel probe_from_json(const json& j) {
  try {
    ProbeModel p;
    p.w = matrix_from_json(j.at("weights"));
    p.b = j.at("bias").get<Vector>();
    p.selection = selection_from_json(j.at("selection"));
    p.config = j.value("config", json::object());
    const json& m = j.at("metrics");
    p.metrics.train_acc = m.value("train_acc", 0.0);
    p.metrics.val_acc = m.value("val_acc", 0.0);
    if (m.contains("test_acc")) p.metrics.test_acc = m.at("test_acc").get<double>();
    require(p.b.size() == p.w.rows(), ErrorCode::ParseError, "bias length != weight rows");
    require(p.w.cols() == p.selection.k(), ErrorCode::ParseError, "weight columns != selection size");
    return p;
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, std::string("probe: ") + e.what());
  }
}

json compatibility_to_json(const CompatibilityReport& r) {
  return {{"dim", r.dim},
          {"pool_size", r.pool_size},
          {"image_count", r.image_count},
          {"class_count", r.class_count},
          {"class_counts", r.class_counts}};
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

void write_json_file(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  require(static_cast<bool>(out), ErrorCode::IoError, "write failed: " + path.string());
}

}  // namespace attrsel
