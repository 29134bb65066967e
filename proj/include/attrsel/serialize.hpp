#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "attrsel/embedding_io.hpp"
#include "attrsel/interpret.hpp"
#include "attrsel/optim.hpp"
#include "attrsel/probe.hpp"
#include "attrsel/selection.hpp"

namespace attrsel {

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

nlohmann::json head_to_json(const Head& head);
// Accepts a bare head {"weights", "bias"} or any object carrying one under "head".
Head head_from_json(const nlohmann::json& j);

nlohmann::json report_to_json(const TrainReport& report);

// {method, k, indices, names, seed, config, metrics[, head]}
nlohmann::json selection_to_json(const SelectionResult& s);
SelectionResult selection_from_json(const nlohmann::json& j);

// {weights, bias, selection, metrics, config, seed}
nlohmann::json probe_to_json(const ProbeModel& p);
ProbeModel probe_from_json(const nlohmann::json& j);

nlohmann::json compatibility_to_json(const CompatibilityReport& r);

nlohmann::json read_json_file(const std::filesystem::path& path);
// Pretty-printed (2-space indent) with a trailing newline.
void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);

}  // namespace attrsel
