#include "attrsel/selection.hpp"

#include <set>

#include "attrsel/error.hpp"

namespace attrsel {

SelectionResult make_selection(std::string method, std::vector<std::size_t> indices, const AttributePool& pool,
                               std::uint64_t seed, nlohmann::json config) {
  SelectionResult out;
  out.method = std::move(method);
  out.seed = seed;
  out.config = std::move(config);
  for (std::size_t idx : indices) {
    require(idx < pool.size(), ErrorCode::BadIndex, "pool index " + std::to_string(idx));
    out.names.push_back(pool.names[idx]);
  }
  out.indices = std::move(indices);
  return out;
}

void check_selection(const SelectionResult& selection, const AttributePool& pool) {
  require(selection.indices.size() == selection.names.size(), ErrorCode::InvalidArgument,
          "selection indices and names differ in length");
  std::set<std::size_t> seen;
  for (std::size_t j = 0; j < selection.indices.size(); ++j) {
    const std::size_t idx = selection.indices[j];
    require(idx < pool.size(), ErrorCode::BadIndex, "selected index " + std::to_string(idx) + " outside pool");
    require(seen.insert(idx).second, ErrorCode::InvalidArgument, "duplicate selected index " + std::to_string(idx));
    require(pool.names[idx] == selection.names[j], ErrorCode::InvalidArgument,
            "selection names '" + selection.names[j] + "' but pool row " + std::to_string(idx) + " is '" +
                pool.names[idx] + "'");
  }
  if (selection.head) {
    require(selection.head->w.cols() == selection.indices.size(), ErrorCode::ShapeMismatch,
            "head width does not match selection size");
    require(selection.head->b.size() == selection.head->w.rows(), ErrorCode::ShapeMismatch,
            "head bias does not match head rows");
  }
}

}  // namespace attrsel
