#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "attrsel/embedding_io.hpp"
#include "attrsel/tensor.hpp"

namespace attrsel {

// Linear classification head: logits = scores * w^T + b.
struct Head {
  Matrix w;  // K_C x K
  Vector b;  // K_C
};

// Chosen attribute indices with the method, seed and config that produced them.
struct SelectionResult {
  std::string method;
  std::vector<std::size_t> indices;
  std::vector<std::string> names;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json metrics = nlohmann::json::object();
  // Stage-one head of the learned method; column j belongs to indices[j].
  std::optional<Head> head;

  std::size_t k() const noexcept { return indices.size(); }
};

SelectionResult make_selection(std::string method, std::vector<std::size_t> indices, const AttributePool& pool,
                               std::uint64_t seed, nlohmann::json config = nlohmann::json::object());

// Distinct, in range, names consistent with the pool. Throws BadIndex / InvalidArgument.
void check_selection(const SelectionResult& selection, const AttributePool& pool);

}  // namespace attrsel
