#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "attrsel/embedding_io.hpp"
#include "attrsel/tensor.hpp"

namespace attrsel {

// Image-by-attribute cosine scores.
struct ScoreMatrix {
  Matrix scores;
  std::vector<std::string> attribute_names;

  std::size_t image_count() const noexcept { return scores.rows(); }
  std::size_t attribute_count() const noexcept { return scores.cols(); }
};

// scores(i, j) = cos(image_i, attribute_j). No temperature is applied.
ScoreMatrix semantic_project(const Matrix& images, const Matrix& attributes,
                             std::vector<std::string> attribute_names);
ScoreMatrix semantic_project(const ImageSet& images, const AttributePool& pool);
// Projection onto the pool rows listed in `indices`, in that order.
ScoreMatrix semantic_project(const ImageSet& images, const AttributePool& pool,
                             std::span<const std::size_t> indices);

// Top-k entries of each row become 1, the rest 0; ties go to the lower column.
ScoreMatrix binarize_top_k(const ScoreMatrix& s, std::size_t k);

ScoreMatrix select_columns(const ScoreMatrix& s, std::span<const std::size_t> indices);

// Exports as a "score_matrix" manifest (names = attribute names).
void save_score_matrix(const ScoreMatrix& s, const std::filesystem::path& manifest_path);

}  // namespace attrsel
