#include "attrsel/projection.hpp"

#include <algorithm>
#include <numeric>

#include "attrsel/error.hpp"

namespace attrsel {

ScoreMatrix semantic_project(const Matrix& images, const Matrix& attributes,
                             std::vector<std::string> attribute_names) {
  require(images.cols() == attributes.cols(), ErrorCode::DimMismatch,
          "images D=" + std::to_string(images.cols()) + ", attributes D=" + std::to_string(attributes.cols()));
  require(attribute_names.size() == attributes.rows(), ErrorCode::ShapeMismatch,
          "attribute names length != attribute count");
  const Matrix v = l2_normalize_rows(images);
  const Matrix t = l2_normalize_rows(attributes);
  ScoreMatrix out{matmul_transposed(v, t), std::move(attribute_names)};
  for (double& x : out.scores.data()) x = std::clamp(x, -1.0, 1.0);
  return out;
}

ScoreMatrix semantic_project(const ImageSet& images, const AttributePool& pool) {
  return semantic_project(images.embeddings, pool.embeddings, pool.names);
}

ScoreMatrix semantic_project(const ImageSet& images, const AttributePool& pool,
                             std::span<const std::size_t> indices) {
  std::vector<std::string> names;
  names.reserve(indices.size());
  for (std::size_t idx : indices) {
    require(idx < pool.size(), ErrorCode::BadIndex, "pool index " + std::to_string(idx));
    names.push_back(pool.names[idx]);
  }
  return semantic_project(images.embeddings, select_rows(pool.embeddings, indices), std::move(names));
}

ScoreMatrix binarize_top_k(const ScoreMatrix& s, std::size_t k) {
  const std::size_t cols = s.attribute_count();
  require(k >= 1 && k <= cols, ErrorCode::BadK,
          "k=" + std::to_string(k) + " outside [1, " + std::to_string(cols) + "]");
  ScoreMatrix out{Matrix(s.image_count(), cols), s.attribute_names};
  std::vector<std::size_t> order(cols);
  for (std::size_t r = 0; r < s.image_count(); ++r) {
    auto row = s.scores.row(r);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
    for (std::size_t j = 0; j < k; ++j) out.scores(r, order[j]) = 1.0;
  }
  return out;
}

ScoreMatrix select_columns(const ScoreMatrix& s, std::span<const std::size_t> indices) {
  std::vector<std::string> names;
  names.reserve(indices.size());
  for (std::size_t idx : indices) {
    require(idx < s.attribute_count(), ErrorCode::BadIndex, "column " + std::to_string(idx));
    names.push_back(s.attribute_names[idx]);
  }
  return {select_cols(s.scores, indices), std::move(names)};
}

void save_score_matrix(const ScoreMatrix& s, const std::filesystem::path& manifest_path) {
  std::filesystem::path data_path = manifest_path;
  data_path.replace_extension(".f32");
  write_payload(s.scores, data_path);
  Manifest m;
  m.kind = ManifestKind::ScoreMatrix;
  m.dim = s.attribute_count();
  m.count = s.image_count();
  m.l2_normalized = false;
  m.data_file = data_path.filename().string();
  m.names = s.attribute_names;
  write_manifest(m, manifest_path);
}

}  // namespace attrsel
