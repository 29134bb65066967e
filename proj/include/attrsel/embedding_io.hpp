#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "attrsel/tensor.hpp"

namespace attrsel {

// Image embeddings with integer class labels.
struct ImageSet {
  Matrix embeddings;
  std::vector<int> labels;
  std::vector<std::string> class_names;

  std::size_t count() const noexcept { return embeddings.rows(); }
  std::size_t dim() const noexcept { return embeddings.cols(); }
  std::size_t class_count() const noexcept { return class_names.size(); }

  // Throws NotFound.
  std::size_t class_index(const std::string& name) const;
};

// Attribute text embeddings, one row per named attribute.
struct AttributePool {
  Matrix embeddings;
  std::vector<std::string> names;

  std::size_t size() const noexcept { return embeddings.rows(); }
  std::size_t dim() const noexcept { return embeddings.cols(); }

  // Throws NotFound.
  std::size_t index_of(const std::string& name) const;
};

enum class ManifestKind { ImageEmbeddings, AttributeEmbeddings, ScoreMatrix };

const char* manifest_kind_name(ManifestKind kind) noexcept;

struct Manifest {
  ManifestKind kind = ManifestKind::ImageEmbeddings;
  std::size_t dim = 0;
  std::size_t count = 0;
  bool l2_normalized = false;
  std::string data_file;
  std::optional<std::vector<std::string>> names;
  std::optional<std::vector<int>> labels;
  std::optional<std::vector<std::string>> class_names;
};

Manifest read_manifest(const std::filesystem::path& manifest_path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& manifest_path);

// Raw row-major little-endian float32 payload, no header.
Matrix read_payload(const std::filesystem::path& data_path, std::size_t count, std::size_t dim);
void write_payload(const Matrix& m, const std::filesystem::path& data_path);

// Loads and validates; rows come back unit-norm in double precision.
ImageSet load_image_set(const std::filesystem::path& manifest_path);
AttributePool load_attribute_pool(const std::filesystem::path& manifest_path);
std::variant<ImageSet, AttributePool> load(const std::filesystem::path& manifest_path);

// Payload goes next to the manifest as <stem>.f32.
Manifest save(const ImageSet& images, const std::filesystem::path& manifest_path);
Manifest save(const AttributePool& pool, const std::filesystem::path& manifest_path);

struct CompatibilityReport {
  std::size_t dim = 0;
  std::size_t pool_size = 0;    // N
  std::size_t image_count = 0;  // M
  std::size_t class_count = 0;  // K_C
  std::vector<std::size_t> class_counts;
};

// Throws DimMismatch.
CompatibilityReport validate(const ImageSet& images, const AttributePool& pool);

// Invariant checks shared by loaders and in-memory producers.
void check_image_set(const ImageSet& images);
void check_attribute_pool(const AttributePool& pool);

}  // namespace attrsel
