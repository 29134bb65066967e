#include "attrsel/embedding_io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "attrsel/error.hpp"
#include "attrsel/log.hpp"

namespace attrsel {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNormalizedTolerance = 1e-4;

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
}

ManifestKind parse_kind(const std::string& s) {
  if (s == "image_embeddings") return ManifestKind::ImageEmbeddings;
  if (s == "attribute_embeddings") return ManifestKind::AttributeEmbeddings;
  if (s == "score_matrix") return ManifestKind::ScoreMatrix;
  fail(ErrorCode::ParseError, "unknown manifest kind '" + s + "'");
}

bool rows_unit_norm(const Matrix& m, double tol) {
  for (std::size_t r = 0; r < m.rows(); ++r)
    if (std::abs(norm(m.row(r)) - 1.0) > tol) return false;
  return true;
}

void check_finite_rows(const Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r)
    require(all_finite(m.row(r)), ErrorCode::NonFinite, "row " + std::to_string(r));
}

Matrix normalize_loaded(const Matrix& raw, bool flagged, const fs::path& source) {
  if (flagged) {
    for (std::size_t r = 0; r < raw.rows(); ++r) {
      const double n = norm(raw.row(r));
      require(std::abs(n - 1.0) <= kNormalizedTolerance, ErrorCode::ParseError,
              source.string() + ": l2_normalized is set but row " + std::to_string(r) +
                  " has norm " + std::to_string(n));
    }
  } else {
    log_info("normalizing rows of " + source.string() + " on load");
  }
  // Renormalize in double either way so cosines reduce to exact dot products.
  return l2_normalize_rows(raw);
}

fs::path payload_path_for(const fs::path& manifest_path) {
  fs::path p = manifest_path;
  p.replace_extension(".f32");
  return p;
}

}  // namespace

std::size_t ImageSet::class_index(const std::string& name) const {
  for (std::size_t i = 0; i < class_names.size(); ++i)
    if (class_names[i] == name) return i;
  fail(ErrorCode::NotFound, "class '" + name + "'");
}

std::size_t AttributePool::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  fail(ErrorCode::NotFound, "attribute '" + name + "'");
}

const char* manifest_kind_name(ManifestKind kind) noexcept {
  switch (kind) {
    case ManifestKind::ImageEmbeddings: return "image_embeddings";
    case ManifestKind::AttributeEmbeddings: return "attribute_embeddings";
    case ManifestKind::ScoreMatrix: return "score_matrix";
  }
  return "unknown";
}

Manifest read_manifest(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot open " + manifest_path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, manifest_path.string() + ": " + e.what());
  }
  require(doc.is_object(), ErrorCode::ParseError, manifest_path.string() + ": not a JSON object");

  static const std::set<std::string> known = {"kind", "dim", "count", "l2_normalized", "data_file",
                                              "names", "labels", "class_names"};
  for (const auto& [key, value] : doc.items())
    require(known.count(key) != 0, ErrorCode::ParseError,
            manifest_path.string() + ": unexpected field '" + key + "'");

  Manifest m;
  try {
    m.kind = parse_kind(doc.at("kind").get<std::string>());
    m.dim = doc.at("dim").get<std::size_t>();
    m.count = doc.at("count").get<std::size_t>();
    m.l2_normalized = doc.value("l2_normalized", false);
    m.data_file = doc.at("data_file").get<std::string>();
    if (doc.contains("names")) m.names = doc["names"].get<std::vector<std::string>>();
    if (doc.contains("labels")) m.labels = doc["labels"].get<std::vector<int>>();
    if (doc.contains("class_names")) m.class_names = doc["class_names"].get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, manifest_path.string() + ": " + e.what());
  }

  // Score matrices name their columns; embedding manifests name their rows.
  if (m.names) {
    const std::size_t expected = m.kind == ManifestKind::ScoreMatrix ? m.dim : m.count;
    require(m.names->size() == expected, ErrorCode::ParseError, "names length does not match the manifest shape");
  }
  if (m.labels)
    require(m.labels->size() == m.count, ErrorCode::ParseError, "labels length != count");
  if (m.labels && m.class_names) {
    const auto& labels = *m.labels;
    for (std::size_t i = 0; i < labels.size(); ++i)
      require(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < m.class_names->size(),
              ErrorCode::LabelOutOfRange, "row " + std::to_string(i));
  }
  if (m.kind == ManifestKind::AttributeEmbeddings && m.names) {
    std::set<std::string> seen(m.names->begin(), m.names->end());
    require(seen.size() == m.names->size(), ErrorCode::ParseError, "attribute names are not unique");
  }
  return m;
}

void write_manifest(const Manifest& m, const fs::path& manifest_path) {
  json doc;
  doc["kind"] = manifest_kind_name(m.kind);
  doc["dim"] = m.dim;
  doc["count"] = m.count;
  doc["l2_normalized"] = m.l2_normalized;
  doc["data_file"] = m.data_file;
  if (m.names) doc["names"] = *m.names;
  if (m.labels) doc["labels"] = *m.labels;
  if (m.class_names) doc["class_names"] = *m.class_names;
  std::ofstream out(manifest_path);
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot write " + manifest_path.string());
  out << doc.dump(2) << '\n';
  require(static_cast<bool>(out), ErrorCode::IoError, "write failed: " + manifest_path.string());
}

Matrix read_payload(const fs::path& data_path, std::size_t count, std::size_t dim) {
  std::ifstream in(data_path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot open " + data_path.string());
  std::error_code ec;
  const auto actual = fs::file_size(data_path, ec);
  require(!ec, ErrorCode::IoError, "cannot stat " + data_path.string());
  const std::uintmax_t expected = static_cast<std::uintmax_t>(count) * dim * 4;
  require(actual == expected, ErrorCode::SizeMismatch,
          "expected " + std::to_string(expected) + " bytes, found " + std::to_string(actual));

  std::vector<unsigned char> bytes(static_cast<std::size_t>(expected));
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(in) || bytes.empty(), ErrorCode::IoError, "short read on " + data_path.string());

  Matrix m(count, dim);
  auto out = m.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t raw;
    std::memcpy(&raw, bytes.data() + 4 * i, 4);
    out[i] = static_cast<double>(std::bit_cast<float>(to_little_endian(raw)));
  }
  return m;
}

void write_payload(const Matrix& m, const fs::path& data_path) {
  std::vector<unsigned char> bytes(m.data().size() * 4);
  auto in = m.data();
  for (std::size_t i = 0; i < in.size(); ++i) {
    const std::uint32_t raw = to_little_endian(std::bit_cast<std::uint32_t>(static_cast<float>(in[i])));
    std::memcpy(bytes.data() + 4 * i, &raw, 4);
  }
  std::ofstream out(data_path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot write " + data_path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorCode::IoError, "write failed: " + data_path.string());
}

void check_image_set(const ImageSet& images) {
  require(images.labels.size() == images.count(), ErrorCode::ShapeMismatch, "labels length != image count");
  check_finite_rows(images.embeddings);
  for (std::size_t i = 0; i < images.labels.size(); ++i)
    require(images.labels[i] >= 0 && static_cast<std::size_t>(images.labels[i]) < images.class_count(),
            ErrorCode::LabelOutOfRange, "row " + std::to_string(i));
}

void check_attribute_pool(const AttributePool& pool) {
  require(pool.names.size() == pool.size(), ErrorCode::ShapeMismatch, "names length != pool size");
  check_finite_rows(pool.embeddings);
  std::set<std::string> seen(pool.names.begin(), pool.names.end());
  require(seen.size() == pool.names.size(), ErrorCode::InvalidArgument, "attribute names are not unique");
  for (std::size_t r = 0; r < pool.size(); ++r)
    require(norm(pool.embeddings.row(r)) >= 1e-30, ErrorCode::ZeroRow, "row " + std::to_string(r));
}

ImageSet load_image_set(const fs::path& manifest_path) {
  const Manifest m = read_manifest(manifest_path);
  require(m.kind == ManifestKind::ImageEmbeddings, ErrorCode::ParseError,
          manifest_path.string() + " is not an image_embeddings manifest");
  require(m.labels.has_value() && m.class_names.has_value(), ErrorCode::ParseError,
          manifest_path.string() + ": image manifests need labels and class_names");
  const Matrix raw = read_payload(manifest_path.parent_path() / m.data_file, m.count, m.dim);
  check_finite_rows(raw);
  ImageSet out;
  out.embeddings = normalize_loaded(raw, m.l2_normalized, manifest_path);
  out.labels = *m.labels;
  out.class_names = *m.class_names;
  check_image_set(out);
  return out;
}

AttributePool load_attribute_pool(const fs::path& manifest_path) {
  const Manifest m = read_manifest(manifest_path);
  require(m.kind == ManifestKind::AttributeEmbeddings, ErrorCode::ParseError,
          manifest_path.string() + " is not an attribute_embeddings manifest");
  require(m.names.has_value(), ErrorCode::ParseError, manifest_path.string() + ": attribute manifests need names");
  const Matrix raw = read_payload(manifest_path.parent_path() / m.data_file, m.count, m.dim);
  check_finite_rows(raw);
  AttributePool out;
  out.embeddings = normalize_loaded(raw, m.l2_normalized, manifest_path);
  out.names = *m.names;
  check_attribute_pool(out);
  return out;
}

std::variant<ImageSet, AttributePool> load(const fs::path& manifest_path) {
  const Manifest m = read_manifest(manifest_path);
  if (m.kind == ManifestKind::AttributeEmbeddings) return load_attribute_pool(manifest_path);
  return load_image_set(manifest_path);
}

Manifest save(const ImageSet& images, const fs::path& manifest_path) {
  require(images.count() > 0, ErrorCode::InvalidArgument, "cannot save an empty image set");
  check_image_set(images);
  const fs::path data_path = payload_path_for(manifest_path);
  write_payload(images.embeddings, data_path);
  Manifest m;
  m.kind = ManifestKind::ImageEmbeddings;
  m.dim = images.dim();
  m.count = images.count();
  m.l2_normalized = rows_unit_norm(images.embeddings, 1e-6);
  m.data_file = data_path.filename().string();
  m.labels = images.labels;
  m.class_names = images.class_names;
  write_manifest(m, manifest_path);
  return m;
}

Manifest save(const AttributePool& pool, const fs::path& manifest_path) {
  require(pool.size() > 0, ErrorCode::EmptyPool, "cannot save an empty attribute pool");
  check_attribute_pool(pool);
  const fs::path data_path = payload_path_for(manifest_path);
  write_payload(pool.embeddings, data_path);
  Manifest m;
  m.kind = ManifestKind::AttributeEmbeddings;
  m.dim = pool.dim();
  m.count = pool.size();
  m.l2_normalized = rows_unit_norm(pool.embeddings, 1e-6);
  m.data_file = data_path.filename().string();
  m.names = pool.names;
  write_manifest(m, manifest_path);
  return m;
}

CompatibilityReport validate(const ImageSet& images, const AttributePool& pool) {
  require(images.dim() == pool.dim(), ErrorCode::DimMismatch,
          "images D=" + std::to_string(images.dim()) + ", pool D=" + std::to_string(pool.dim()));
  CompatibilityReport r;
  r.dim = images.dim();
  r.pool_size = pool.size();
  r.image_count = images.count();
  r.class_count = images.class_count();
  r.class_counts.assign(r.class_count, 0);
  for (int label : images.labels) ++r.class_counts[static_cast<std::size_t>(label)];
  return r;
}

}  // namespace attrsel
