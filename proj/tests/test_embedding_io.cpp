#include <doctest.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "attrsel/embedding_io.hpp"
#include "attrsel/error.hpp"
#include "attrsel/synthetic.hpp"
#include "support.hpp"

using namespace attrsel;
using nlohmann::json;

namespace {

void write_bytes(const std::filesystem::path& p, const std::vector<float>& values) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * 4));
}

void write_doc(const std::filesystem::path& p, const json& doc) { std::ofstream(p) << doc.dump(); }

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("identity payload loads as a 2x2 identity image set") {
  testing::TempDir dir;
  write_bytes(dir / "x.f32", {1, 0, 0, 1});
  write_doc(dir / "x.json", {{"kind", "image_embeddings"}, {"dim", 2}, {"count", 2}, {"l2_normalized", true},
                             {"data_file", "x.f32"}, {"labels", {0, 1}}, {"class_names", {"a", "b"}}});
  const ImageSet s = load_image_set(dir / "x.json");
  CHECK(s.embeddings == Matrix::identity(2));
  CHECK(s.labels == std::vector<int>{0, 1});
  CHECK(s.class_count() == 2);
  CHECK(s.class_index("b") == 1);
  CHECK(code_of([&] { s.class_index("zzz"); }) == ErrorCode::NotFound);
}

TEST_CASE("truncated payload is a SizeMismatch") {
  testing::TempDir dir;
  write_bytes(dir / "x.f32", {1, 0, 0});
  write_doc(dir / "x.json", {{"kind", "image_embeddings"}, {"dim", 2}, {"count", 2}, {"l2_normalized", true},
                             {"data_file", "x.f32"}, {"labels", {0, 1}}, {"class_names", {"a", "b"}}});
  CHECK(code_of([&] { load_image_set(dir / "x.json"); }) == ErrorCode::SizeMismatch);
}

TEST_CASE("manifest validation errors") {
  testing::TempDir dir;
  write_bytes(dir / "x.f32", {1, 0, 0, 1});
  json base = {{"kind", "image_embeddings"}, {"dim", 2}, {"count", 2}, {"l2_normalized", true},
               {"data_file", "x.f32"}, {"labels", {0, 1}}, {"class_names", {"a", "b"}}};

  json bad_label = base;
  bad_label["labels"] = {0, 2};
  write_doc(dir / "m.json", bad_label);
  CHECK(code_of([&] { load_image_set(dir / "m.json"); }) == ErrorCode::LabelOutOfRange);

  json extra = base;
  extra["note"] = "hi";
  write_doc(dir / "m.json", extra);
  CHECK(code_of([&] { load_image_set(dir / "m.json"); }) == ErrorCode::ParseError);

  std::ofstream(dir / "m.json") << "{not json";
  CHECK(code_of([&] { load_image_set(dir / "m.json"); }) == ErrorCode::ParseError);

  CHECK(code_of([&] { load_image_set(dir / "missing.json"); }) == ErrorCode::IoError);

  write_bytes(dir / "n.f32", {1, 0, std::nanf(""), 1});
  json nan = base;
  nan["data_file"] = "n.f32";
  write_doc(dir / "m.json", nan);
  CHECK(code_of([&] { load_image_set(dir / "m.json"); }) == ErrorCode::NonFinite);

  // Flag set but rows are far from unit norm.
  write_bytes(dir / "s.f32", {2, 0, 0, 1});
  json scaled = base;
  scaled["data_file"] = "s.f32";
  write_doc(dir / "m.json", scaled);
  CHECK(code_of([&] { load_image_set(dir / "m.json"); }) == ErrorCode::ParseError);

  json dup = {{"kind", "attribute_embeddings"}, {"dim", 2}, {"count", 2}, {"l2_normalized", true},
              {"data_file", "x.f32"}, {"names", {"a", "a"}}};
  write_doc(dir / "m.json", dup);
  CHECK(code_of([&] { load_attribute_pool(dir / "m.json"); }) == ErrorCode::ParseError);
}

TEST_CASE("rows are normalized on load when the flag is absent") {
  testing::TempDir dir;
  write_bytes(dir / "p.f32", {3, 4, 0, 2});
  write_doc(dir / "p.json", {{"kind", "attribute_embeddings"}, {"dim", 2}, {"count", 2},
                             {"data_file", "p.f32"}, {"names", {"u", "v"}}});
  const AttributePool p = load_attribute_pool(dir / "p.json");
  CHECK(p.embeddings(0, 0) == doctest::Approx(0.6));
  CHECK(p.embeddings(0, 1) == doctest::Approx(0.8));
  CHECK(p.embeddings(1, 1) == 1.0);
  CHECK(p.index_of("v") == 1);
  CHECK(std::holds_alternative<AttributePool>(load(dir / "p.json")));
}

TEST_CASE("save writes little-endian float32 bytes") {
  testing::TempDir dir;
  AttributePool p;
  p.embeddings = Matrix{{1.0}};
  p.names = {"one"};
  save(p, dir / "one.json");
  std::ifstream in(dir / "one.f32", std::ios::binary);
  unsigned char b[8] = {};
  in.read(reinterpret_cast<char*>(b), 8);
  CHECK(in.gcount() == 4);
  CHECK(b[0] == 0x00);
  CHECK(b[1] == 0x00);
  CHECK(b[2] == 0x80);
  CHECK(b[3] == 0x3F);
  const Manifest m = read_manifest(dir / "one.json");
  CHECK(m.kind == ManifestKind::AttributeEmbeddings);
  CHECK(m.data_file == "one.f32");
  CHECK(m.l2_normalized);
}

TEST_CASE("saving an empty pool is an EmptyPool error") {
  testing::TempDir dir;
  AttributePool p;
  CHECK(code_of([&] { save(p, dir / "e.json"); }) == ErrorCode::EmptyPool);
}

TEST_CASE("pool round trip stays within one float32 rounding step") {
  testing::TempDir dir;
  Rng rng(5);
  AttributePool p;
  p.embeddings = l2_normalize_rows(testing::random_matrix(5, 7, rng));
  for (int i = 0; i < 5; ++i) p.names.push_back("attr_" + std::to_string(i));
  save(p, dir / "pool.json");
  const AttributePool q = load_attribute_pool(dir / "pool.json");
  CHECK(q.names == p.names);
  for (std::size_t i = 0; i < p.embeddings.data().size(); ++i) {
    const double a = p.embeddings.data()[i];
    const double b = q.embeddings.data()[i];
    // float32 rounding plus double renormalization
    CHECK(std::abs(a - b) <= 2.0 * std::abs(a) * 0x1.0p-24 + 1e-7);
  }
}

TEST_CASE("image set round trip") {
  testing::TempDir dir;
  Rng rng(9);
  ImageSet s;
  s.embeddings = l2_normalize_rows(testing::random_matrix(6, 4, rng));
  s.labels = {0, 1, 2, 0, 1, 2};
  s.class_names = {"x", "y", "z"};
  save(s, dir / "img.json");
  const ImageSet t = load_image_set(dir / "img.json");
  CHECK(t.labels == s.labels);
  CHECK(t.class_names == s.class_names);
  CHECK(testing::max_abs_diff(t.embeddings.data(), s.embeddings.data()) < 1e-6);
}

TEST_CASE("validate reports shapes and rejects mismatched dims") {
  PlantedTaskConfig cfg;
  const PlantedTask t = gen_planted_task(cfg);
  const CompatibilityReport r = validate(t.train, t.pool);
  CHECK(r.pool_size == 200);
  CHECK(r.class_count == 10);
  CHECK(r.dim == 32);
  CHECK(r.image_count == 500);
  CHECK(r.class_counts == std::vector<std::size_t>(10, 50));

  ImageSet wide;
  wide.embeddings = Matrix(2, 512, 0.0);
  wide.embeddings(0, 0) = 1.0;
  wide.embeddings(1, 1) = 1.0;
  wide.labels = {0, 1};
  wide.class_names = {"a", "b"};
  AttributePool p512 = gen_random_pool(3, 512, 0, false);
  CHECK_NOTHROW(validate(wide, p512));
  AttributePool p768 = gen_random_pool(3, 768, 0, false);
  CHECK(code_of([&] { validate(wide, p768); }) == ErrorCode::DimMismatch);
}
