#include <doctest.h>

#include <string>
#include <vector>

#include "attrsel/error.hpp"
#include "attrsel/prompts.hpp"

using namespace attrsel;

namespace {

const std::vector<std::string> kLemur{"four-limbed primate",
                                      "black, grey, white, brown, or red-brown",
                                      "wet and hairless nose with curved nostrils",
                                      "long tail",
                                      "large eyes",
                                      "furry bodies",
                                      "clawed hands and feet"};

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST_CASE("instance prompt") {
  const std::string p = render_instance("lemur");
  CHECK(contains(p, "What are useful visual features to distinguish a lemur in a photo?"));
  CHECK(contains(p, "- four-limbed primate"));
  CHECK(contains(p, "distinguish lemur in a photo?\n"));
  CHECK(contains(render_instance("cardinal", std::string("birds")), "from other birds in a photo"));
  CHECK_FALSE(contains(render_instance("cardinal"), "from other"));
  for (const std::string& name : {std::string(""), std::string("  ")}) {
    try {
      render_instance(name);
      FAIL("expected EmptyName");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyName);
    }
  }
  CHECK_THROWS_AS(render_instance("cardinal", std::string("")), Error);
  CHECK_FALSE(contains(render_instance("x", std::string("y")), "{"));
}

TEST_CASE("batch prompt") {
  const std::vector<std::string> mammals{"beaver", "dolphin", "otter", "seal", "whale"};
  const std::string p = render_batch("aquatic mammals", mammals);
  CHECK(contains(p, "Here are five kinds of aquatic mammals: {beaver, dolphin, otter, seal, whale}."));

  const std::vector<std::string> two{"a", "b"};
  CHECK(contains(render_batch("objects", two), "Here are two kinds of objects: {a, b}."));

  const std::vector<std::string> one{"a"};
  try {
    render_batch("objects", one);
    FAIL("expected TooFewClasses");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooFewClasses);
  }
  CHECK(count_in_words(20) == "twenty");
  CHECK(count_in_words(21) == "21");
}

TEST_CASE("parsing responses") {
  const ParsedAttributes demo = parse_attributes(render_instance("lemur"));
  CHECK(demo.attributes == kLemur);
  CHECK_FALSE(demo.empty_warning);

  const ParsedAttributes none = parse_attributes("no bullets here\njust prose\n");
  CHECK(none.attributes.empty());
  CHECK(none.empty_warning);

  CHECK(parse_attributes("- x\n  -   y  \n- x\n-\n- \nz\n").attributes == std::vector<std::string>{"x", "y"});
  CHECK(parse_attributes("- X\n- x\n").attributes.size() == 2);
}

TEST_CASE("bullets round trip and parsing is idempotent") {
  CHECK(parse_attributes(render_bullets(kLemur)).attributes == kLemur);
  const auto once = parse_attributes("- b\n- a\n- b\ntext\n").attributes;
  CHECK(parse_attributes(render_bullets(once)).attributes == once);
  CHECK(join_attribute_lines(once) == "b\na\n");
}
