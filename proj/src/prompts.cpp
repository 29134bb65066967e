#include "attrsel/prompts.hpp"

#include <set>
#include <sstream>

#include "attrsel/error.hpp"

namespace attrsel {
namespace {

constexpr const char* kDemonstration =
    "Q: What are useful visual features to distinguish a lemur in a photo?\n"
    "A: There are several useful visual features to tell there is a lemur in a photo:\n"
    "- four-limbed primate\n"
    "- black, grey, white, brown, or red-brown\n"
    "- wet and hairless nose with curved nostrils\n"
    "- long tail\n"
    "- large eyes\n"
    "- furry bodies\n"
    "- clawed hands and feet\n";

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::string count_in_words(std::size_t n) {
  static const char* words[] = {"zero",    "one",     "two",       "three",    "four",     "five",    "six",
                                "seven",   "eight",   "nine",      "ten",      "eleven",   "twelve",  "thirteen",
                                "fourteen", "fifteen", "sixteen",  "seventeen", "eighteen", "nineteen", "twenty"};
  if (n <= 20) return words[n];
  return std::to_string(n);
}

std::string render_instance(const std::string& class_name, const std::optional<std::string>& domain_name) {
  require(!trim(class_name).empty(), ErrorCode::EmptyName, "class name is empty");
  std::string target = class_name;
  if (domain_name) {
    require(!trim(*domain_name).empty(), ErrorCode::EmptyName, "domain name is empty");
    target += " from other " + *domain_name;
  }
  std::string out = kDemonstration;
  out += "Q: What are useful visual features to distinguish " + target + " in a photo?\n";
  out += "A: There are several useful visual features to distinguish " + target + " in a photo:\n";
  return out;
}

std::string render_batch(const std::string& group_name, std::span<const std::string> class_names) {
  require(class_names.size() >= 2, ErrorCode::TooFewClasses,
          "batch prompt needs at least 2 classes, got " + std::to_string(class_names.size()));
  require(!trim(group_name).empty(), ErrorCode::EmptyName, "group name is empty");
  std::string list;
  for (std::size_t i = 0; i < class_names.size(); ++i) {
    require(!trim(class_names[i]).empty(), ErrorCode::EmptyName, "class name " + std::to_string(i) + " is empty");
    if (i) list += ", ";
    list += class_names[i];
  }
  return "Q: Here are " + count_in_words(class_names.size()) + " kinds of " + group_name + ": {" + list +
         "}. What are the useful visual features to distinguish them in a photo? "
         "Please list every attribute in bullet points.\n";
}

ParsedAttributes parse_attributes(const std::string& response_text) {
  ParsedAttributes out;
  std::set<std::string> seen;
  std::istringstream in(response_text);
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t.front() != '-') continue;
    const std::string item = trim(t.substr(1));
    if (item.empty()) continue;
    if (seen.insert(item).second) out.attributes.push_back(item);
  }
  out.empty_warning = out.attributes.empty();
  return out;
}

std::string join_attribute_lines(std::span<const std::string> attributes) {
  std::string out;
  for (const auto& a : attributes) out += a + "\n";
  return out;
}

std::string render_bullets(std::span<const std::string> attributes) {
  std::string out;
  for (const auto& a : attributes) out += "- " + a + "\n";
  return out;
}

}  // namespace attrsel
