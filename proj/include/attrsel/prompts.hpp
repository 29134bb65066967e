#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace attrsel {

// Few-shot instance prompt (lemur demonstration, then the query for
// class_name). With a domain the query reads "... from other <domain> ...".
// Throws EmptyName.
std::string render_instance(const std::string& class_name, const std::optional<std::string>& domain_name = std::nullopt);

// Group prompt over two or more classes. The count is spelled out in words
// ("five") up to twenty. Throws TooFewClasses.
std::string render_batch(const std::string& group_name, std::span<const std::string> class_names);

struct ParsedAttributes {
  std::vector<std::string> attributes;
  bool empty_warning = false;
};

// Bullet lines ("- ...") after trimming; bullet and surrounding whitespace
// removed, empty entries dropped, exact duplicates removed (first kept).
ParsedAttributes parse_attributes(const std::string& response_text);

// Newline-delimited attribute list, one per line.
std::string join_attribute_lines(std::span<const std::string> attributes);

// "- <attribute>" per line, the shape parse_attributes reads.
std::string render_bullets(std::span<const std::string> attributes);

// Spelled-out count for 0..20, digits beyond.
std::string count_in_words(std::size_t n);

}  // namespace attrsel
