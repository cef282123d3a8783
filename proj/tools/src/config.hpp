#pragma once

#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace distort::cli {

using nlohmann::json;

struct SchemaIssue {
  std::string pointer;  // JSON pointer into the document
  std::string message;
};

// Subset of draft-07: type, enum, const, properties, required,
// additionalProperties, items, minItems, maxItems, minimum, maximum,
// exclusiveMinimum, exclusiveMaximum, oneOf and local $ref.
class SchemaValidator {
 public:
  explicit SchemaValidator(json schema);
  std::vector<SchemaIssue> validate(const json& doc) const;
  const json& schema() const { return root_; }

 private:
  void check(const json& s, const json& v, const std::string& ptr, std::vector<SchemaIssue>& out) const;
  const json& resolve(const json& s) const;
  json root_;
};

const SchemaValidator& run_config_validator();
std::string_view run_config_schema_text();

// pointer -> (line, column) of the member key, or of the element for arrays
std::map<std::string, std::pair<int, int>> locate_pointers(std::string_view text);

// Parses and validates; ConfigError messages carry origin:line:col.
json parse_config(std::string_view text, const std::string& origin);
void validate_config(const json& doc, std::string_view text, const std::string& origin);

std::optional<std::string> preset_text(std::string_view command, std::string_view name);
std::vector<std::string> preset_names(std::string_view command);

// Pretty JSON with sorted keys and every double printed as %.17g.
std::string dump_report(const json& j);

}  // namespace distort::cli
