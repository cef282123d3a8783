#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "distort/error.hpp"

namespace distort::cli {

namespace {

constexpr std::string_view kSchema =
#include "run_config_schema.inc"
    ;

std::string type_of(const json& v) {
  if (v.is_null()) return "null";
  if (v.is_boolean()) return "boolean";
  if (v.is_number_integer()) return "integer";
  if (v.is_number()) return "number";
  if (v.is_string()) return "string";
  if (v.is_array()) return "array";
  return "object";
}

bool has_type(const json& v, const std::string& t) {
  if (t == "number") return v.is_number();
  if (t == "integer") return v.is_number_integer();
  return type_of(v) == t;
}

std::string escape_token(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') {
      out += "~0";
    } else if (c == '/') {
      out += "~1";
    } else {
      out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Lenient scanner over already-parsed JSON text.
class PointerScanner {
 public:
  explicit PointerScanner(std::string_view s) : s_(s) {}
  std::map<std::string, std::pair<int, int>> run() {
    skip_ws();
    out_[""] = {line_, col_};
    value("");
    return out_;
  }

 private:
  void advance() {
    if (pos_ < s_.size()) {
      if (s_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
      ++pos_;
    }
  }
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  void skip_ws() {
    while (pos_ < s_.size() && (peek() == ' ' || peek() == '\t' || peek() == '\n' || peek() == '\r')) advance();
  }
  std::string string() {
    std::string out;
    advance();  // opening quote
    while (pos_ < s_.size() && peek() != '"') {
      if (peek() == '\\') {
        advance();
        const char e = peek();
        out += e == 'n' ? '\n' : e == 't' ? '\t' : e;
        advance();
        continue;
      }
      out += peek();
      advance();
    }
    advance();
    return out;
  }
  void value(const std::string& ptr) {
    skip_ws();
    const char c = peek();
    if (c == '{') {
      advance();
      skip_ws();
      while (pos_ < s_.size() && peek() != '}') {
        skip_ws();
        const auto at = std::make_pair(line_, col_);
        const std::string key = string();
        const std::string child = ptr + "/" + escape_token(key);
        out_[child] = at;
        skip_ws();
        advance();  // colon
        value(child);
        skip_ws();
        if (peek() == ',') advance();
        skip_ws();
      }
      advance();
    } else if (c == '[') {
      advance();
      skip_ws();
      std::size_t k = 0;
      while (pos_ < s_.size() && peek() != ']') {
        skip_ws();
        const std::string child = ptr + "/" + std::to_string(k++);
        out_[child] = {line_, col_};
        value(child);
        skip_ws();
        if (peek() == ',') advance();
        skip_ws();
      }
      advance();
    } else if (c == '"') {
      string();
    } else {
      while (pos_ < s_.size() && std::string_view(",}] \t\r\n").find(peek()) == std::string_view::npos) advance();
    }
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  int line_ = 1, col_ = 1;
  std::map<std::string, std::pair<int, int>> out_;
};

std::string where(const std::map<std::string, std::pair<int, int>>& pos, const std::string& origin,
                  const std::string& ptr) {
  // fall back to the nearest ancestor that exists in the text
  std::string p = ptr;
  for (;;) {
    const auto it = pos.find(p);
    if (it != pos.end()) return origin + ":" + std::to_string(it->second.first) + ":" + std::to_string(it->second.second);
    if (p.empty()) return origin;
    p = p.substr(0, p.rfind('/'));
  }
}

void emit(std::ostream& os, const json& j, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ",\n";
        first = false;
        os << inner << json(it.key()).dump() << ": ";
        emit(os, it.value(), indent + 1);
      }
      os << "\n" << pad << "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      const bool flat = std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_primitive(); });
      if (flat) {
        os << "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) os << ", ";
          emit(os, j[i], indent + 1);
        }
        os << "]";
        return;
      }
      os << "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) os << ",\n";
        os << inner;
        emit(os, j[i], indent + 1);
      }
      os << "\n" << pad << "]";
      return;
    }
    case json::value_t::number_float: {
      const double v = j.get<double>();
      if (std::isfinite(v)) {
        os << num(v);
      } else {
        os << "null";
      }
      return;
    }
    default:
      os << j.dump();
  }
}

// Presets keyed by "command/name".
const std::map<std::string, std::string>& presets() {
  static const std::map<std::string, std::string> p{
      {"tree/two_period", R"({
  "schema_version": 1,
  "command": "tree",
  "tree": {
    "mode": "consistent",
    "model": {"kind": "symmetric", "periods": 2, "x0": 0, "dx": 1, "dt": 1, "up": 0.5},
    "distortion": {"family": "power", "gamma": 2},
    "payoff": [0, 1, 2],
    "compare_naive": true,
    "tower_check": true,
    "phi_tables": true
  }
})"},
      {"tree/identity", R"({
  "schema_version": 1,
  "command": "tree",
  "tree": {
    "mode": "consistent",
    "model": {"kind": "symmetric", "periods": 2, "x0": 0, "dx": 1, "dt": 1, "up": 0.5},
    "distortion": {"family": "identity"},
    "payoff": [0, 1, 2],
    "compare_naive": true,
    "tower_check": true,
    "phi_tables": true
  }
})"},
      {"tree/crossing", R"({
  "schema_version": 1,
  "command": "tree",
  "tree": {
    "mode": "crossing",
    "crossing": {
      "p1": 0.5, "p2": 0.5, "t1": 1, "t2": 2,
      "distortion1": {"family": "power", "gamma": 2},
      "distortion2": {"family": "power", "gamma": 2}
    }
  }
})"},
      {"tree/wang_lattice", R"({
  "schema_version": 1,
  "command": "tree",
  "tree": {
    "mode": "consistent",
    "model": {"kind": "lattice", "periods": 64, "diffusion": {"kind": "brownian", "T": 1}},
    "distortion": {"family": "wang", "alpha": 0.5},
    "payoff": {"kind": "smoothed_step", "center": 0, "width": 0.2},
    "compare_naive": true,
    "tower_check": true
  }
})"},
      {"dynamics/wang", R"({
  "schema_version": 1,
  "command": "dynamics",
  "dynamics": {
    "diffusion": {"kind": "brownian", "x0": 0, "T": 1},
    "distortion": {"family": "wang", "alpha": 0.5},
    "density": {"method": "closed_form"},
    "drift_grid": {"t": {"min": 0.1, "max": 1, "n": 19}, "x": {"min": -4, "max": 4, "n": 81}},
    "phi": {"s": 0.25, "t": 1, "x": 0},
    "pde": {"payoff": {"kind": "smoothed_step", "center": 0, "width": 0.2}, "s_min": 0.1, "csv_stride": 10},
    "monte_carlo": {"paths": 20000, "steps": 250, "probes": [[0.25, 0], [0.5, 0.3]]}
  }
})"},
      {"dynamics/identity", R"({
  "schema_version": 1,
  "command": "dynamics",
  "dynamics": {
    "diffusion": {"kind": "brownian", "x0": 0, "T": 1},
    "distortion": {"family": "identity"},
    "density": {"method": "closed_form"},
    "drift_grid": {"t": {"min": 0.1, "max": 1, "n": 10}, "x": {"min": -4, "max": 4, "n": 41}},
    "phi": {"s": 0.25, "t": 1, "x": 0}
  }
})"},
      {"dynamics/convergence", R"({
  "schema_version": 1,
  "command": "dynamics",
  "dynamics": {
    "diffusion": {"kind": "brownian", "x0": 0, "T": 1},
    "distortion": {"family": "wang", "alpha": 0.5},
    "convergence": {"N": [64, 256, 1024, 4096], "t": 0.5, "x": 0,
                    "payoff": {"kind": "smoothed_step", "center": 0, "width": 0.2}}
  }
})"},
      {"density/drift_half", R"({
  "schema_version": 1,
  "command": "density",
  "density": {
    "diffusion": {"kind": "constant", "drift": 0.5, "x0": 0, "T": 1},
    "t": [0.25, 1],
    "x": {"min": -3, "max": 3, "n": 13},
    "methods": ["closed_form", "fokker_planck", "bridge"],
    "bridge": {"paths": 100000, "steps": 64}
  }
})"},
  };
  return p;
}

const std::map<std::string, std::string>& aliases() {
  static const std::map<std::string, std::string> a{{"tree/symmetric_two_period", "tree/two_period"}};
  return a;
}

}  // namespace

SchemaValidator::SchemaValidator(json schema) : root_(std::move(schema)) {}

const json& SchemaValidator::resolve(const json& s) const {
  const json* cur = &s;
  for (int depth = 0; cur->is_object() && cur->contains("$ref"); ++depth) {
    const auto ref = cur->at("$ref").get<std::string>();
    if (depth > 32 || ref.empty() || ref[0] != '#') throw ConfigError("unsupported schema reference " + ref);
    cur = &root_.at(json::json_pointer(ref.substr(1)));
  }
  return *cur;
}

std::vector<SchemaIssue> SchemaValidator::validate(const json& doc) const {
  std::vector<SchemaIssue> out;
  check(root_, doc, "", out);
  return out;
}

void SchemaValidator::check(const json& schema, const json& v, const std::string& ptr,
                            std::vector<SchemaIssue>& out) const {
  const json& s = resolve(schema);
  if (s.contains("oneOf")) {
    // report the branch whose discriminator (const members) matched
    auto score = [](const std::vector<SchemaIssue>& e) {
      std::size_t n = e.size();
      for (const auto& i : e) n += i.message.rfind("must equal", 0) == 0 ? 100 : 0;
      return n;
    };
    std::vector<SchemaIssue> best;
    std::size_t matches = 0, best_score = 0;
    for (const auto& branch : s.at("oneOf")) {
      std::vector<SchemaIssue> e;
      check(branch, v, ptr, e);
      if (e.empty()) {
        ++matches;
      } else if (best.empty() || score(e) < best_score) {
        best_score = score(e);
        best = std::move(e);
      }
    }
    if (matches == 0) {
      out.insert(out.end(), best.begin(), best.end());
    } else if (matches > 1) {
      out.push_back({ptr, "value matches more than one alternative"});
    }
  }
  if (s.contains("type")) {
    const auto& t = s.at("type");
    bool ok = false;
    if (t.is_string()) {
      ok = has_type(v, t.get<std::string>());
    } else {
      for (const auto& e : t) ok = ok || has_type(v, e.get<std::string>());
    }
    if (!ok) {
      out.push_back({ptr, "expected " + (t.is_string() ? t.get<std::string>() : t.dump()) + ", got " + type_of(v)});
      return;
    }
  }
  if (s.contains("const") && v != s.at("const")) {
    out.push_back({ptr, "must equal " + s.at("const").dump()});
  }
  if (s.contains("enum")) {
    const auto& e = s.at("enum");
    if (std::find(e.begin(), e.end(), v) == e.end()) out.push_back({ptr, "must be one of " + e.dump()});
  }
  if (v.is_number()) {
    const double x = v.get<double>();
    if (s.contains("minimum") && x < s.at("minimum").get<double>()) {
      out.push_back({ptr, num(x) + " is below the minimum " + s.at("minimum").dump()});
    }
    if (s.contains("maximum") && x > s.at("maximum").get<double>()) {
      out.push_back({ptr, num(x) + " exceeds the maximum " + s.at("maximum").dump()});
    }
    if (s.contains("exclusiveMinimum") && x <= s.at("exclusiveMinimum").get<double>()) {
      out.push_back({ptr, num(x) + " must be greater than " + s.at("exclusiveMinimum").dump()});
    }
    if (s.contains("exclusiveMaximum") && x >= s.at("exclusiveMaximum").get<double>()) {
      out.push_back({ptr, num(x) + " must be less than " + s.at("exclusiveMaximum").dump()});
    }
  }
  if (v.is_array()) {
    if (s.contains("minItems") && v.size() < s.at("minItems").get<std::size_t>()) {
      out.push_back({ptr, "needs at least " + s.at("minItems").dump() + " items"});
    }
    if (s.contains("maxItems") && v.size() > s.at("maxItems").get<std::size_t>()) {
      out.push_back({ptr, "allows at most " + s.at("maxItems").dump() + " items"});
    }
    if (s.contains("items")) {
      for (std::size_t i = 0; i < v.size(); ++i) check(s.at("items"), v[i], ptr + "/" + std::to_string(i), out);
    }
  }
  if (v.is_object()) {
    if (s.contains("required")) {
      for (const auto& r : s.at("required")) {
        if (!v.contains(r.get<std::string>())) out.push_back({ptr, "missing required key \"" + r.get<std::string>() + "\""});
      }
    }
    const json* props = s.contains("properties") ? &s.at("properties") : nullptr;
    for (auto it = v.begin(); it != v.end(); ++it) {
      const std::string child = ptr + "/" + escape_token(it.key());
      if (props && props->contains(it.key())) {
        check(props->at(it.key()), it.value(), child, out);
      } else if (s.contains("additionalProperties")) {
        const auto& ap = s.at("additionalProperties");
        if (ap.is_boolean() && !ap.get<bool>()) {
          out.push_back({child, "unknown key \"" + it.key() + "\""});
        } else if (ap.is_object()) {
          check(ap, it.value(), child, out);
        }
      }
    }
  }
}

std::string_view run_config_schema_text() { return kSchema; }

const SchemaValidator& run_config_validator() {
  static const SchemaValidator v(json::parse(kSchema));
  return v;
}

std::map<std::string, std::pair<int, int>> locate_pointers(std::string_view text) { return PointerScanner(text).run(); }

json parse_config(std::string_view text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // byte offset -> line:col
    int line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string what = e.what();
    const auto cut = what.find("syntax error");
    throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": invalid JSON: " +
                      (cut == std::string::npos ? what : what.substr(cut)));
  }
  validate_config(doc, text, origin);
  return doc;
}

void validate_config(const json& doc, std::string_view text, const std::string& origin) {
  const auto issues = run_config_validator().validate(doc);
  if (issues.empty()) return;
  const auto pos = text.empty() ? std::map<std::string, std::pair<int, int>>{} : locate_pointers(text);
  std::ostringstream msg;
  msg << "configuration does not match the schema:";
  for (const auto& i : issues) {
    msg << "\n  " << where(pos, origin, i.pointer) << ": " << (i.pointer.empty() ? "/" : i.pointer) << ": " << i.message;
  }
  throw ConfigError(msg.str());
}

std::optional<std::string> preset_text(std::string_view command, std::string_view name) {
  std::string key = std::string(command) + "/" + std::string(name);
  if (const auto a = aliases().find(key); a != aliases().end()) key = a->second;
  const auto it = presets().find(key);
  if (it == presets().end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> preset_names(std::string_view command) {
  std::vector<std::string> out;
  const std::string prefix = std::string(command) + "/";
  for (const auto& [k, v] : presets()) {
    if (k.rfind(prefix, 0) == 0) out.push_back(k.substr(prefix.size()));
  }
  for (const auto& [k, v] : aliases()) {
    if (k.rfind(prefix, 0) == 0) out.push_back(k.substr(prefix.size()));
  }
  return out;
}

std::string dump_report(const json& j) {
  std::ostringstream os;
  emit(os, j, 0);
  os << "\n";
  return os.str();
}

}  // namespace distort::cli
