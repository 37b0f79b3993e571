#include "funrl/callspec.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>
#include <system_error>

namespace funrl::callspec {

std::string_view to_string(TypeTag tag) {
  switch (tag) {
    case TypeTag::String: return "string";
    case TypeTag::Integer: return "integer";
    case TypeTag::Float: return "float";
    case TypeTag::Boolean: return "boolean";
    case TypeTag::Object: return "object";
    case TypeTag::Array: return "array";
    case TypeTag::Enum: return "enum";
  }
  return "unknown";
}

std::string_view to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::UnexpectedToken: return "unexpected token";
    case ParseErrorKind::UnexpectedEnd: return "unexpected end of input";
    case ParseErrorKind::UnterminatedString: return "unterminated string";
    case ParseErrorKind::InvalidEscape: return "invalid escape sequence";
    case ParseErrorKind::InvalidNumber: return "invalid number";
    case ParseErrorKind::TrailingGarbage: return "trailing garbage";
    case ParseErrorKind::EmptyCallList: return "empty bracket pair";
    case ParseErrorKind::PositionalArgument: return "positional argument";
    case ParseErrorKind::DuplicateKey: return "duplicate key";
    case ParseErrorKind::NestingTooDeep: return "nesting too deep";
  }
  return "unknown";
}

std::string_view to_string(ValidationErrorKind kind) {
  switch (kind) {
    case ValidationErrorKind::UnknownFunction: return "UnknownFunction";
    case ValidationErrorKind::MissingRequired: return "MissingRequired";
    case ValidationErrorKind::UnknownParam: return "UnknownParam";
    case ValidationErrorKind::TypeMismatch: return "TypeMismatch";
    case ValidationErrorKind::EnumViolation: return "EnumViolation";
  }
  return "unknown";
}

std::string ValidationError::describe() const {
  std::string out(to_string(kind));
  if (!param.empty()) out += "(" + param;
  if (kind == ValidationErrorKind::TypeMismatch) out += ", expected " + expected + ", got " + got;
  if (kind == ValidationErrorKind::EnumViolation) out += ", got " + got;
  if (!param.empty()) out += ")";
  return out;
}

const ParamSpec* ToolSchema::find_param(std::string_view param) const {
  for (const auto& p : params)
    if (p.name == param) return &p;
  return nullptr;
}

bool is_identifier(std::string_view text) {
  if (text.empty()) return false;
  auto head = static_cast<unsigned char>(text.front());
  if (!(std::isalpha(head) || head == '_')) return false;
  return std::all_of(text.begin() + 1, text.end(), [](char c) {
    auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || u == '_';
  });
}

void check_tool_set(const std::vector<ToolSchema>& tools) {
  std::set<std::string, std::less<>> names;
  for (const auto& tool : tools) {
    if (!is_identifier(tool.name)) throw SchemaError("tool name is not an identifier: '" + tool.name + "'");
    if (!names.insert(tool.name).second) throw SchemaError("duplicate tool name: " + tool.name);
    std::set<std::string, std::less<>> params;
    for (const auto& p : tool.params) {
      if (!is_identifier(p.name))
        throw SchemaError("parameter name is not an identifier: '" + p.name + "' in " + tool.name);
      if (!params.insert(p.name).second) throw SchemaError("duplicate parameter " + p.name + " in " + tool.name);
      if ((p.type == TypeTag::Enum) == p.enum_values.empty())
        throw SchemaError("parameter " + p.name + " in " + tool.name +
                          (p.type == TypeTag::Enum ? ": enum without values" : ": values on a non-enum type"));
    }
  }
}

TypeTag Value::tag() const {
  switch (data.index()) {
    case 0: return TypeTag::String;
    case 1: return TypeTag::Integer;
    case 2: return TypeTag::Float;
    case 3: return TypeTag::Boolean;
    case 4: return TypeTag::Array;
    default: return TypeTag::Object;
  }
}

namespace {

bool same_mapping(const std::vector<std::pair<std::string, Value>>& a,
                  const std::vector<std::pair<std::string, Value>>& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [key, value] : a) {
    auto it = std::find_if(b.begin(), b.end(), [&](const auto& kv) { return kv.first == key; });
    if (it == b.end() || !(it->second == value)) return false;
  }
  return true;
}

bool same_sequence(const std::vector<std::pair<std::string, Value>>& a,
                   const std::vector<std::pair<std::string, Value>>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].first != b[i].first || !(a[i].second == b[i].second)) return false;
  return true;
}

}  // namespace

bool operator==(const Value& a, const Value& b) {
  if (a.data.index() != b.data.index()) return false;
  switch (a.data.index()) {
    case 0: return a.as<std::string>() == b.as<std::string>();
    case 1: return a.as<std::int64_t>() == b.as<std::int64_t>();
    case 2: return std::bit_cast<std::uint64_t>(a.as<double>()) == std::bit_cast<std::uint64_t>(b.as<double>());
    case 3: return a.as<bool>() == b.as<bool>();
    case 4: return a.as<Array>() == b.as<Array>();
    default: return same_mapping(a.as<Object>(), b.as<Object>());
  }
}

const Value* FunctionCall::find_arg(std::string_view arg) const {
  for (const auto& [key, value] : args)
    if (key == arg) return &value;
  return nullptr;
}

bool operator==(const FunctionCall& a, const FunctionCall& b) {
  return a.name == b.name && same_mapping(a.args, b.args);
}

bool identical(const CallList& a, const CallList& b) {
  if (a.calls.size() != b.calls.size()) return false;
  for (std::size_t i = 0; i < a.calls.size(); ++i)
    if (a.calls[i].name != b.calls[i].name || !same_sequence(a.calls[i].args, b.calls[i].args)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

constexpr int kMaxDepth = 128;

struct Failure {
  ParseError error;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  CallList call_list() {
    skip_ws();
    expect('[');
    skip_ws();
    if (peek() == ']') fail(ParseErrorKind::EmptyCallList, "a call list needs at least one call");
    CallList out;
    while (true) {
      out.calls.push_back(call());
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      expect(']');
      break;
    }
    finish();
    return out;
  }

  Value whole_value() {
    skip_ws();
    Value v = value(0);
    finish();
    return v;
  }

 private:
  [[noreturn]] void fail(ParseErrorKind kind, std::string reason) { fail_at(pos_, kind, std::move(reason)); }
  [[noreturn]] void fail_at(std::size_t at, ParseErrorKind kind, std::string reason) {
    throw Failure{ParseError{at, kind, std::move(reason)}};
  }

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return at_end() ? '\0' : text_[pos_]; }

  void skip_ws() {
    while (!at_end() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' || text_[pos_] == '\r'))
      ++pos_;
  }

  void expect(char c) {
    if (at_end()) fail(ParseErrorKind::UnexpectedEnd, std::string("expected '") + c + "'");
    if (text_[pos_] != c) fail(ParseErrorKind::UnexpectedToken, std::string("expected '") + c + "'");
    ++pos_;
  }

  void finish() {
    skip_ws();
    if (!at_end()) fail(ParseErrorKind::TrailingGarbage, "unexpected text after the closing bracket");
  }

  static bool ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
  }
  static bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  }

  std::string identifier() {
    if (at_end()) fail(ParseErrorKind::UnexpectedEnd, "expected identifier");
    if (!ident_start(peek())) fail(ParseErrorKind::UnexpectedToken, "expected identifier");
    std::size_t start = pos_;
    while (!at_end() && ident_char(text_[pos_])) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  FunctionCall call() {
    skip_ws();
    FunctionCall out;
    out.name = identifier();
    skip_ws();
    expect('(');
    skip_ws();
    if (peek() == ')') {
      ++pos_;
      return out;
    }
    while (true) {
      skip_ws();
      std::size_t arg_start = pos_;
      if (!ident_start(peek()) || is_keyword_literal()) {
        if (at_end()) fail(ParseErrorKind::UnexpectedEnd, "expected keyword argument");
        if (starts_literal()) fail(ParseErrorKind::PositionalArgument, "positional arguments are not accepted");
        fail(ParseErrorKind::UnexpectedToken, "expected keyword argument");
      }
      std::string key = identifier();
      skip_ws();
      if (peek() != '=') {
        if (at_end()) fail(ParseErrorKind::UnexpectedEnd, "expected '='");
        if (peek() == ',' || peek() == ')')
          fail_at(arg_start, ParseErrorKind::PositionalArgument, "positional arguments are not accepted");
        fail(ParseErrorKind::UnexpectedToken, "expected '='");
      }
      ++pos_;
      skip_ws();
      Value v = value(0);
      if (out.find_arg(key)) fail_at(arg_start, ParseErrorKind::DuplicateKey, "duplicate keyword argument " + key);
      out.args.emplace_back(std::move(key), std::move(v));
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      expect(')');
      return out;
    }
  }

  bool is_keyword_literal() const {
    // true/false followed by something other than '=' would be a positional literal
    for (std::string_view word : {"true", "false", "True", "False"}) {
      if (text_.substr(pos_, word.size()) == word) {
        std::size_t after = pos_ + word.size();
        if (after < text_.size() && ident_char(text_[after])) continue;
        std::size_t probe = after;
        while (probe < text_.size() && std::isspace(static_cast<unsigned char>(text_[probe]))) ++probe;
        return probe >= text_.size() || text_[probe] != '=';
      }
    }
    return false;
  }

  bool starts_literal() const {
    char c = peek();
    return c == '"' || c == '\'' || c == '[' || c == '{' || c == '-' || c == '.' ||
           std::isdigit(static_cast<unsigned char>(c)) || is_keyword_literal();
  }

  Value value(int depth) {
    if (depth > kMaxDepth) fail(ParseErrorKind::NestingTooDeep, "literal nesting exceeds limit");
    if (at_end()) fail(ParseErrorKind::UnexpectedEnd, "expected a literal");
    char c = peek();
    if (c == '"' || c == '\'') return Value(string_literal());
    if (c == '[') return array(depth);
    if (c == '{') return object(depth);
    if (c == '-' || c == '.' || std::isdigit(static_cast<unsigned char>(c))) return number();
    if (ident_start(c)) {
      std::size_t start = pos_;
      std::string word = identifier();
      if (word == "true" || word == "True") return Value(true);
      if (word == "false" || word == "False") return Value(false);
      fail_at(start, ParseErrorKind::UnexpectedToken, "unknown bare word '" + word + "'");
    }
    fail(ParseErrorKind::UnexpectedToken, "expected a literal");
  }

  std::string string_literal() {
    std::size_t start = pos_;
    char quote = text_[pos_++];
    std::string out;
    while (true) {
      if (at_end()) fail_at(start, ParseErrorKind::UnterminatedString, "string is not terminated");
      char c = text_[pos_];
      if (c == quote) {
        ++pos_;
        return out;
      }
      if (c == '\\') {
        if (pos_ + 1 >= text_.size()) fail_at(start, ParseErrorKind::UnterminatedString, "string is not terminated");
        char e = text_[pos_ + 1];
        if (e != '\\' && e != '"' && e != '\'') fail(ParseErrorKind::InvalidEscape, std::string("invalid escape \\") + e);
        out.push_back(e);
        pos_ += 2;
        continue;
      }
      out.push_back(c);
      ++pos_;
    }
  }

  Value number() {
    std::size_t start = pos_;
    if (peek() == '-') ++pos_;
    bool is_float = false;
    bool digits = false;
    while (!at_end()) {
      char c = text_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        digits = true;
        ++pos_;
      } else if (c == '.' && !is_float) {
        is_float = true;
        ++pos_;
      } else {
        break;
      }
    }
    if (!digits) fail_at(start, ParseErrorKind::InvalidNumber, "malformed number");
    if (peek() == 'e' || peek() == 'E') {
      is_float = true;
      ++pos_;
      if (peek() == '+' || peek() == '-') ++pos_;
      if (!std::isdigit(static_cast<unsigned char>(peek()))) fail_at(start, ParseErrorKind::InvalidNumber, "malformed exponent");
      while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
    }
    if (ident_char(peek()) || peek() == '.') fail_at(start, ParseErrorKind::InvalidNumber, "malformed number");
    const char* first = text_.data() + start;
    const char* last = text_.data() + pos_;
    if (is_float) {
      double d = 0;
      auto [ptr, ec] = std::from_chars(first, last, d);
      if (ec != std::errc() || ptr != last || !std::isfinite(d))
        fail_at(start, ParseErrorKind::InvalidNumber, "float literal out of range");
      return Value(d);
    }
    std::int64_t i = 0;
    auto [ptr, ec] = std::from_chars(first, last, i);
    if (ec != std::errc() || ptr != last) fail_at(start, ParseErrorKind::InvalidNumber, "integer literal out of range");
    return Value(i);
  }

  Value array(int depth) {
    ++pos_;
    Array out;
    skip_ws();
    if (peek() == ']') {
      ++pos_;
      return Value(std::move(out));
    }
    while (true) {
      skip_ws();
      out.push_back(value(depth + 1));
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      expect(']');
      return Value(std::move(out));
    }
  }

  Value object(int depth) {
    ++pos_;
    Object out;
    skip_ws();
    if (peek() == '}') {
      ++pos_;
      return Value(std::move(out));
    }
    while (true) {
      skip_ws();
      std::size_t key_start = pos_;
      if (peek() != '"' && peek() != '\'') {
        if (at_end()) fail(ParseErrorKind::UnexpectedEnd, "expected object key");
        fail(ParseErrorKind::UnexpectedToken, "object keys must be quoted strings");
      }
      std::string key = string_literal();
      skip_ws();
      expect(':');
      skip_ws();
      Value v = value(depth + 1);
      for (const auto& kv : out)
        if (kv.first == key) fail_at(key_start, ParseErrorKind::DuplicateKey, "duplicate object key " + key);
      out.emplace_back(std::move(key), std::move(v));
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      expect('}');
      return Value(std::move(out));
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

Expected<CallList, ParseError> parse_call_list(std::string_view text) {
  try {
    return Parser(text).call_list();
  } catch (const Failure& f) {
    return f.error;
  }
}

Expected<Value, ParseError> parse_value(std::string_view text) {
  try {
    return Parser(text).whole_value();
  } catch (const Failure& f) {
    return f.error;
  }
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

void write_string(std::string& out, const std::string& s) {
  out.push_back('"');
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
}

void write_value(std::string& out, const Value& v) {
  switch (v.data.index()) {
    case 0: write_string(out, v.as<std::string>()); break;
    case 1: out += std::to_string(v.as<std::int64_t>()); break;
    case 2: {
      char buf[64];
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v.as<double>());
      std::string s(buf, ec == std::errc() ? ptr : buf);
      if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
      out += s;
      break;
    }
    case 3: out += v.as<bool>() ? "true" : "false"; break;
    case 4: {
      out.push_back('[');
      bool first = true;
      for (const auto& item : v.as<Array>()) {
        if (!first) out += ", ";
        first = false;
        write_value(out, item);
      }
      out.push_back(']');
      break;
    }
    default: {
      out.push_back('{');
      bool first = true;
      for (const auto& [key, item] : v.as<Object>()) {
        if (!first) out += ", ";
        first = false;
        write_string(out, key);
        out += ": ";
        write_value(out, item);
      }
      out.push_back('}');
    }
  }
}

}  // namespace

std::string serialize_value(const Value& value) {
  std::string out;
  write_value(out, value);
  return out;
}

std::string serialize_call(const FunctionCall& call) {
  std::string out = call.name + "(";
  bool first = true;
  for (const auto& [key, value] : call.args) {
    if (!first) out += ", ";
    first = false;
    out += key;
    out.push_back('=');
    write_value(out, value);
  }
  out.push_back(')');
  return out;
}

std::string serialize_call_list(const CallList& calls) {
  std::string out = "[";
  bool first = true;
  for (const auto& call : calls.calls) {
    if (!first) out += ", ";
    first = false;
    out += serialize_call(call);
  }
  out.push_back(']');
  return out;
}

// ---------------------------------------------------------------------------
// Validation and matching

std::vector<ValidationError> validate_against_schema(const FunctionCall& call, const std::vector<ToolSchema>& tools) {
  std::vector<ValidationError> errors;
  auto tool = std::find_if(tools.begin(), tools.end(), [&](const ToolSchema& t) { return t.name == call.name; });
  if (tool == tools.end()) {
    errors.push_back({ValidationErrorKind::UnknownFunction, "", "", call.name});
    return errors;
  }
  for (const auto& spec : tool->params)
    if (spec.required && !call.find_arg(spec.name))
      errors.push_back({ValidationErrorKind::MissingRequired, spec.name, "", ""});
  for (const auto& [key, value] : call.args) {
    const ParamSpec* spec = tool->find_param(key);
    if (!spec) {
      errors.push_back({ValidationErrorKind::UnknownParam, key, "", ""});
      continue;
    }
    TypeTag got = value.tag();
    if (spec->type == TypeTag::Enum) {
      if (got != TypeTag::String) {
        errors.push_back({ValidationErrorKind::TypeMismatch, key, "enum", std::string(to_string(got))});
      } else if (std::find(spec->enum_values.begin(), spec->enum_values.end(), value.as<std::string>()) ==
                 spec->enum_values.end()) {
        errors.push_back({ValidationErrorKind::EnumViolation, key, "", value.as<std::string>()});
      }
    } else if (got != spec->type) {
      errors.push_back({ValidationErrorKind::TypeMismatch, key, std::string(to_string(spec->type)),
                        std::string(to_string(got))});
    }
  }
  return errors;
}

bool calls_match(const CallList& candidate, const CallList& reference) {
  if (candidate.calls.size() != reference.calls.size()) return false;
  std::vector<bool> used(reference.calls.size(), false);
  for (const auto& call : candidate.calls) {
    bool found = false;
    for (std::size_t j = 0; j < reference.calls.size(); ++j) {
      if (!used[j] && call == reference.calls[j]) {
        used[j] = true;
        found = true;
        break;
      }
    }
    if (!found) return false;
  }
  return true;
}

}  // namespace funrl::callspec
