#pragma once

// Tool schemas and the function-call AST used by the answer section of a
// response: `[name(key=literal, ...), ...]`.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "funrl/expected.hpp"

namespace funrl::callspec {

enum class TypeTag { String, Integer, Float, Boolean, Object, Array, Enum };

std::string_view to_string(TypeTag tag);

struct ParamSpec {
  std::string name;
  TypeTag type = TypeTag::String;
  std::vector<std::string> enum_values;  // only for TypeTag::Enum
  std::string description;
  bool required = true;
};

struct ToolSchema {
  std::string name;
  std::string description;
  std::vector<ParamSpec> params;

  const ParamSpec* find_param(std::string_view param) const;
};

/// Thrown when a ParamSpec/ToolSchema/tool set violates its invariants.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

bool is_identifier(std::string_view text);

/// Checks identifier, uniqueness and enum invariants; throws SchemaError.
void check_tool_set(const std::vector<ToolSchema>& tools);

struct Value;
using Array = std::vector<Value>;
/// Insertion-ordered object; keys are unique.
using Object = std::vector<std::pair<std::string, Value>>;

struct Value {
  using Storage = std::variant<std::string, std::int64_t, double, bool, Array, Object>;
  Storage data;

  Value() : data(std::int64_t{0}) {}
  Value(std::string s) : data(std::move(s)) {}
  Value(const char* s) : data(std::string(s)) {}
  Value(std::int64_t i) : data(i) {}
  Value(int i) : data(std::int64_t{i}) {}
  Value(double d) : data(d) {}
  Value(bool b) : data(b) {}
  Value(Array a) : data(std::move(a)) {}
  Value(Object o) : data(std::move(o)) {}

  TypeTag tag() const;
  template <typename T>
  bool is() const { return std::holds_alternative<T>(data); }
  template <typename T>
  const T& as() const { return std::get<T>(data); }
};

/// Structural equality: integer and float never compare equal, floats compare
/// bitwise, object comparison ignores key order.
bool operator==(const Value& a, const Value& b);
inline bool operator!=(const Value& a, const Value& b) { return !(a == b); }

struct FunctionCall {
  std::string name;
  std::vector<std::pair<std::string, Value>> args;  // stored order, unique names

  const Value* find_arg(std::string_view arg) const;
};

/// Names equal and args equal as mappings.
bool operator==(const FunctionCall& a, const FunctionCall& b);

struct CallList {
  std::vector<FunctionCall> calls;
};

/// Order-sensitive AST identity (call order and kwarg order both matter).
bool identical(const CallList& a, const CallList& b);

enum class ParseErrorKind {
  UnexpectedToken,
  UnexpectedEnd,
  UnterminatedString,
  InvalidEscape,
  InvalidNumber,
  TrailingGarbage,
  EmptyCallList,
  PositionalArgument,
  DuplicateKey,
  NestingTooDeep,
};

std::string_view to_string(ParseErrorKind kind);

struct ParseError {
  std::size_t offset = 0;
  ParseErrorKind kind = ParseErrorKind::UnexpectedToken;
  std::string reason;
};

Expected<CallList, ParseError> parse_call_list(std::string_view text);

/// Parses one literal (string, number, boolean, array, object) spanning the
/// whole input.
Expected<Value, ParseError> parse_value(std::string_view text);

std::string serialize_value(const Value& value);
std::string serialize_call(const FunctionCall& call);
std::string serialize_call_list(const CallList& calls);

enum class ValidationErrorKind { UnknownFunction, MissingRequired, UnknownParam, TypeMismatch, EnumViolation };

std::string_view to_string(ValidationErrorKind kind);

struct ValidationError {
  ValidationErrorKind kind;
  std::string param;     // empty for UnknownFunction
  std::string expected;  // TypeMismatch only
  std::string got;       // TypeMismatch / EnumViolation

  std::string describe() const;
};

/// Empty result means the call is valid against `tools`.
std::vector<ValidationError> validate_against_schema(const FunctionCall& call,
                                                     const std::vector<ToolSchema>& tools);

/// Multiset equality over calls; see operator== for call equality.
bool calls_match(const CallList& candidate, const CallList& reference);

}  // namespace funrl::callspec
