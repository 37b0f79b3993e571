#include "funrl/callspec_json.hpp"

#include <string>

namespace funrl::callspec {

namespace {

TypeTag tag_from_literal(const std::string& literal, const std::string& where) {
  if (literal == "string") return TypeTag::String;
  if (literal == "integer") return TypeTag::Integer;
  if (literal == "float" || literal == "number") return TypeTag::Float;
  if (literal == "boolean") return TypeTag::Boolean;
  if (literal == "dict" || literal == "object") return TypeTag::Object;
  if (literal == "list" || literal == "array") return TypeTag::Array;
  throw SchemaError("unknown type literal '" + literal + "' for " + where);
}

std::string literal_for(TypeTag tag) {
  switch (tag) {
    case TypeTag::String:
    case TypeTag::Enum: return "string";
    case TypeTag::Integer: return "integer";
    case TypeTag::Float: return "float";
    case TypeTag::Boolean: return "boolean";
    case TypeTag::Object: return "dict";
    case TypeTag::Array: return "array";
  }
  return "string";
}

const Json& field(const Json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(std::string("missing field '") + key + "' in " + where);
  return *it;
}

std::vector<ToolSchema> tools_from_json_impl(const Json& tools) {
  if (!tools.is_array()) throw SchemaError("tool set must be a JSON array");
  std::vector<ToolSchema> out;
  for (const auto& entry : tools) {
    if (!entry.is_object()) throw SchemaError("tool entry must be a JSON object");
    ToolSchema tool;
    const auto& name = field(entry, "name", "tool");
    if (!name.is_string()) throw SchemaError("tool name must be a string");
    tool.name = name.get<std::string>();
    if (auto it = entry.find("description"); it != entry.end() && it->is_string())
      tool.description = it->get<std::string>();

    std::vector<std::string> required;
    if (auto params = entry.find("parameters"); params != entry.end()) {
      if (!params->is_object()) throw SchemaError("parameters of " + tool.name + " must be an object");
      if (auto it = params->find("required"); it != params->end()) {
        if (!it->is_array()) throw SchemaError("required of " + tool.name + " must be an array");
        for (const auto& r : *it) required.push_back(r.get<std::string>());
      }
      if (auto props = params->find("properties"); props != params->end()) {
        if (!props->is_object()) throw SchemaError("properties of " + tool.name + " must be an object");
        for (const auto& [pname, pspec] : props->items()) {
          std::string where = tool.name + "." + pname;
          ParamSpec spec;
          spec.name = pname;
          const auto& type = field(pspec, "type", where);
          if (!type.is_string()) throw SchemaError("type of " + where + " must be a string");
          spec.type = tag_from_literal(type.get<std::string>(), where);
          if (auto e = pspec.find("enum"); e != pspec.end()) {
            if (!e->is_array() || e->empty()) throw SchemaError("enum of " + where + " must be a non-empty array");
            for (const auto& v : *e) {
              if (!v.is_string()) throw SchemaError("enum of " + where + " must contain strings");
              spec.enum_values.push_back(v.get<std::string>());
            }
            spec.type = TypeTag::Enum;
          }
          if (auto d = pspec.find("description"); d != pspec.end() && d->is_string())
            spec.description = d->get<std::string>();
          spec.required = false;
          tool.params.push_back(std::move(spec));
        }
      }
    }
    for (const auto& r : required) {
      bool found = false;
      for (auto& p : tool.params)
        if (p.name == r) p.required = found = true;
      if (!found) throw SchemaError("required parameter " + r + " is not declared in " + tool.name);
    }
    out.push_back(std::move(tool));
  }
  check_tool_set(out);
  return out;
}

}  // namespace

std::vector<ToolSchema> tools_from_json(const Json& tools) {
  try {
    return tools_from_json_impl(tools);
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("malformed tool set: ") + e.what());
  }
}

std::vector<ToolSchema> tools_from_json_text(std::string_view text) {
  Json parsed;
  try {
    parsed = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw SchemaError(std::string("tool set is not valid JSON: ") + e.what());
  }
  return tools_from_json(parsed);
}

Json tools_to_json(const std::vector<ToolSchema>& tools) {
  Json out = Json::array();
  for (const auto& tool : tools) {
    Json props = Json::object();
    Json required = Json::array();
    for (const auto& p : tool.params) {
      Json spec = {{"type", literal_for(p.type)}, {"description", p.description}};
      if (p.type == TypeTag::Enum) spec["enum"] = p.enum_values;
      props[p.name] = std::move(spec);
      if (p.required) required.push_back(p.name);
    }
    out.push_back({{"name", tool.name},
                   {"description", tool.description},
                   {"parameters", {{"type", "dict"}, {"properties", std::move(props)}, {"required", std::move(required)}}}});
  }
  return out;
}

}  // namespace funrl::callspec
