#pragma once

// Tool-set wire format: a JSON array of
// {name, description, parameters: {type: "dict", properties: {...}, required: [...]}}.

#include <string_view>
#include <vector>

#include "json.hpp"

#include "funrl/callspec.hpp"

namespace funrl::callspec {

using Json = nlohmann::ordered_json;

/// Throws SchemaError on unknown type literals or malformed entries.
std::vector<ToolSchema> tools_from_json(const Json& tools);
std::vector<ToolSchema> tools_from_json_text(std::string_view text);

Json tools_to_json(const std::vector<ToolSchema>& tools);

}  // namespace funrl::callspec
