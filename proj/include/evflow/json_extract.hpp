#pragma once

#include <optional>
#include <string_view>

#include <nlohmann/json.hpp>

namespace evflow {

// Recovery of JSON values from free-form model replies: code fences are
// stripped, then the text is scanned for the first balanced bracket span that
// parses (after removing trailing commas).

std::optional<nlohmann::json> extract_json_array(std::string_view text);
std::optional<nlohmann::json> extract_json_object(std::string_view text);

}  // namespace evflow
