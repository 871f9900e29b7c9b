#pragma once

#include <optional>
#include <string>

namespace synthprod {

// First balanced {...} in raw that parses as JSON; prose around it is ignored.
std::optional<std::string> first_json_object(const std::string& raw);

} // namespace synthprod
