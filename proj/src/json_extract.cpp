#include "synthprod/json_extract.hpp"

#include <json.hpp>

namespace synthprod {

std::optional<std::string> first_json_object(const std::string& raw) {
    for (std::size_t start = raw.find('{'); start != std::string::npos; start = raw.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false, escaped = false;
        for (std::size_t i = start; i < raw.size(); ++i) {
            char c = raw[i];
            if (in_string) {
                if (escaped) escaped = false;
                else if (c == '\\') escaped = true;
                else if (c == '"') in_string = false;
                continue;
            }
            if (c == '"') in_string = true;
            else if (c == '{') ++depth;
            else if (c == '}' && --depth == 0) {
                auto candidate = raw.substr(start, i - start + 1);
                if (nlohmann::json::accept(candidate)) return candidate;
                break;
            }
        }
    }
    return std::nullopt;
}

} // namespace synthprod
