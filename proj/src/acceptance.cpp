#include "conceptscope/acceptance.hpp"

#include <algorithm>

namespace conceptscope::acceptance {

nlohmann::json to_json(const Check & c) {
    return {{"criterion", c.criterion}, {"name", c.name}, {"passed", c.passed}, {"detail", c.detail}};
}

Check check_from_json(const nlohmann::json & j) {
    return {j.at("criterion").get<int>(), j.at("name").get<std::string>(), j.at("passed").get<bool>(),
            j.value("detail", std::string())};
}

std::string format_line(const Check & c) {
    return std::string(c.passed ? "[PASS] " : "[FAIL] ") + std::to_string(c.criterion) + " " + c.name + ": " +
           c.detail;
}

bool all_passed(const std::vector<Check> & checks) {
    return std::all_of(checks.begin(), checks.end(), [](const Check & c) { return c.passed; });
}

} // namespace conceptscope::acceptance
