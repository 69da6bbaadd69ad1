#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace conceptscope::acceptance {

// Pinned thresholds. Stages and the acceptance binary share these.
inline constexpr double kOracleTolerance = 1e-12;
inline constexpr double kOracleSeconds = 5.0;
inline constexpr double kDecompositionRelTol = 1e-5;
inline constexpr double kSelfPatchTol = 1e-6;
inline constexpr double kOpenAccuracy = 0.9;
inline constexpr double kMcAccuracy = 0.8;
inline constexpr double kTrainMinutes = 60.0;
inline constexpr double kTopHeadOverlap = 0.5;
inline constexpr double kCvInvarianceMargin = 0.1;
inline constexpr double kSteeringGain = 0.1;
inline constexpr double kChiSquareAlpha = 0.01;

inline constexpr std::size_t kOraclePairs = 1000;
inline constexpr std::size_t kDecompositionPrompts = 100;
inline constexpr std::size_t kAbstractOracleLines = 10000;
inline constexpr std::size_t kChiSquareItems = 1000;

struct Check {
    int criterion = 0;
    std::string name;
    bool passed = false;
    std::string detail;
};

nlohmann::json to_json(const Check & c);
Check check_from_json(const nlohmann::json & j);

// "[PASS] 4 training gate: ..." style line.
std::string format_line(const Check & c);

bool all_passed(const std::vector<Check> & checks);

} // namespace conceptscope::acceptance
