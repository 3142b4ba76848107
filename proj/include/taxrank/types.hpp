#pragma once

#include <array>
#include <string>
#include <string_view>

namespace taxrank {

// Filing statuses carry the integer codes 1-4 used on the wire and in prompts.
enum class FilingStatus : int {
    Single = 1,
    MarriedJoint = 2,
    MarriedSeparate = 3,
    HeadOfHousehold = 4,
};

inline constexpr std::array<FilingStatus, 4> kAllStatuses = {
    FilingStatus::Single,
    FilingStatus::MarriedJoint,
    FilingStatus::MarriedSeparate,
    FilingStatus::HeadOfHousehold,
};

int status_code(FilingStatus status);
FilingStatus status_from_code(int code);

// Snake-case keys used in policy/config files ("single", "married_joint", ...).
std::string_view status_key(FilingStatus status);
FilingStatus status_from_key(std::string_view key);

// Display names used in reports and localized conditions ("MarriedSeparate").
std::string_view status_display(FilingStatus status);

// Index 0..3 for table-backed storage.
inline constexpr int status_index(FilingStatus status) {
    return static_cast<int>(status) - 1;
}

enum class Scenario {
    Brackets,
    BracketsDeductions,
    BracketsDeductionsEitc,
};

std::string_view scenario_key(Scenario scenario);
Scenario scenario_from_key(std::string_view key);

inline constexpr bool scenario_has_deductions(Scenario s) {
    return s != Scenario::Brackets;
}

inline constexpr bool scenario_has_eitc(Scenario s) {
    return s == Scenario::BracketsDeductionsEitc;
}

} // namespace taxrank
