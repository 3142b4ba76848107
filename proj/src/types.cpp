#include "taxrank/types.hpp"

#include "taxrank/errors.hpp"

namespace taxrank {

int status_code(FilingStatus status) {
    return static_cast<int>(status);
}

FilingStatus status_from_code(int code) {
    if (code < 1 || code > 4) {
        throw ValidationError("filing status code must be 1-4, got " + std::to_string(code));
    }
    return static_cast<FilingStatus>(code);
}

std::string_view status_key(FilingStatus status) {
    switch (status) {
        case FilingStatus::Single: return "single";
        case FilingStatus::MarriedJoint: return "married_joint";
        case FilingStatus::MarriedSeparate: return "married_separate";
        case FilingStatus::HeadOfHousehold: return "head_of_household";
    }
    throw ValidationError("invalid filing status");
}

FilingStatus status_from_key(std::string_view key) {
    for (FilingStatus s : kAllStatuses) {
        if (status_key(s) == key) return s;
    }
    throw ValidationError("unknown filing status key: " + std::string(key));
}

std::string_view status_display(FilingStatus status) {
    switch (status) {
        case FilingStatus::Single: return "Single";
        case FilingStatus::MarriedJoint: return "MarriedJoint";
        case FilingStatus::MarriedSeparate: return "MarriedSeparate";
        case FilingStatus::HeadOfHousehold: return "HeadOfHousehold";
    }
    throw ValidationError("invalid filing status");
}

std::string_view scenario_key(Scenario scenario) {
    switch (scenario) {
        case Scenario::Brackets: return "brackets";
        case Scenario::BracketsDeductions: return "brackets_deductions";
        case Scenario::BracketsDeductionsEitc: return "brackets_deductions_eitc";
    }
    throw ValidationError("invalid scenario");
}

Scenario scenario_from_key(std::string_view key) {
    if (key == "brackets") return Scenario::Brackets;
    if (key == "brackets_deductions") return Scenario::BracketsDeductions;
    if (key == "brackets_deductions_eitc") return Scenario::BracketsDeductionsEitc;
    throw ValidationError("unknown scenario key: " + std::string(key));
}

} // namespace taxrank
