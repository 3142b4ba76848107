#pragma once

#include <array>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "taxrank/profile.hpp"
#include "taxrank/types.hpp"

namespace taxrank {

// One marginal-rate rung. The last rung of a schedule has an infinite bound.
struct BracketRung {
    double upper_bound = 0.0;
    double rate = 0.0;
};

using BracketSchedule = std::vector<BracketRung>;

struct BracketTable {
    std::array<BracketSchedule, 4> by_status;

    const BracketSchedule& for_status(FilingStatus s) const {
        return by_status[status_index(s)];
    }
    // Bounds strictly increasing, final bound infinite, rates in (0,1).
    // Rate monotonicity is deliberately NOT checked: mutants may violate it.
    void validate() const;
};

void validate_schedule(const BracketSchedule& schedule);

struct DeductionTable {
    // [status][age65 * 2 + blind]
    std::array<std::array<double, 4>, 4> amounts{};

    double lookup(FilingStatus s, bool age65, bool blind) const {
        return amounts[status_index(s)][(age65 ? 2 : 0) + (blind ? 1 : 0)];
    }
    void set(FilingStatus s, bool age65, bool blind, double amount) {
        amounts[status_index(s)][(age65 ? 2 : 0) + (blind ? 1 : 0)] = amount;
    }
    void validate() const;
};

// EITC parameters for one qualifying-children count.
struct EitcBand {
    double phase_in_rate = 0.0;
    double max_credit = 0.0;
    double phaseout_rate = 0.0;
    std::array<double, 4> phaseout_start{}; // by status index
    std::array<double, 4> agi_limit{};      // by status index
};

struct EitcSchedule {
    double investment_income_limit = 0.0;
    std::array<EitcBand, 4> bands; // indexed by qualifying children 0..3
    std::set<FilingStatus> ineligible_statuses;

    const EitcBand& band(int children) const { return bands[children]; }
    void validate() const;
};

struct TaxPolicy {
    int year = 0;
    BracketTable brackets;
    DeductionTable deductions;
    EitcSchedule eitc;

    void validate() const;
};

// Final figures for one filer. `benefit` is the quantity the metamorphic
// relations compare: higher means a better outcome for the filer.
struct TaxResult {
    double tax_liability = 0.0;
    double eitc_amount = 0.0;
    double net = 0.0; // tax_liability - eitc_amount

    double benefit() const { return -net; }
};

inline TaxResult make_tax_result(double liability, double eitc) {
    return TaxResult{liability, eitc, liability - eitc};
}

// Progressive marginal tax over one status's schedule, rounded to cents.
double compute_bracket_tax(double taxable_income, const BracketSchedule& schedule);

// Exact table lookup keyed by (age_65_or_older, blind).
double standard_deduction(const TaxpayerProfile& profile, const DeductionTable& table);

// Piecewise-linear credit; zero for ineligible status, AGI over the limit, or
// investment income over the cap. AGI and earned income are both profile.income.
double compute_eitc(const TaxpayerProfile& profile, const EitcSchedule& schedule);

TaxResult compute_tax(const TaxpayerProfile& profile, const TaxPolicy& policy, Scenario scenario);

// Strict JSON loader; unknown keys anywhere are rejected.
TaxPolicy load_policy_file(const std::filesystem::path& path);
TaxPolicy parse_policy_json(const std::string& text, const std::string& origin = "<string>");

} // namespace taxrank
