#include "oracle.hpp"

#include <algorithm>
#include <cmath>

namespace taxrank::testing {

double oracle_bracket_tax(double taxable_income, const BracketSchedule& schedule) {
    const long long whole = static_cast<long long>(std::floor(taxable_income));
    double tax = 0.0;
    std::size_t b = 0;
    // Dollar d covers the interval (d-1, d]; with integer bracket bounds the
    // whole interval sits inside one bracket.
    for (long long d = 1; d <= whole; ++d) {
        while (static_cast<double>(d) > schedule[b].upper_bound) ++b;
        tax += schedule[b].rate;
    }
    const double frac = taxable_income - static_cast<double>(whole);
    if (frac > 0.0) {
        while (taxable_income > schedule[b].upper_bound) ++b;
        tax += frac * schedule[b].rate;
    }
    return tax;
}

double oracle_eitc(const TaxpayerProfile& profile, const EitcSchedule& schedule) {
    if (schedule.ineligible_statuses.count(profile.status)) return 0.0;
    const EitcBand& band = schedule.band(profile.qualifying_children);
    const int idx = status_index(profile.status);
    if (profile.income > band.agi_limit[idx]) return 0.0;
    if (profile.investment_income > schedule.investment_income_limit) return 0.0;

    const double plateau_start = band.max_credit / band.phase_in_rate;
    double credit;
    if (profile.income < plateau_start) {
        credit = band.phase_in_rate * profile.income;
    } else {
        credit = band.max_credit;
    }
    if (profile.income > band.phaseout_start[idx]) {
        credit -= band.phaseout_rate * (profile.income - band.phaseout_start[idx]);
    }
    if (credit < 0.0) credit = 0.0;
    if (credit > band.max_credit) credit = band.max_credit;
    return credit;
}

double oracle_net(const TaxpayerProfile& profile, const TaxPolicy& policy, Scenario scenario) {
    double taxable = profile.income;
    if (scenario != Scenario::Brackets) {
        const double deduction =
            policy.deductions.lookup(profile.status, profile.age_65_or_older, profile.blind);
        taxable = std::max(0.0, profile.income - deduction);
    }
    double tax = oracle_bracket_tax(taxable, policy.brackets.for_status(profile.status));
    double credit = 0.0;
    if (scenario == Scenario::BracketsDeductionsEitc) {
        credit = oracle_eitc(profile, policy.eitc);
    }
    return tax - credit;
}

} // namespace taxrank::testing
