#pragma once

// Independent brute-force oracle used by the test and acceptance suites.
// Deliberately written against the policy *data* only, never the engine's
// arithmetic: bracket tax accumulates dollar by dollar, and the credit is an
// explicit piecewise ladder.

#include "taxrank/policy.hpp"
#include "taxrank/profile.hpp"

namespace taxrank::testing {

double oracle_bracket_tax(double taxable_income, const BracketSchedule& schedule);
double oracle_eitc(const TaxpayerProfile& profile, const EitcSchedule& schedule);
double oracle_net(const TaxpayerProfile& profile, const TaxPolicy& policy, Scenario scenario);

} // namespace taxrank::testing
