#include <doctest.h>

#include <cmath>

#include "taxrank/errors.hpp"
#include "taxrank/money.hpp"
#include "taxrank/policy.hpp"
#include "taxrank/profiles.hpp"

#include "support/oracle.hpp"
#include "support/test_util.hpp"

using namespace taxrank;
using namespace taxrank::testing;

TEST_SUITE_BEGIN("policy");

namespace {

TaxpayerProfile single_filer(double income) {
    TaxpayerProfile p;
    p.income = income;
    return p;
}

} // namespace

TEST_CASE("bracket tax on the 2020 single table") {
    const TaxPolicy policy = fixture_policy_2020();
    const BracketSchedule& single = policy.brackets.for_status(FilingStatus::Single);

    CHECK(compute_bracket_tax(0.0, single) == 0.0);
    CHECK(compute_bracket_tax(9875.0, single) == doctest::Approx(987.50));
    CHECK(compute_bracket_tax(50000.0, single) == doctest::Approx(6790.00));
}

TEST_CASE("bracket tax rejects invalid tables") {
    BracketSchedule bad{{10000.0, 0.1}, {5000.0, 0.2}};
    CHECK_THROWS_AS(compute_bracket_tax(1000.0, bad), ValidationError);

    BracketSchedule no_top{{10000.0, 0.1}};
    CHECK_THROWS_AS(compute_bracket_tax(1000.0, no_top), ValidationError);

    BracketSchedule bad_rate{{10000.0, 0.0}, {std::numeric_limits<double>::infinity(), 0.2}};
    CHECK_THROWS_AS(compute_bracket_tax(1000.0, bad_rate), ValidationError);

    const TaxPolicy policy = fixture_policy_2020();
    CHECK_THROWS_AS(
        compute_bracket_tax(-1.0, policy.brackets.for_status(FilingStatus::Single)),
        ValidationError);
}

TEST_CASE("standard deduction matches the 2020 single fixture values") {
    const TaxPolicy policy = fixture_policy_2020();
    TaxpayerProfile p = single_filer(50000.0);

    CHECK(standard_deduction(p, policy.deductions) == 12200.0);
    p.blind = true;
    CHECK(standard_deduction(p, policy.deductions) == 13850.0);
    p.blind = false;
    p.age_65_or_older = true;
    CHECK(standard_deduction(p, policy.deductions) == 13850.0);
    p.blind = true;
    CHECK(standard_deduction(p, policy.deductions) == 15500.0);
}

TEST_CASE("eitc eligibility gates") {
    const TaxPolicy policy = tiny_policy();

    TaxpayerProfile mfs = single_filer(15000.0);
    mfs.status = FilingStatus::MarriedSeparate;
    CHECK(compute_eitc(mfs, policy.eitc) == 0.0);

    TaxpayerProfile rich = single_filer(50000.0); // above the 40k AGI limit
    CHECK(compute_eitc(rich, policy.eitc) == 0.0);

    TaxpayerProfile investor = single_filer(15000.0);
    investor.investment_income = 3500.0; // above the 3k cap
    CHECK(compute_eitc(investor, policy.eitc) == 0.0);
}

TEST_CASE("eitc piecewise value from the synthetic schedule") {
    // rate_in 0.4, max 3000, phaseout starts at 20000 with rate 0.21:
    // min(12000, 3000) - 0.21 * 10000 = 900.
    const TaxPolicy policy = tiny_policy();
    CHECK(compute_eitc(single_filer(30000.0), policy.eitc) == doctest::Approx(900.00));
}

TEST_CASE("compute_tax per scenario") {
    const TaxPolicy policy = fixture_policy_2020();

    TaxResult brackets_only = compute_tax(single_filer(9875.0), policy, Scenario::Brackets);
    CHECK(brackets_only.tax_liability == doctest::Approx(987.50));
    CHECK(brackets_only.eitc_amount == 0.0);
    CHECK(brackets_only.benefit() == doctest::Approx(-987.50));

    TaxResult with_deduction =
        compute_tax(single_filer(50000.0), policy, Scenario::BracketsDeductions);
    CHECK(with_deduction.tax_liability == doctest::Approx(4338.50));

    TaxResult below_deduction =
        compute_tax(single_filer(9000.0), policy, Scenario::BracketsDeductions);
    CHECK(below_deduction.tax_liability == 0.0);
}

TEST_CASE("net and benefit stay consistent to the cent") {
    const TaxPolicy policy = fixture_policy_2020();
    const ProfileDistribution dist;
    for (const TaxpayerProfile& p : sample_profiles(dist, 11, 300)) {
        TaxResult r = compute_tax(p, policy, Scenario::BracketsDeductionsEitc);
        CHECK(to_cents(r.net) == to_cents(r.tax_liability) - to_cents(r.eitc_amount));
        CHECK(r.benefit() == -r.net);
        CHECK(r.eitc_amount >= 0.0);
        CHECK(r.eitc_amount <= policy.eitc.band(p.qualifying_children).max_credit);
    }
}

TEST_CASE("bracket tax is nondecreasing and continuous at boundaries") {
    const TaxPolicy policy = fixture_policy_2020();
    for (FilingStatus s : kAllStatuses) {
        const BracketSchedule& schedule = policy.brackets.for_status(s);
        double max_rate = 0.0;
        for (const BracketRung& rung : schedule) max_rate = std::max(max_rate, rung.rate);

        double prev = 0.0;
        for (double income = 0.0; income <= 600000.0; income += 1234.56) {
            double tax = compute_bracket_tax(income, schedule);
            CHECK(tax >= prev);
            if (income > 0.0) CHECK(tax / income <= max_rate + 1e-9);
            prev = tax;
        }
        for (const BracketRung& rung : schedule) {
            if (std::isinf(rung.upper_bound)) continue;
            double left = compute_bracket_tax(rung.upper_bound - 0.001, schedule);
            double right = compute_bracket_tax(rung.upper_bound + 0.001, schedule);
            CHECK(std::fabs(right - left) < 0.01);
        }
    }
}

TEST_CASE("blind filers never end up worse off under ground truth") {
    const TaxPolicy policy = fixture_policy_2020();
    ProfileDistribution dist;
    dist.p_blind = 1.0;
    for (Scenario scenario : {Scenario::BracketsDeductions, Scenario::BracketsDeductionsEitc}) {
        for (const TaxpayerProfile& blind : sample_profiles(dist, 5, 400)) {
            TaxpayerProfile sighted = counterfactual(blind, FieldEdit::blind(false));
            CHECK(compute_tax(blind, policy, scenario).benefit() >=
                  compute_tax(sighted, policy, scenario).benefit() - 1e-9);
        }
    }
}

TEST_CASE("engine matches the per-dollar oracle on seeded profiles") {
    const TaxPolicy policy = fixture_policy_2020();
    ProfileDistribution dist;
    dist.income_range = {1000.0, 200000.0};
    dist.investment_range = {0.0, 5000.0};
    for (const TaxpayerProfile& p : sample_profiles(dist, 99, 1000)) {
        const double taxable = p.income;
        double engine = compute_bracket_tax(taxable, policy.brackets.for_status(p.status));
        double oracle = oracle_bracket_tax(taxable, policy.brackets.for_status(p.status));
        CHECK(std::fabs(engine - oracle) <= 0.01);
    }
}

TEST_CASE("policy loader enforces the schema") {
    const std::string base = slurp(fixtures_dir() / "policy_2020.json");

    CHECK_THROWS_AS(parse_policy_json("{\"yeah\":1}"), ValidationError);
    CHECK_THROWS_AS(parse_policy_json("not json"), ValidationError);

    // unknown top-level key
    std::string extra = base;
    extra.insert(extra.find_last_of('}'), ",\"extra\":1");
    CHECK_THROWS_AS(parse_policy_json(extra), ValidationError);

    // year below the floor
    std::string old_year = base;
    old_year.replace(old_year.find("2020"), 4, "2017");
    CHECK_THROWS_AS(parse_policy_json(old_year), ValidationError);

    // the fixture itself round-trips
    TaxPolicy policy = parse_policy_json(base);
    CHECK(policy.year == 2020);
    CHECK(std::isinf(policy.brackets.for_status(FilingStatus::Single).back().upper_bound));
    CHECK(policy.eitc.ineligible_statuses.count(FilingStatus::MarriedSeparate) == 1);
    CHECK(policy.eitc.band(3).agi_limit[status_index(FilingStatus::MarriedJoint)] == 56844.0);
}

TEST_SUITE_END();
