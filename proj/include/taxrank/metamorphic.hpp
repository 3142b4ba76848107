#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "taxrank/candidates.hpp"
#include "taxrank/policy.hpp"
#include "taxrank/profiles.hpp"

namespace taxrank {

// One evaluation of the system under test; failures (crash, timeout,
// protocol error) are carried instead of thrown so a broken candidate
// still yields a labeled dataset.
struct SutOutcome {
    bool ok = false;
    TaxResult result;
    std::string error;

    static SutOutcome success(TaxResult r) { return {true, r, {}}; }
    static SutOutcome failure(std::string message) { return {false, {}, std::move(message)}; }
};

using SystemUnderTest = std::function<SutOutcome(const TaxpayerProfile&)>;

struct RelationContext {
    const TaxPolicy* policy = nullptr;
    Scenario scenario = Scenario::BracketsDeductionsEitc;
};

enum class RelationComparator {
    BenefitGe, // benefit(x) >= benefit(y)
    BenefitLe, // benefit(x) <= benefit(y)
    EitcGe,    // eitc(x) >= eitc(y)
    EitcZero,  // eitc(x) == 0, unary
};

enum class ScenarioRequirement { Deductions, Eitc };

// Human-readable expectation, e.g. "benefit(x) >= benefit(y)".
std::string_view comparator_text(RelationComparator comparator);

struct MetamorphicRelation {
    std::string name;
    std::function<bool(const TaxpayerProfile&, const RelationContext&)> applicability;
    // Builds the counterfactual; absent for unary relations.
    std::function<std::optional<TaxpayerProfile>(const TaxpayerProfile&, const RelationContext&)>
        transform;
    RelationComparator comparator = RelationComparator::BenefitGe;
    ScenarioRequirement requirement = ScenarioRequirement::Deductions;
    // When set, the pair must also show some strict advantage on x wherever
    // the ground-truth engine grants one beyond the slack. This is what lets
    // the check catch faults that treat x and y identically (e.g. a dropped
    // blind deduction), which a bare >= comparison can never see.
    bool strict_under_policy = false;
};

struct ProfilePair {
    std::size_t index = 0; // position within the sampled base set
    TaxpayerProfile x;
    std::optional<TaxpayerProfile> y;
};

struct RelationViolation {
    std::string relation;
    RelationComparator comparator = RelationComparator::BenefitGe;
    std::size_t pair_index = 0;
    TaxpayerProfile x;
    std::optional<TaxpayerProfile> y;
    double observed_x = 0.0; // benefit or eitc, per the comparator
    double observed_y = 0.0;
    double margin = 0.0; // positive; amount by which the comparator failed
    bool execution_failure = false;
    std::string message;
};

struct LabeledProfile {
    TaxpayerProfile profile;
    bool pass = true;
};

struct RelationReport {
    std::string relation;
    std::size_t pairs_checked = 0; // applicable pairs actually evaluated
    std::vector<RelationViolation> violations;
    std::vector<LabeledProfile> labeled; // every sampled base profile
};

struct SuiteReport {
    std::vector<RelationReport> relations;
    bool pass = true;
    std::uint64_t seed = 0;
    std::size_t n_pairs = 0;
};

// Comparator slack absorbing cent rounding.
inline constexpr double kComparatorSlack = 0.01;

// The built-in relations:
//   blindness_benefit    blind filer never ends up worse off
//   eitc_agi_cutoff      credit never grows when AGI moves past the limit
//   eitc_children_monotone  one more qualifying child never shrinks the credit
//                           (checked within the phase-in/plateau region)
//   mfs_exclusion        married-filing-separately filers get no credit
std::vector<MetamorphicRelation> builtin_relations();

std::vector<MetamorphicRelation> relations_for_scenario(
    const std::vector<MetamorphicRelation>& relations, Scenario scenario);

// Pairs for one relation over a base profile set (applicable bases only).
std::vector<ProfilePair> build_pairs(const MetamorphicRelation& relation,
                                     const std::vector<TaxpayerProfile>& bases,
                                     const RelationContext& ctx);

std::vector<RelationViolation> check_relation(const SystemUnderTest& sut,
                                              const MetamorphicRelation& relation,
                                              const std::vector<ProfilePair>& pairs,
                                              const RelationContext& ctx);

// Samples n_pairs base profiles, runs every relation over them, and labels
// each base profile pass/fail for the localizer. Deterministic given seed.
SuiteReport run_metamorphic_suite(const SystemUnderTest& sut,
                                  const std::vector<MetamorphicRelation>& relations,
                                  const RelationContext& ctx, const ProfileDistribution& dist,
                                  std::uint64_t seed, std::size_t n_pairs);

// Adapters from candidates to SUTs. External candidates recover the credit
// component with a second brackets_deductions call when the scenario has EITC.
SystemUnderTest make_sut(const Candidate& candidate, Scenario scenario);
SystemUnderTest ground_truth_sut(const TaxPolicy& policy, Scenario scenario);

std::string suite_report_to_json(const SuiteReport& report);

} // namespace taxrank
