#include "taxrank/metamorphic.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "taxrank/errors.hpp"
#include "taxrank/money.hpp"

namespace taxrank {

namespace {

bool requirement_met(ScenarioRequirement req, Scenario scenario) {
    switch (req) {
        case ScenarioRequirement::Deductions: return scenario_has_deductions(scenario);
        case ScenarioRequirement::Eitc: return scenario_has_eitc(scenario);
    }
    return false;
}

const EitcBand& band_for(const RelationContext& ctx, int children) {
    return ctx.policy->eitc.band(children);
}

} // namespace

std::string_view comparator_text(RelationComparator comparator) {
    switch (comparator) {
        case RelationComparator::BenefitGe: return "benefit(x) >= benefit(y)";
        case RelationComparator::BenefitLe: return "benefit(x) <= benefit(y)";
        case RelationComparator::EitcGe: return "eitc(x) >= eitc(y)";
        case RelationComparator::EitcZero: return "eitc(x) = 0";
    }
    return "";
}

std::vector<MetamorphicRelation> builtin_relations() {
    std::vector<MetamorphicRelation> relations;

    {
        MetamorphicRelation r;
        r.name = "blindness_benefit";
        r.requirement = ScenarioRequirement::Deductions;
        r.comparator = RelationComparator::BenefitGe;
        r.strict_under_policy = true;
        r.applicability = [](const TaxpayerProfile& p, const RelationContext&) { return p.blind; };
        r.transform = [](const TaxpayerProfile& p, const RelationContext&) {
            return std::optional<TaxpayerProfile>(counterfactual(p, FieldEdit::blind(false)));
        };
        relations.push_back(std::move(r));
    }

    {
        // Moving AGI just past the limit must not increase the credit. The
        // comparison is on the credit itself: income edits change bracket
        // liability too, so a raw benefit comparison would flag correct
        // engines.
        MetamorphicRelation r;
        r.name = "eitc_agi_cutoff";
        r.requirement = ScenarioRequirement::Eitc;
        r.comparator = RelationComparator::EitcGe;
        r.applicability = [](const TaxpayerProfile& p, const RelationContext& ctx) {
            const EitcBand& band = band_for(ctx, p.qualifying_children);
            return p.income <= band.agi_limit[status_index(p.status)];
        };
        r.transform = [](const TaxpayerProfile& p, const RelationContext& ctx) {
            const EitcBand& band = band_for(ctx, p.qualifying_children);
            double limit = band.agi_limit[status_index(p.status)];
            return std::optional<TaxpayerProfile>(
                counterfactual(p, FieldEdit::income(limit + 1.0)));
        };
        relations.push_back(std::move(r));
    }

    {
        MetamorphicRelation r;
        r.name = "eitc_children_monotone";
        r.requirement = ScenarioRequirement::Eitc;
        r.comparator = RelationComparator::EitcGe;
        r.applicability = [](const TaxpayerProfile& p, const RelationContext& ctx) {
            if (p.qualifying_children < 1) return false;
            const EitcBand& hi = band_for(ctx, p.qualifying_children);
            const EitcBand& lo = band_for(ctx, p.qualifying_children - 1);
            const int idx = status_index(p.status);
            // stay within phase-in/plateau of both bands
            return p.income <= std::min(hi.phaseout_start[idx], lo.phaseout_start[idx]);
        };
        r.transform = [](const TaxpayerProfile& p, const RelationContext&) {
            return std::optional<TaxpayerProfile>(
                counterfactual(p, FieldEdit::children(p.qualifying_children - 1)));
        };
        relations.push_back(std::move(r));
    }

    {
        MetamorphicRelation r;
        r.name = "mfs_exclusion";
        r.requirement = ScenarioRequirement::Eitc;
        r.comparator = RelationComparator::EitcZero;
        r.applicability = [](const TaxpayerProfile& p, const RelationContext&) {
            return p.status == FilingStatus::MarriedSeparate;
        };
        r.transform = nullptr;
        relations.push_back(std::move(r));
    }

    return relations;
}

std::vector<MetamorphicRelation> relations_for_scenario(
    const std::vector<MetamorphicRelation>& relations, Scenario scenario) {
    std::vector<MetamorphicRelation> out;
    for (const MetamorphicRelation& r : relations) {
        if (requirement_met(r.requirement, scenario)) out.push_back(r);
    }
    return out;
}

std::vector<ProfilePair> build_pairs(const MetamorphicRelation& relation,
                                     const std::vector<TaxpayerProfile>& bases,
                                     const RelationContext& ctx) {
    std::vector<ProfilePair> pairs;
    for (std::size_t i = 0; i < bases.size(); ++i) {
        if (!relation.applicability || relation.applicability(bases[i], ctx)) {
            ProfilePair pair;
            pair.index = i;
            pair.x = bases[i];
            if (relation.transform) pair.y = relation.transform(bases[i], ctx);
            pairs.push_back(std::move(pair));
        }
    }
    return pairs;
}

namespace {

// Extracts the compared quantity from a result.
double comparator_value(RelationComparator cmp, const TaxResult& r) {
    switch (cmp) {
        case RelationComparator::BenefitGe:
        case RelationComparator::BenefitLe: return r.benefit();
        case RelationComparator::EitcGe:
        case RelationComparator::EitcZero: return r.eitc_amount;
    }
    return 0.0;
}

std::optional<RelationViolation> check_pair(const SystemUnderTest& sut,
                                            const MetamorphicRelation& relation,
                                            const ProfilePair& pair,
                                            const RelationContext& ctx) {
    RelationViolation v;
    v.relation = relation.name;
    v.comparator = relation.comparator;
    v.pair_index = pair.index;
    v.x = pair.x;
    v.y = pair.y;

    SutOutcome rx = sut(pair.x);
    if (!rx.ok) {
        v.execution_failure = true;
        v.message = "execution failure on x: " + rx.error;
        return v;
    }
    SutOutcome ry;
    if (pair.y) {
        ry = sut(*pair.y);
        if (!ry.ok) {
            v.execution_failure = true;
            v.message = "execution failure on y: " + ry.error;
            return v;
        }
    }

    const double vx = comparator_value(relation.comparator, rx.result);
    const double vy = pair.y ? comparator_value(relation.comparator, ry.result) : 0.0;
    v.observed_x = vx;
    v.observed_y = vy;

    double deficit = 0.0;
    switch (relation.comparator) {
        case RelationComparator::BenefitGe:
        case RelationComparator::EitcGe: deficit = vy - vx; break;
        case RelationComparator::BenefitLe: deficit = vx - vy; break;
        case RelationComparator::EitcZero: deficit = std::fabs(vx); break;
    }
    if (deficit > kComparatorSlack) {
        v.margin = deficit;
        return v;
    }

    if (relation.strict_under_policy && pair.y) {
        const double expected_x =
            comparator_value(relation.comparator, compute_tax(pair.x, *ctx.policy, ctx.scenario));
        const double expected_y =
            comparator_value(relation.comparator, compute_tax(*pair.y, *ctx.policy, ctx.scenario));
        const double expected_gap = expected_x - expected_y;
        const double observed_gap = vx - vy;
        // Raising the slack only removes triggers here, never adds failures.
        if (expected_gap > kComparatorSlack && observed_gap <= 0.0) {
            v.margin = expected_gap - observed_gap;
            v.message = "expected a strict advantage of " + std::to_string(expected_gap) +
                        " on x, observed " + std::to_string(observed_gap);
            return v;
        }
    }
    return std::nullopt;
}

} // namespace

std::vector<RelationViolation> check_relation(const SystemUnderTest& sut,
                                              const MetamorphicRelation& relation,
                                              const std::vector<ProfilePair>& pairs,
                                              const RelationContext& ctx) {
    std::vector<RelationViolation> violations;
    for (const ProfilePair& pair : pairs) {
        if (auto v = check_pair(sut, relation, pair, ctx)) violations.push_back(std::move(*v));
    }
    return violations;
}

SuiteReport run_metamorphic_suite(const SystemUnderTest& sut,
                                  const std::vector<MetamorphicRelation>& relations,
                                  const RelationContext& ctx, const ProfileDistribution& dist,
                                  std::uint64_t seed, std::size_t n_pairs) {
    if (n_pairs < 1) throw ValidationError("metamorphic suite needs n_pairs >= 1");
    if (!ctx.policy) throw ValidationError("metamorphic suite needs a policy context");

    const std::vector<TaxpayerProfile> bases = sample_profiles(dist, seed, n_pairs);

    SuiteReport report;
    report.seed = seed;
    report.n_pairs = n_pairs;

    for (const MetamorphicRelation& relation : relations) {
        RelationReport rel;
        rel.relation = relation.name;

        const std::vector<ProfilePair> pairs = build_pairs(relation, bases, ctx);
        rel.pairs_checked = pairs.size();
        rel.violations = check_relation(sut, relation, pairs, ctx);

        // Base profiles outside the relation's premise satisfy it vacuously;
        // keeping them labeled gives the localizer its pass region.
        std::vector<bool> failed(bases.size(), false);
        for (const RelationViolation& v : rel.violations) failed[v.pair_index] = true;
        rel.labeled.reserve(bases.size());
        for (std::size_t i = 0; i < bases.size(); ++i) {
            rel.labeled.push_back({bases[i], !failed[i]});
        }

        if (!rel.violations.empty()) report.pass = false;
        report.relations.push_back(std::move(rel));
    }
    return report;
}

SystemUnderTest ground_truth_sut(const TaxPolicy& policy, Scenario scenario) {
    TaxPolicy copy = policy;
    return [copy, scenario](const TaxpayerProfile& p) {
        return SutOutcome::success(compute_tax(p, copy, scenario));
    };
}

SystemUnderTest make_sut(const Candidate& candidate, Scenario scenario) {
    if (const MutantBackend* m = candidate.mutant()) {
        MutantBackend backend = *m;
        return [backend](const TaxpayerProfile& p) {
            return SutOutcome::success(eval_mutant(backend, p));
        };
    }
    if (const ExternalBackend* e = candidate.external()) {
        ExternalBackend backend = *e;
        return [backend, scenario](const TaxpayerProfile& p) -> SutOutcome {
            EvalOutcome net_out = run_external(backend, p, scenario);
            if (!net_out.is_ok()) {
                return SutOutcome::failure(std::string(outcome_kind_key(net_out.kind)) +
                                           (net_out.message.empty() ? "" : ": " + net_out.message));
            }
            if (!scenario_has_eitc(scenario)) {
                return SutOutcome::success(make_tax_result(net_out.net, 0.0));
            }
            // Second exchange without the credit isolates the EITC component.
            EvalOutcome liab_out = run_external(backend, p, Scenario::BracketsDeductions);
            if (!liab_out.is_ok()) {
                return SutOutcome::failure(std::string(outcome_kind_key(liab_out.kind)) +
                                           (liab_out.message.empty() ? ""
                                                                     : ": " + liab_out.message));
            }
            double eitc = round_cents(liab_out.net - net_out.net);
            return SutOutcome::success(TaxResult{liab_out.net, eitc, net_out.net});
        };
    }
    std::string id = candidate.id;
    return [id](const TaxpayerProfile&) {
        return SutOutcome::failure("candidate \"" + id + "\" has no executable backend");
    };
}

namespace {

nlohmann::json profile_to_json(const TaxpayerProfile& p) {
    return nlohmann::json{{"income", p.income},
                          {"status", status_code(p.status)},
                          {"age65", p.age_65_or_older},
                          {"blind", p.blind},
                          {"children", p.qualifying_children},
                          {"investment_income", p.investment_income}};
}

} // namespace

std::string suite_report_to_json(const SuiteReport& report) {
    nlohmann::json j;
    j["pass"] = report.pass;
    j["seed"] = report.seed;
    j["n_pairs"] = report.n_pairs;
    j["relations"] = nlohmann::json::array();
    for (const RelationReport& rel : report.relations) {
        nlohmann::json rj;
        rj["relation"] = rel.relation;
        rj["pairs"] = rel.pairs_checked;
        rj["violations"] = nlohmann::json::array();
        for (const RelationViolation& v : rel.violations) {
            nlohmann::json vj;
            vj["pair_index"] = v.pair_index;
            vj["x"] = profile_to_json(v.x);
            if (v.y) vj["y"] = profile_to_json(*v.y);
            vj["observed_x"] = v.observed_x;
            vj["observed_y"] = v.observed_y;
            vj["margin"] = v.margin;
            if (v.execution_failure) {
                vj["execution_failure"] = true;
                vj["message"] = v.message;
            }
            rj["violations"].push_back(std::move(vj));
        }
        rj["labeled"] = nlohmann::json::array();
        for (const LabeledProfile& lp : rel.labeled) {
            rj["labeled"].push_back(
                nlohmann::json{{"profile", profile_to_json(lp.profile)}, {"pass", lp.pass}});
        }
        j["relations"].push_back(std::move(rj));
    }
    return j.dump(2) + "\n";
}

} // namespace taxrank
