#include "taxrank/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "taxrank/errors.hpp"
#include "taxrank/money.hpp"

namespace taxrank {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                  const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key)) {
            throw ValidationError("unknown key \"" + key + "\" in " + where);
        }
    }
}

} // namespace

void validate_schedule(const BracketSchedule& schedule) {
    if (schedule.empty()) {
        throw ValidationError("bracket schedule is empty");
    }
    double prev = -kInf;
    for (const BracketRung& rung : schedule) {
        if (!(rung.upper_bound > prev)) {
            throw ValidationError("bracket upper bounds must be strictly increasing");
        }
        if (!(rung.rate > 0.0) || !(rung.rate < 1.0)) {
            throw ValidationError("bracket rates must lie in (0,1)");
        }
        prev = rung.upper_bound;
    }
    if (!std::isinf(schedule.back().upper_bound)) {
        throw ValidationError("final bracket bound must be infinite");
    }
}

void BracketTable::validate() const {
    for (FilingStatus s : kAllStatuses) {
        validate_schedule(for_status(s));
    }
}

void DeductionTable::validate() const {
    for (FilingStatus s : kAllStatuses) {
        for (int flags = 0; flags < 4; ++flags) {
            double v = amounts[status_index(s)][flags];
            if (!std::isfinite(v) || v < 0.0) {
                throw ValidationError("deduction amounts must be finite and nonnegative");
            }
        }
        // Ground-truth monotonicity: each extra condition never reduces the deduction.
        if (lookup(s, true, false) < lookup(s, false, false) ||
            lookup(s, false, true) < lookup(s, false, false) ||
            lookup(s, true, true) < lookup(s, true, false) ||
            lookup(s, true, true) < lookup(s, false, true)) {
            throw ValidationError("deductions must be nondecreasing in age/blind flags");
        }
    }
}

void EitcSchedule::validate() const {
    if (!std::isfinite(investment_income_limit) || investment_income_limit < 0.0) {
        throw ValidationError("investment income limit must be finite and nonnegative");
    }
    for (const EitcBand& band : bands) {
        if (!(band.phase_in_rate > 0.0) || !(band.phase_in_rate < 1.0) ||
            !(band.phaseout_rate > 0.0) || !(band.phaseout_rate < 1.0)) {
            throw ValidationError("EITC rates must lie in (0,1)");
        }
        if (!std::isfinite(band.max_credit) || band.max_credit < 0.0) {
            throw ValidationError("EITC max credit must be finite and nonnegative");
        }
        for (int i = 0; i < 4; ++i) {
            if (band.agi_limit[i] < band.phaseout_start[i]) {
                throw ValidationError("EITC AGI limit must be at or above phaseout start");
            }
        }
    }
    if (!ineligible_statuses.count(FilingStatus::MarriedSeparate)) {
        throw ValidationError("ground-truth EITC schedules must exclude married_separate");
    }
}

void TaxPolicy::validate() const {
    if (year < 2018) {
        throw ValidationError("policy year must be >= 2018");
    }
    brackets.validate();
    deductions.validate();
    eitc.validate();
}

double compute_bracket_tax(double taxable_income, const BracketSchedule& schedule) {
    if (!std::isfinite(taxable_income) || taxable_income < 0.0) {
        throw ValidationError("taxable income must be finite and nonnegative");
    }
    validate_schedule(schedule);
    double tax = 0.0;
    double lower = 0.0;
    for (const BracketRung& rung : schedule) {
        if (taxable_income <= lower) break;
        double span = std::min(taxable_income, rung.upper_bound) - lower;
        tax += span * rung.rate;
        lower = rung.upper_bound;
    }
    return round_cents(tax);
}

double standard_deduction(const TaxpayerProfile& profile, const DeductionTable& table) {
    profile.validate();
    double amount = table.lookup(profile.status, profile.age_65_or_older, profile.blind);
    if (!std::isfinite(amount) || amount < 0.0) {
        throw ValidationError("deduction table has no valid entry for this profile");
    }
    return amount;
}

double compute_eitc(const TaxpayerProfile& profile, const EitcSchedule& schedule) {
    profile.validate();
    if (schedule.ineligible_statuses.count(profile.status)) return 0.0;
    const EitcBand& band = schedule.band(profile.qualifying_children);
    const int idx = status_index(profile.status);
    const double agi = profile.income;
    if (agi > band.agi_limit[idx]) return 0.0;
    if (profile.investment_income > schedule.investment_income_limit) return 0.0;

    double credit = std::min(band.phase_in_rate * profile.income, band.max_credit);
    credit -= band.phaseout_rate * std::max(0.0, agi - band.phaseout_start[idx]);
    credit = std::clamp(credit, 0.0, band.max_credit);
    return round_cents(credit);
}

TaxResult compute_tax(const TaxpayerProfile& profile, const TaxPolicy& policy, Scenario scenario) {
    profile.validate();
    double taxable = profile.income;
    if (scenario_has_deductions(scenario)) {
        taxable = std::max(0.0, profile.income - standard_deduction(profile, policy.deductions));
    }
    double liability = compute_bracket_tax(taxable, policy.brackets.for_status(profile.status));
    double eitc = 0.0;
    if (scenario_has_eitc(scenario)) {
        eitc = compute_eitc(profile, policy.eitc);
    }
    return make_tax_result(liability, eitc);
}

namespace {

double money_value(const nlohmann::json& j, const std::string& where) {
    if (!j.is_number()) {
        throw ValidationError(where + " must be a number");
    }
    double v = j.get<double>();
    if (!std::isfinite(v)) {
        throw ValidationError(where + " must be finite");
    }
    return v;
}

BracketTable parse_brackets(const nlohmann::json& j, const std::string& origin) {
    if (!j.is_object()) throw ValidationError(origin + ": \"brackets\" must be an object");
    std::set<std::string> allowed;
    for (FilingStatus s : kAllStatuses) allowed.insert(std::string(status_key(s)));
    require_keys(j, allowed, origin + " brackets");

    BracketTable table;
    for (FilingStatus s : kAllStatuses) {
        const std::string key(status_key(s));
        if (!j.contains(key)) {
            throw ValidationError(origin + ": brackets missing status \"" + key + "\"");
        }
        const auto& rows = j.at(key);
        if (!rows.is_array()) {
            throw ValidationError(origin + ": brackets." + key + " must be an array");
        }
        BracketSchedule schedule;
        for (const auto& row : rows) {
            if (!row.is_array() || row.size() != 2) {
                throw ValidationError(origin + ": bracket entries are [upper_bound_or_null, rate]");
            }
            BracketRung rung;
            rung.upper_bound = row[0].is_null() ? kInf
                                                : money_value(row[0], origin + " bracket bound");
            rung.rate = money_value(row[1], origin + " bracket rate");
            schedule.push_back(rung);
        }
        table.by_status[status_index(s)] = std::move(schedule);
    }
    table.validate();
    return table;
}

// Deduction cells are keyed "a65=<bool>,blind=<bool>".
std::pair<bool, bool> parse_deduction_key(const std::string& key) {
    bool a65 = false;
    bool blind = false;
    if (key == "a65=false,blind=false") {
        a65 = false, blind = false;
    } else if (key == "a65=true,blind=false") {
        a65 = true, blind = false;
    } else if (key == "a65=false,blind=true") {
        a65 = false, blind = true;
    } else if (key == "a65=true,blind=true") {
        a65 = true, blind = true;
    } else {
        throw ValidationError("bad deduction key \"" + key +
                              "\" (expected \"a65=<bool>,blind=<bool>\")");
    }
    return {a65, blind};
}

DeductionTable parse_deductions(const nlohmann::json& j, const std::string& origin) {
    if (!j.is_object()) throw ValidationError(origin + ": \"deductions\" must be an object");
    std::set<std::string> allowed;
    for (FilingStatus s : kAllStatuses) allowed.insert(std::string(status_key(s)));
    require_keys(j, allowed, origin + " deductions");

    DeductionTable table;
    for (auto& row : table.amounts) row.fill(std::numeric_limits<double>::quiet_NaN());

    for (FilingStatus s : kAllStatuses) {
        const std::string key(status_key(s));
        if (!j.contains(key)) {
            throw ValidationError(origin + ": deductions missing status \"" + key + "\"");
        }
        const auto& cells = j.at(key);
        if (!cells.is_object() || cells.size() != 4) {
            throw ValidationError(origin + ": deductions." + key +
                                  " must map all four (a65, blind) combinations");
        }
        for (const auto& [cell_key, amount] : cells.items()) {
            auto [a65, blind] = parse_deduction_key(cell_key);
            table.set(s, a65, blind, money_value(amount, origin + " deduction amount"));
        }
    }
    table.validate();
    return table;
}

EitcSchedule parse_eitc(const nlohmann::json& j, const std::string& origin) {
    if (!j.is_object()) throw ValidationError(origin + ": \"eitc\" must be an object");
    require_keys(j, {"investment_income_limit", "ineligible_statuses", "children"},
                 origin + " eitc");

    EitcSchedule schedule;
    schedule.investment_income_limit =
        money_value(j.at("investment_income_limit"), origin + " investment_income_limit");

    for (const auto& s : j.at("ineligible_statuses")) {
        schedule.ineligible_statuses.insert(status_from_key(s.get<std::string>()));
    }

    const auto& bands = j.at("children");
    if (!bands.is_array() || bands.size() != 4) {
        throw ValidationError(origin + ": eitc.children must list counts 0..3");
    }
    std::array<bool, 4> seen{};
    for (const auto& band_json : bands) {
        require_keys(band_json,
                     {"count", "phase_in_rate", "max_credit", "phaseout_rate",
                      "phaseout_start", "agi_limit"},
                     origin + " eitc band");
        int count = band_json.at("count").get<int>();
        if (count < 0 || count > 3 || seen[count]) {
            throw ValidationError(origin + ": eitc band counts must cover 0..3 once each");
        }
        seen[count] = true;
        EitcBand& band = schedule.bands[count];
        band.phase_in_rate = money_value(band_json.at("phase_in_rate"), origin + " phase_in_rate");
        band.max_credit = money_value(band_json.at("max_credit"), origin + " max_credit");
        band.phaseout_rate = money_value(band_json.at("phaseout_rate"), origin + " phaseout_rate");
        for (FilingStatus s : kAllStatuses) {
            const std::string key(status_key(s));
            band.phaseout_start[status_index(s)] =
                money_value(band_json.at("phaseout_start").at(key), origin + " phaseout_start");
            band.agi_limit[status_index(s)] =
                money_value(band_json.at("agi_limit").at(key), origin + " agi_limit");
        }
    }
    schedule.validate();
    return schedule;
}

} // namespace

TaxPolicy parse_policy_json(const std::string& text, const std::string& origin) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(origin + ": not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ValidationError(origin + ": policy file must be a JSON object");
    require_keys(j, {"year", "brackets", "deductions", "eitc"}, origin);
    for (const char* key : {"year", "brackets", "deductions", "eitc"}) {
        if (!j.contains(key)) {
            throw ValidationError(origin + ": missing top-level key \"" + std::string(key) + "\"");
        }
    }

    TaxPolicy policy;
    policy.year = j.at("year").get<int>();
    policy.brackets = parse_brackets(j.at("brackets"), origin);
    policy.deductions = parse_deductions(j.at("deductions"), origin);
    policy.eitc = parse_eitc(j.at("eitc"), origin);
    policy.validate();
    return policy;
}

TaxPolicy load_policy_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open policy file: " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_policy_json(buf.str(), path.string());
}

} // namespace taxrank
