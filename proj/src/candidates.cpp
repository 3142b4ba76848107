#include "taxrank/candidates.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "taxrank/errors.hpp"
#include "taxrank/money.hpp"
#include "taxrank/subprocess.hpp"

namespace taxrank {

namespace {

constexpr const char* kMutationHeaderPrefix = "# taxrank-mutations: ";

std::string format_number(double v) {
    if (std::isinf(v)) return "None";
    char buf[64];
    if (v == std::floor(v) && std::fabs(v) < 1e15) {
        std::snprintf(buf, sizeof(buf), "%.0f", v);
    } else {
        std::snprintf(buf, sizeof(buf), "%.10g", v);
    }
    return buf;
}

BracketSchedule rotate_rates(const BracketSchedule& schedule, int offset) {
    const int n = static_cast<int>(schedule.size());
    BracketSchedule out = schedule;
    for (int i = 0; i < n; ++i) {
        int src = ((i + offset) % n + n) % n;
        out[i].rate = schedule[src].rate;
    }
    return out;
}

struct MutationEffects {
    const TaxPolicy* policy = nullptr;
    int rate_offset = 0;
    bool drop_blind = false;
    bool allow_mfs = false;
    double blind_extra = 0.0;
    double clamp_epsilon = 0.0;
};

MutationEffects collect_effects(const TaxPolicy& policy, const std::vector<MutationSpec>& specs) {
    MutationEffects fx;
    fx.policy = &policy;
    for (const MutationSpec& spec : specs) {
        switch (spec.kind) {
            case MutationKind::RateShift: fx.rate_offset += spec.offset; break;
            case MutationKind::BlindExtraConstant: fx.blind_extra += spec.amount; break;
            case MutationKind::DropBlindDeduction: fx.drop_blind = true; break;
            case MutationKind::AllowMfsEitc: fx.allow_mfs = true; break;
            case MutationKind::StalePolicy: fx.policy = spec.stale_policy.get(); break;
            case MutationKind::ClampNearZero: fx.clamp_epsilon = spec.epsilon; break;
        }
    }
    return fx;
}

} // namespace

MutationSpec MutationSpec::rate_shift(int offset) {
    MutationSpec s;
    s.kind = MutationKind::RateShift;
    s.offset = offset;
    s.validate();
    return s;
}

MutationSpec MutationSpec::blind_extra_constant(double amount) {
    MutationSpec s;
    s.kind = MutationKind::BlindExtraConstant;
    s.amount = amount;
    s.validate();
    return s;
}

MutationSpec MutationSpec::drop_blind_deduction() {
    MutationSpec s;
    s.kind = MutationKind::DropBlindDeduction;
    return s;
}

MutationSpec MutationSpec::allow_mfs_eitc() {
    MutationSpec s;
    s.kind = MutationKind::AllowMfsEitc;
    return s;
}

MutationSpec MutationSpec::stale(std::shared_ptr<const TaxPolicy> prior) {
    MutationSpec s;
    s.kind = MutationKind::StalePolicy;
    s.stale_policy = std::move(prior);
    s.validate();
    return s;
}

MutationSpec MutationSpec::clamp_near_zero(double epsilon) {
    MutationSpec s;
    s.kind = MutationKind::ClampNearZero;
    s.epsilon = epsilon;
    s.validate();
    return s;
}

void MutationSpec::validate() const {
    switch (kind) {
        case MutationKind::RateShift:
            if (offset == 0) throw ValidationError("rate_shift offset must be nonzero");
            break;
        case MutationKind::BlindExtraConstant:
            if (!(amount > 0.0)) throw ValidationError("blind_extra_constant amount must be > 0");
            break;
        case MutationKind::ClampNearZero:
            if (!(epsilon > 0.0)) throw ValidationError("clamp_near_zero epsilon must be > 0");
            break;
        case MutationKind::StalePolicy:
            if (!stale_policy) throw ValidationError("stale_policy needs a prior policy");
            break;
        case MutationKind::DropBlindDeduction:
        case MutationKind::AllowMfsEitc:
            break;
    }
}

std::string_view mutation_kind_key(MutationKind kind) {
    switch (kind) {
        case MutationKind::RateShift: return "rate_shift";
        case MutationKind::BlindExtraConstant: return "blind_extra_constant";
        case MutationKind::DropBlindDeduction: return "drop_blind_deduction";
        case MutationKind::AllowMfsEitc: return "allow_mfs_eitc";
        case MutationKind::StalePolicy: return "stale_policy";
        case MutationKind::ClampNearZero: return "clamp_near_zero";
    }
    throw ValidationError("invalid mutation kind");
}

EvalOutcome EvalOutcome::ok(double net) {
    EvalOutcome o;
    o.kind = Kind::Ok;
    o.net = net;
    return o;
}

EvalOutcome EvalOutcome::crash(std::string message) {
    EvalOutcome o;
    o.kind = Kind::Crash;
    o.message = std::move(message);
    return o;
}

EvalOutcome EvalOutcome::timeout() {
    EvalOutcome o;
    o.kind = Kind::Timeout;
    return o;
}

EvalOutcome EvalOutcome::protocol_error(std::string message) {
    EvalOutcome o;
    o.kind = Kind::ProtocolError;
    o.message = std::move(message);
    return o;
}

std::string_view outcome_kind_key(EvalOutcome::Kind kind) {
    switch (kind) {
        case EvalOutcome::Kind::Ok: return "ok";
        case EvalOutcome::Kind::Crash: return "crash";
        case EvalOutcome::Kind::Timeout: return "timeout";
        case EvalOutcome::Kind::ProtocolError: return "protocol_error";
    }
    throw ValidationError("invalid outcome kind");
}

static void check_specs_for_scenario(const std::vector<MutationSpec>& specs, Scenario scenario) {
    for (const MutationSpec& spec : specs) {
        spec.validate();
        if (spec.kind == MutationKind::AllowMfsEitc && !scenario_has_eitc(scenario)) {
            throw ValidationError("allow_mfs_eitc requires the EITC scenario");
        }
        if ((spec.kind == MutationKind::DropBlindDeduction ||
             spec.kind == MutationKind::BlindExtraConstant) &&
            !scenario_has_deductions(scenario)) {
            throw ValidationError(std::string(mutation_kind_key(spec.kind)) +
                                  " requires a scenario with deductions");
        }
    }
}

Candidate make_mutant(const TaxPolicy& policy, Scenario scenario, std::vector<MutationSpec> specs,
                      std::string id) {
    if (id.empty()) throw ValidationError("candidate id must be nonempty");
    policy.validate();
    check_specs_for_scenario(specs, scenario);

    Candidate c;
    c.id = std::move(id);
    c.source_text = render_mutant_source(policy, scenario, specs);
    c.backend = MutantBackend{policy, scenario, std::move(specs)};
    return c;
}

TaxResult eval_mutant(const MutantBackend& backend, const TaxpayerProfile& profile) {
    profile.validate();
    const MutationEffects fx = collect_effects(backend.policy, backend.specs);
    const TaxPolicy& policy = *fx.policy;

    double taxable = profile.income;
    if (scenario_has_deductions(backend.scenario)) {
        TaxpayerProfile lookup = profile;
        if (fx.drop_blind) lookup.blind = false;
        double deduction = standard_deduction(lookup, policy.deductions);
        if (profile.blind && fx.blind_extra > 0.0) deduction += fx.blind_extra;
        taxable = std::max(0.0, profile.income - deduction);
    }

    BracketSchedule schedule = policy.brackets.for_status(profile.status);
    if (fx.rate_offset != 0) schedule = rotate_rates(schedule, fx.rate_offset);
    double liability = compute_bracket_tax(taxable, schedule);

    double eitc = 0.0;
    if (scenario_has_eitc(backend.scenario)) {
        if (fx.allow_mfs) {
            EitcSchedule relaxed = policy.eitc;
            relaxed.ineligible_statuses.clear();
            eitc = compute_eitc(profile, relaxed);
        } else {
            eitc = compute_eitc(profile, policy.eitc);
        }
    }

    TaxResult result = make_tax_result(liability, eitc);
    if (fx.clamp_epsilon > 0.0 && std::fabs(result.net) < fx.clamp_epsilon) {
        result.net = 0.0;
    }
    return result;
}

std::string render_mutant_source(const TaxPolicy& policy, Scenario scenario,
                                 const std::vector<MutationSpec>& specs) {
    const MutationEffects fx = collect_effects(policy, specs);
    const TaxPolicy& pol = *fx.policy;

    nlohmann::json header = nlohmann::json::array();
    for (const MutationSpec& spec : specs) {
        nlohmann::json j{{"kind", std::string(mutation_kind_key(spec.kind))}};
        if (spec.kind == MutationKind::RateShift) j["offset"] = spec.offset;
        if (spec.kind == MutationKind::BlindExtraConstant) j["amount"] = spec.amount;
        if (spec.kind == MutationKind::ClampNearZero) j["epsilon"] = spec.epsilon;
        if (spec.kind == MutationKind::StalePolicy) j["year"] = spec.stale_policy->year;
        header.push_back(std::move(j));
    }

    std::ostringstream out;
    out << kMutationHeaderPrefix << header.dump() << "\n";
    out << "# Federal income tax calculator, tax year " << pol.year << "\n\n";

    out << "BRACKETS = {\n";
    for (FilingStatus s : kAllStatuses) {
        BracketSchedule schedule = pol.brackets.for_status(s);
        if (fx.rate_offset != 0) schedule = rotate_rates(schedule, fx.rate_offset);
        out << "    \"" << status_key(s) << "\": [";
        for (std::size_t i = 0; i < schedule.size(); ++i) {
            if (i) out << ", ";
            out << "(" << format_number(schedule[i].upper_bound) << ", "
                << format_number(schedule[i].rate) << ")";
        }
        out << "],\n";
    }
    out << "}\n";

    if (scenario_has_deductions(scenario)) {
        out << "\nDEDUCTIONS = {\n";
        for (FilingStatus s : kAllStatuses) {
            out << "    \"" << status_key(s) << "\": {";
            bool first = true;
            for (bool a65 : {false, true}) {
                for (bool blind : {false, true}) {
                    if (!first) out << ", ";
                    first = false;
                    out << "(" << (a65 ? "True" : "False") << ", " << (blind ? "True" : "False")
                        << "): " << format_number(pol.deductions.lookup(s, a65, blind));
                }
            }
            out << "},\n";
        }
        out << "}\n";
    }

    if (scenario_has_eitc(scenario)) {
        out << "\nEITC_INVESTMENT_LIMIT = " << format_number(pol.eitc.investment_income_limit)
            << "\nEITC = {\n";
        for (int k = 0; k < 4; ++k) {
            const EitcBand& band = pol.eitc.band(k);
            out << "    " << k << ": {\"rate_in\": " << format_number(band.phase_in_rate)
                << ", \"max_credit\": " << format_number(band.max_credit)
                << ", \"rate_out\": " << format_number(band.phaseout_rate)
                << ", \"phaseout_start\": {";
            for (FilingStatus s : kAllStatuses) {
                if (s != FilingStatus::Single) out << ", ";
                out << "\"" << status_key(s)
                    << "\": " << format_number(band.phaseout_start[status_index(s)]);
            }
            out << "}, \"agi_limit\": {";
            for (FilingStatus s : kAllStatuses) {
                if (s != FilingStatus::Single) out << ", ";
                out << "\"" << status_key(s)
                    << "\": " << format_number(band.agi_limit[status_index(s)]);
            }
            out << "}},\n";
        }
        out << "}\n";
    }

    out << "\ndef compute_net_tax(income, status, age65, blind, children, investment_income):\n";
    if (scenario_has_deductions(scenario)) {
        if (fx.drop_blind) {
            out << "    deduction = DEDUCTIONS[status][(age65, False)]\n";
        } else {
            out << "    deduction = DEDUCTIONS[status][(age65, blind)]\n";
        }
        if (fx.blind_extra > 0.0) {
            out << "    if blind:\n        deduction = deduction + "
                << format_number(fx.blind_extra) << "\n";
        }
        out << "    taxable = max(0.0, income - deduction)\n";
    } else {
        out << "    taxable = income\n";
    }
    out << "    tax = 0.0\n"
        << "    lower = 0.0\n"
        << "    for bound, rate in BRACKETS[status]:\n"
        << "        upper = float(\"inf\") if bound is None else bound\n"
        << "        if taxable > lower:\n"
        << "            tax = tax + rate * (min(taxable, upper) - lower)\n"
        << "        lower = upper\n";
    if (scenario_has_eitc(scenario)) {
        out << "    credit = 0.0\n";
        if (fx.allow_mfs) {
            out << "    eligible = True\n";
        } else {
            out << "    eligible = status != \"married_separate\"\n";
        }
        out << "    band = EITC[children]\n"
            << "    if eligible and income <= band[\"agi_limit\"][status] and "
               "investment_income <= EITC_INVESTMENT_LIMIT:\n"
            << "        credit = min(band[\"rate_in\"] * income, band[\"max_credit\"])\n"
            << "        credit = credit - band[\"rate_out\"] * max(0.0, income - "
               "band[\"phaseout_start\"][status])\n"
            << "        credit = min(max(credit, 0.0), band[\"max_credit\"])\n"
            << "    net = round(tax, 2) - round(credit, 2)\n";
    } else {
        out << "    net = round(tax, 2)\n";
    }
    if (fx.clamp_epsilon > 0.0) {
        out << "    if abs(net) < " << format_number(fx.clamp_epsilon) << ":\n"
            << "        net = 0.0\n";
    }
    out << "    return net\n";
    return out.str();
}

std::string wire_request(const TaxpayerProfile& profile, Scenario scenario) {
    nlohmann::ordered_json j;
    j["income"] = profile.income;
    j["status"] = status_code(profile.status);
    j["age65"] = profile.age_65_or_older;
    j["blind"] = profile.blind;
    j["children"] = profile.qualifying_children;
    j["investment_income"] = profile.investment_income;
    j["scenario"] = std::string(scenario_key(scenario));
    return j.dump();
}

EvalOutcome run_external(const ExternalBackend& backend, const TaxpayerProfile& profile,
                         Scenario scenario) {
    if (backend.timeout_ms < 1) throw ValidationError("external timeout_ms must be >= 1");

    LineExchange ex = run_line_exchange(backend.path, backend.args,
                                        wire_request(profile, scenario) + "\n",
                                        backend.timeout_ms);
    switch (ex.kind) {
        case LineExchange::Kind::Timeout:
            return EvalOutcome::timeout();
        case LineExchange::Kind::SpawnError:
            return EvalOutcome::crash("spawn failed: " + ex.error);
        case LineExchange::Kind::ExitedNoLine:
            if (ex.exit_code == 0) return EvalOutcome::protocol_error("no response line");
            return EvalOutcome::crash("exit " + std::to_string(ex.exit_code));
        case LineExchange::Kind::Line:
            break;
    }

    nlohmann::json j = nlohmann::json::parse(ex.line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || j.size() != 1 || !j.contains("net") ||
        !j.at("net").is_number()) {
        return EvalOutcome::protocol_error("malformed response: " + ex.line);
    }
    double net = j.at("net").get<double>();
    if (!std::isfinite(net)) {
        return EvalOutcome::protocol_error("non-finite net in response");
    }
    return EvalOutcome::ok(net);
}

EvalOutcome evaluate_candidate(const Candidate& candidate, const TaxpayerProfile& profile,
                               Scenario scenario) {
    if (const MutantBackend* m = candidate.mutant()) {
        return EvalOutcome::ok(eval_mutant(*m, profile).net);
    }
    if (const ExternalBackend* e = candidate.external()) {
        return run_external(*e, profile, scenario);
    }
    return EvalOutcome::crash("no executable backend");
}

EvalMatrix evaluate_pool(const std::vector<Candidate>& pool,
                         const std::vector<TaxpayerProfile>& profiles, Scenario scenario,
                         int max_processes) {
    if (pool.empty()) throw ValidationError("candidate pool is empty");
    if (profiles.empty()) throw ValidationError("profile set is empty");
    std::set<std::string> ids;
    for (const Candidate& c : pool) {
        if (c.id.empty() || !ids.insert(c.id).second) {
            throw ValidationError("candidate ids must be nonempty and unique");
        }
    }

    unsigned workers = max_processes > 0 ? static_cast<unsigned>(max_processes)
                                         : std::max(1u, std::thread::hardware_concurrency());

    EvalMatrix matrix;
    for (const Candidate& c : pool) matrix.candidate_ids.push_back(c.id);
    matrix.cells.resize(pool.size());

    for (std::size_t ci = 0; ci < pool.size(); ++ci) {
        const Candidate& candidate = pool[ci];
        auto& row = matrix.cells[ci];
        row.resize(profiles.size());

        if (candidate.external() && profiles.size() > 1 && workers > 1) {
            std::atomic<std::size_t> next{0};
            auto work = [&] {
                for (;;) {
                    std::size_t i = next.fetch_add(1);
                    if (i >= profiles.size()) return;
                    row[i] = evaluate_candidate(candidate, profiles[i], scenario);
                }
            };
            std::vector<std::thread> threads;
            unsigned n = std::min<std::size_t>(workers, profiles.size());
            threads.reserve(n);
            for (unsigned t = 0; t < n; ++t) threads.emplace_back(work);
            for (auto& t : threads) t.join();
        } else {
            for (std::size_t pi = 0; pi < profiles.size(); ++pi) {
                row[pi] = evaluate_candidate(candidate, profiles[pi], scenario);
            }
        }
    }
    return matrix;
}

std::optional<std::vector<MutationSpec>> parse_mutation_header(const std::string& source_text) {
    std::istringstream in(source_text);
    std::string line;
    // Only scan the leading comment block.
    while (std::getline(in, line)) {
        if (line.rfind(kMutationHeaderPrefix, 0) == 0) {
            nlohmann::json j = nlohmann::json::parse(line.substr(std::strlen(kMutationHeaderPrefix)),
                                                     nullptr, false);
            if (j.is_discarded() || !j.is_array()) {
                throw ValidationError("malformed taxrank-mutations header");
            }
            std::vector<MutationSpec> specs;
            for (const auto& item : j) {
                const std::string kind = item.at("kind").get<std::string>();
                if (kind == "rate_shift") {
                    specs.push_back(MutationSpec::rate_shift(item.at("offset").get<int>()));
                } else if (kind == "blind_extra_constant") {
                    specs.push_back(
                        MutationSpec::blind_extra_constant(item.at("amount").get<double>()));
                } else if (kind == "drop_blind_deduction") {
                    specs.push_back(MutationSpec::drop_blind_deduction());
                } else if (kind == "allow_mfs_eitc") {
                    specs.push_back(MutationSpec::allow_mfs_eitc());
                } else if (kind == "clamp_near_zero") {
                    specs.push_back(
                        MutationSpec::clamp_near_zero(item.at("epsilon").get<double>()));
                } else {
                    throw ValidationError("mutation kind \"" + kind +
                                          "\" is not supported in source headers");
                }
            }
            return specs;
        }
        if (!line.empty() && line[0] != '#') break;
    }
    return std::nullopt;
}

Candidate candidate_from_mutant_source(std::string source_text, std::string id,
                                       const TaxPolicy& policy, Scenario scenario) {
    if (id.empty()) throw ValidationError("candidate id must be nonempty");
    Candidate c;
    c.id = std::move(id);
    c.source_text = std::move(source_text);
    if (auto specs = parse_mutation_header(c.source_text)) {
        check_specs_for_scenario(*specs, scenario);
        c.backend = MutantBackend{policy, scenario, std::move(*specs)};
    }
    return c;
}

namespace {

nlohmann::json load_json_file(const std::filesystem::path& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw ConfigError(std::string("cannot open ") + what + ": " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": not valid JSON: " + e.what());
    }
    return j;
}

} // namespace

std::vector<Candidate> load_mutant_pool_file(const std::filesystem::path& path,
                                             const TaxPolicy& policy, Scenario scenario) {
    nlohmann::json j = load_json_file(path, "mutant pool file");
    if (!j.is_object() || !j.contains("pool") || !j.at("pool").is_array()) {
        throw ConfigError(path.string() + ": expected {\"pool\": [...]}");
    }

    std::vector<Candidate> pool;
    for (const auto& entry : j.at("pool")) {
        std::string id = entry.at("id").get<std::string>();
        std::vector<MutationSpec> specs;
        for (const auto& item : entry.at("mutations")) {
            const std::string kind = item.at("kind").get<std::string>();
            if (kind == "stale_policy") {
                std::filesystem::path prior =
                    path.parent_path() / item.at("policy_file").get<std::string>();
                specs.push_back(MutationSpec::stale(
                    std::make_shared<const TaxPolicy>(load_policy_file(prior))));
            } else {
                nlohmann::json one = nlohmann::json::array({item});
                auto parsed = parse_mutation_header(kMutationHeaderPrefix + one.dump() + "\n");
                specs.push_back(parsed->front());
            }
        }
        pool.push_back(make_mutant(policy, scenario, std::move(specs), std::move(id)));
    }
    if (pool.empty()) throw ConfigError(path.string() + ": pool is empty");
    return pool;
}

std::vector<Candidate> load_external_manifest(const std::filesystem::path& path) {
    nlohmann::json j = load_json_file(path, "external manifest");
    if (!j.is_object() || !j.contains("candidates") || !j.at("candidates").is_array()) {
        throw ConfigError(path.string() + ": expected {\"candidates\": [...]}");
    }

    std::vector<Candidate> pool;
    for (const auto& entry : j.at("candidates")) {
        Candidate c;
        c.id = entry.at("id").get<std::string>();
        ExternalBackend backend;
        std::filesystem::path exe = entry.at("path").get<std::string>();
        if (exe.is_relative()) exe = path.parent_path() / exe;
        backend.path = exe.string();
        if (entry.contains("args")) {
            for (const auto& a : entry.at("args")) backend.args.push_back(a.get<std::string>());
        }
        if (entry.contains("timeout_ms")) backend.timeout_ms = entry.at("timeout_ms").get<int>();
        if (backend.timeout_ms < 1) {
            throw ConfigError(path.string() + ": timeout_ms must be >= 1");
        }
        if (entry.contains("source_file")) {
            std::filesystem::path src = path.parent_path() / entry.at("source_file").get<std::string>();
            std::ifstream in(src);
            if (!in) throw ConfigError("cannot open candidate source: " + src.string());
            std::ostringstream buf;
            buf << in.rdbuf();
            c.source_text = buf.str();
        }
        c.backend = std::move(backend);
        pool.push_back(std::move(c));
    }
    if (pool.empty()) throw ConfigError(path.string() + ": manifest is empty");
    return pool;
}

} // namespace taxrank
