#include "taxrank/feedback.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "taxrank/errors.hpp"
#include "taxrank/money.hpp"

namespace taxrank {

namespace {

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

std::string read_text_file(const std::filesystem::path& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw ConfigError(std::string("cannot open ") + what + ": " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace

PromptMode prompt_mode_from_key(std::string_view key) {
    if (key == "without_prior_code") return PromptMode::WithoutPriorCode;
    if (key == "with_prior_code") return PromptMode::WithPriorCode;
    throw ValidationError("unknown prompt mode: " + std::string(key));
}

std::string_view prompt_mode_key(PromptMode mode) {
    return mode == PromptMode::WithoutPriorCode ? "without_prior_code" : "with_prior_code";
}

PromptTemplate load_prompt_template(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path, "prompt template"));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": not valid JSON: " + e.what());
    }

    PromptTemplate tmpl;
    tmpl.name = j.at("name").get<std::string>();
    const auto& sections = j.at("sections");
    tmpl.objective = sections.at("objective").get<std::string>();
    tmpl.data_structures = sections.at("data_structures").get<std::string>();
    tmpl.user_inputs = sections.at("user_inputs").get<std::string>();
    tmpl.requirements = sections.at("requirements").get<std::string>();
    tmpl.policy_block = sections.at("policy_block").get<std::string>();
    if (sections.contains("reference_code_block") && !sections.at("reference_code_block").is_null()) {
        tmpl.reference_code_block = sections.at("reference_code_block").get<std::string>();
    }
    return tmpl;
}

std::string render_policy_block(const TaxPolicy& policy, Scenario scenario) {
    std::ostringstream out;
    out << policy.year << " Tax Brackets (per filing status, as (upper bound, rate) pairs; "
        << "None marks the top bracket):\n";
    out << "BRACKETS = {\n";
    for (FilingStatus s : kAllStatuses) {
        out << "    \"" << status_key(s) << "\": [";
        const BracketSchedule& schedule = policy.brackets.for_status(s);
        for (std::size_t i = 0; i < schedule.size(); ++i) {
            if (i) out << ", ";
            out << "(" << format_number(schedule[i].upper_bound) << ", "
                << format_number(schedule[i].rate) << ")";
        }
        out << "],\n";
    }
    out << "}\n";

    if (scenario_has_deductions(scenario)) {
        out << "\n" << policy.year
            << " Standard Deductions (keyed by (age 65 or older, blind)):\n";
        out << "DEDUCTIONS = {\n";
        for (FilingStatus s : kAllStatuses) {
            out << "    \"" << status_key(s) << "\": {";
            bool first = true;
            for (bool a65 : {false, true}) {
                for (bool blind : {false, true}) {
                    if (!first) out << ", ";
                    first = false;
                    out << "(" << (a65 ? "True" : "False") << ", "
                        << (blind ? "True" : "False")
                        << "): " << format_number(policy.deductions.lookup(s, a65, blind));
                }
            }
            out << "},\n";
        }
        out << "}\n";
    }

    if (scenario_has_eitc(scenario)) {
        out << "\n" << policy.year << " Earned Income Tax Credit parameters:\n";
        out << "EITC_INVESTMENT_LIMIT = "
            << format_number(policy.eitc.investment_income_limit) << "\n";
        out << "EITC = {\n";
        for (int k = 0; k < 4; ++k) {
            const EitcBand& band = policy.eitc.band(k);
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
        for (FilingStatus s : policy.eitc.ineligible_statuses) {
            out << "Filing status \"" << status_key(s) << "\" is not eligible for the credit.\n";
        }
    }
    return out.str();
}

namespace {

std::string substitute(const std::string& text, const std::map<std::string, std::string>& values,
                       const std::string& section) {
    std::string out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t open = text.find("{{", pos);
        if (open == std::string::npos) {
            out.append(text, pos, std::string::npos);
            break;
        }
        out.append(text, pos, open - pos);
        std::size_t close = text.find("}}", open + 2);
        if (close == std::string::npos) {
            throw RenderError("unterminated placeholder in section \"" + section + "\"");
        }
        std::string key = text.substr(open + 2, close - open - 2);
        auto it = values.find(key);
        if (it == values.end()) {
            throw RenderError("unresolved placeholder {{" + key + "}} in section \"" + section +
                              "\"");
        }
        out += it->second; // substituted values are never re-scanned
        pos = close + 2;
    }
    return out;
}

std::string scenario_goal(Scenario scenario, int year) {
    std::string y = std::to_string(year);
    switch (scenario) {
        case Scenario::Brackets:
            return "tax based on the user's annual income and marital status, incorporating the " +
                   y + " tax brackets";
        case Scenario::BracketsDeductions:
            return "tax based on the user's annual income, marital status, age, and blindness "
                   "status, incorporating the " +
                   y + " tax brackets and standard deductions";
        case Scenario::BracketsDeductionsEitc:
            return "tax based on the user's annual income, marital status, age, blindness status, "
                   "qualifying children, and investment income, incorporating the " +
                   y + " tax brackets, standard deductions, and Earned Income Tax Credit rules";
    }
    return "";
}

std::string structures_list(Scenario scenario) {
    std::string out =
        "- Use dictionaries to map tax brackets for different filing statuses (Single, Married "
        "Filing Jointly, Married Filing Separately, Head of Household).\n"
        "- Ensure keys are accurately used to prevent KeyError and validate their presence "
        "before access.";
    if (scenario_has_deductions(scenario)) {
        out += "\n- Use a dictionary keyed by (age 65 or older, blind) for the standard "
               "deduction amounts of each filing status.";
    }
    if (scenario_has_eitc(scenario)) {
        out += "\n- Use a dictionary keyed by the number of qualifying children (0-3) for the "
               "Earned Income Tax Credit parameters.";
    }
    return out;
}

std::string inputs_list(Scenario scenario) {
    std::string out =
        "- `income`: Collect as a float using input(), representing the user's annual income in "
        "USD.\n"
        "- `marital_status`: Integer (1-4); 1=Single, 2=Married Filing Jointly, 3=Married Filing "
        "Separately, 4=Head of Household.";
    if (scenario_has_deductions(scenario)) {
        out += "\n- `age_65_or_older`: Boolean, true when the filer is 65 or older.\n"
               "- `blind`: Boolean blindness flag.";
    }
    if (scenario_has_eitc(scenario)) {
        out += "\n- `children`: Integer count of qualifying children (0-3).\n"
               "- `investment_income`: Float annual investment income in USD.";
    }
    return out;
}

std::string requirements_list(Scenario scenario) {
    std::string out =
        "- The script must compute the tax using the provided tax brackets.\n"
        "- Output the tax amount in dollars formatted to two decimals (e.g., "
        "print(f\"Tax amount: ${tax:.2f}\")).\n"
        "- Include error handling for user inputs to ensure they are within valid ranges and "
        "formats.";
    if (scenario_has_deductions(scenario)) {
        out += "\n- Subtract the standard deduction for the filing status, age, and blindness "
               "before applying the brackets; taxable income never drops below zero.";
    }
    if (scenario_has_eitc(scenario)) {
        out += "\n- Subtract the Earned Income Tax Credit from the computed tax to produce the "
               "net amount.";
    }
    return out;
}

} // namespace

std::string render_prompt(const PromptTemplate& tmpl, Scenario scenario, const TaxPolicy& policy,
                          PromptMode mode, const std::optional<std::string>& prior_code) {
    if (mode == PromptMode::WithPriorCode) {
        if (!prior_code) throw RenderError("with_prior_code rendering needs prior code text");
        if (!tmpl.reference_code_block) {
            throw RenderError("template \"" + tmpl.name + "\" has no reference code section");
        }
    }

    std::map<std::string, std::string> values;
    values["year"] = std::to_string(policy.year);
    values["prior_year"] = std::to_string(policy.year - 1);
    values["scenario_goal"] = scenario_goal(scenario, policy.year);
    values["structures_list"] = structures_list(scenario);
    values["inputs_list"] = inputs_list(scenario);
    values["requirements_list"] = requirements_list(scenario);
    values["policy_block"] = render_policy_block(policy, scenario);
    if (prior_code) values["reference_code"] = *prior_code;

    std::ostringstream out;
    out << substitute(tmpl.objective, values, "objective") << "\n\n"
        << substitute(tmpl.data_structures, values, "data_structures") << "\n\n"
        << substitute(tmpl.user_inputs, values, "user_inputs") << "\n\n"
        << substitute(tmpl.requirements, values, "requirements") << "\n\n"
        << substitute(tmpl.policy_block, values, "policy_block");
    if (mode == PromptMode::WithPriorCode) {
        out << "\n\n" << substitute(*tmpl.reference_code_block, values, "reference_code_block");
    }
    out << "\n";
    return out.str();
}

namespace {

std::string render_profile_inline(const TaxpayerProfile& p) {
    std::ostringstream out;
    out << "{income=" << format_usd(p.income) << ", status=" << status_code(p.status) << " ("
        << status_display(p.status) << ")"
        << ", age65=" << (p.age_65_or_older ? "true" : "false")
        << ", blind=" << (p.blind ? "true" : "false") << ", children=" << p.qualifying_children
        << ", investment_income=" << format_usd(p.investment_income) << "}";
    return out.str();
}

std::string render_observed(const RelationViolation& v) {
    std::ostringstream out;
    switch (v.comparator) {
        case RelationComparator::BenefitGe:
        case RelationComparator::BenefitLe:
            out << "benefit(x) = " << format_usd(v.observed_x)
                << ", benefit(y) = " << format_usd(v.observed_y);
            break;
        case RelationComparator::EitcGe:
            out << "eitc(x) = " << format_usd(v.observed_x)
                << ", eitc(y) = " << format_usd(v.observed_y);
            break;
        case RelationComparator::EitcZero:
            out << "eitc(x) = " << format_usd(v.observed_x);
            break;
    }
    return out.str();
}

} // namespace

FeedbackPrompt generate_feedback_prompt(const std::string& prior_prompt,
                                        const SuiteReport& report,
                                        const std::vector<ExplainedPath>& paths,
                                        const std::string& candidate_source) {
    bool any = false;
    for (const RelationReport& rel : report.relations) any = any || !rel.violations.empty();
    if (!any) {
        throw ValidationError("feedback prompt needs at least one violation");
    }

    std::ostringstream out;
    if (!prior_prompt.empty()) out << prior_prompt << "\n";
    out << "---\n"
        << "The previous implementation failed metamorphic validation against the policy "
           "above.\n\n";

    out << "Failing relations:\n";
    for (const RelationReport& rel : report.relations) {
        if (rel.violations.empty()) continue;
        out << "- relation " << rel.relation << ": " << rel.violations.size() << "/"
            << rel.pairs_checked << " failing\n";
        const std::size_t n_samples = std::min<std::size_t>(3, rel.violations.size());
        for (std::size_t i = 0; i < n_samples; ++i) {
            const RelationViolation& v = rel.violations[i];
            out << "  - pair " << v.pair_index << ": x = " << render_profile_inline(v.x);
            if (v.y) out << "; y = " << render_profile_inline(*v.y);
            out << "; expected " << comparator_text(v.comparator);
            if (v.execution_failure) {
                out << "; " << v.message;
            } else {
                out << "; observed " << render_observed(v);
            }
            out << "\n";
        }
    }

    out << "\nLocalized failure conditions:\n";
    if (paths.empty()) {
        out << "- (none isolated)\n";
    } else {
        for (const ExplainedPath& path : paths) {
            char stats[64];
            std::snprintf(stats, sizeof(stats), "  [n=%zu, fail_rate=%.2f]", path.n_samples,
                          path.fail_rate);
            out << "- " << path.condition_text << stats << "\n";
        }
    }

    out << "\nFix the implementation so every relation listed above holds, while preserving "
           "the outputs of inputs that already pass. Return the complete corrected program.\n";

    if (!candidate_source.empty()) {
        out << "\nFailing candidate source:\n" << candidate_source;
        if (candidate_source.back() != '\n') out << "\n";
    }
    return FeedbackPrompt{out.str()};
}

std::vector<DigestEntry> parse_feedback_digest(const std::string& text) {
    static const std::regex line_re(R"(^- relation ([^:]+): (\d+)/(\d+) failing$)");
    std::vector<DigestEntry> entries;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::smatch m;
        if (std::regex_match(line, m, line_re)) {
            entries.push_back({m[1].str(), std::stoul(m[2].str()), std::stoul(m[3].str())});
        }
    }
    return entries;
}

namespace {

// Filename order with digit runs compared numerically, so version10 follows
// version9.
bool natural_less(const std::string& a, const std::string& b) {
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (std::isdigit(static_cast<unsigned char>(a[i])) &&
            std::isdigit(static_cast<unsigned char>(b[j]))) {
            std::size_t i2 = i, j2 = j;
            while (i2 < a.size() && std::isdigit(static_cast<unsigned char>(a[i2]))) ++i2;
            while (j2 < b.size() && std::isdigit(static_cast<unsigned char>(b[j2]))) ++j2;
            long long va = std::stoll(a.substr(i, i2 - i));
            long long vb = std::stoll(b.substr(j, j2 - j));
            if (va != vb) return va < vb;
            i = i2;
            j = j2;
        } else {
            if (a[i] != b[j]) return a[i] < b[j];
            ++i;
            ++j;
        }
    }
    return a.size() < b.size();
}

} // namespace

FixtureClient::FixtureClient(std::filesystem::path directory) : directory_(std::move(directory)) {
    if (!std::filesystem::is_directory(directory_)) {
        throw ConfigError("fixture directory does not exist: " + directory_.string());
    }
    for (const auto& entry : std::filesystem::directory_iterator(directory_)) {
        if (entry.is_regular_file()) files_.push_back(entry.path());
    }
    std::sort(files_.begin(), files_.end(),
              [](const std::filesystem::path& a, const std::filesystem::path& b) {
                  return natural_less(a.filename().string(), b.filename().string());
              });
}

std::vector<std::string> FixtureClient::generate(const GenerationRequest& request) {
    if (request.n < 1) throw ValidationError("generation needs n >= 1");
    if (files_.size() < static_cast<std::size_t>(request.n)) {
        throw GenerationError("insufficient fixtures in " + directory_.string() + ": need " +
                              std::to_string(request.n) + ", found " +
                              std::to_string(files_.size()));
    }
    std::vector<std::string> out;
    out.reserve(request.n);
    for (int i = 0; i < request.n; ++i) {
        out.push_back(read_text_file(files_[i], "candidate fixture"));
    }
    return out;
}

std::string FixtureClient::describe() const {
    return "fixture:" + directory_.string();
}

HttpChatClient::HttpChatClient(std::string base_url, std::string model, int retries, bool trace,
                               int timeout_ms)
    : base_url_(std::move(base_url)), model_(std::move(model)), retries_(retries), trace_(trace),
      timeout_ms_(timeout_ms) {}

std::vector<std::string> HttpChatClient::generate(const GenerationRequest& request) {
    if (request.n < 1) throw ValidationError("generation needs n >= 1");

    // Split "scheme://host:port/path" into the client target and the path.
    std::string target = base_url_;
    std::string path = "/v1/chat/completions";
    std::size_t scheme = base_url_.find("://");
    if (scheme != std::string::npos) {
        std::size_t slash = base_url_.find('/', scheme + 3);
        if (slash != std::string::npos) {
            target = base_url_.substr(0, slash);
            path = base_url_.substr(slash);
        }
    }

    httplib::Client client(target);
    client.set_connection_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);
    client.set_read_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);

    httplib::Headers headers;
    if (const char* token = std::getenv("TAXRANK_API_KEY")) {
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }

    nlohmann::json body{{"model", request.model.empty() ? model_ : request.model},
                        {"n", request.n},
                        {"temperature", request.temperature},
                        {"messages", nlohmann::json::array({nlohmann::json{
                                         {"role", "user"}, {"content", request.prompt}}})}};
    const std::string body_text = body.dump();

    if (trace_) {
        std::fprintf(stderr, "[trace] POST %s%s body=%s\n", target.c_str(), path.c_str(),
                     body_text.c_str());
    }

    const int attempts = retries_ + 1;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        auto res = client.Post(path, headers, body_text, "application/json");
        if (!res) {
            if (attempt == attempts) {
                throw GenerationError("generation endpoint unreachable after " +
                                      std::to_string(attempts) + " attempts: " + target);
            }
            continue;
        }
        if (trace_) {
            std::fprintf(stderr, "[trace] response status=%d body=%s\n", res->status,
                         res->body.c_str());
        }
        if (res->status == 401 || res->status == 403) {
            throw GenerationError("generation endpoint rejected the auth token (status " +
                                  std::to_string(res->status) + ")");
        }
        if (res->status != 200) {
            throw GenerationError("generation endpoint returned status " +
                                  std::to_string(res->status));
        }
        nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
        if (j.is_discarded() || !j.contains("choices") || !j.at("choices").is_array()) {
            throw GenerationError("generation endpoint returned a malformed body");
        }
        std::vector<std::string> texts;
        for (const auto& choice : j.at("choices")) {
            texts.push_back(choice.at("message").at("content").get<std::string>());
        }
        if (texts.size() < static_cast<std::size_t>(request.n)) {
            throw GenerationError("generation endpoint returned " +
                                  std::to_string(texts.size()) + " of " +
                                  std::to_string(request.n) + " requested candidates");
        }
        texts.resize(request.n);
        return texts;
    }
    throw GenerationError("unreachable");
}

std::string HttpChatClient::describe() const {
    return "http:" + base_url_ + " model=" + model_;
}

std::vector<Candidate> generate_candidates(GenerationClient& client,
                                           const GenerationRequest& request,
                                           const BuildHook& hook) {
    if (request.n < 1) throw ValidationError("generation needs n >= 1");
    const std::vector<std::string> texts = client.generate(request);

    std::vector<Candidate> pool;
    pool.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        const std::string id = "Version " + std::to_string(i + 1);
        switch (hook.type) {
            case BuildHook::Type::None: {
                Candidate c;
                c.id = id;
                c.source_text = texts[i];
                pool.push_back(std::move(c));
                break;
            }
            case BuildHook::Type::MutantHeader: {
                pool.push_back(
                    candidate_from_mutant_source(texts[i], id, hook.policy, hook.scenario));
                break;
            }
            case BuildHook::Type::Command: {
                if (hook.argv.empty()) throw ConfigError("command build hook needs argv");
                std::filesystem::create_directories(hook.workdir);
                std::filesystem::path src =
                    hook.workdir / ("candidate_" + std::to_string(i + 1) + ".src");
                std::ofstream out(src);
                if (!out) throw ConfigError("cannot write candidate source: " + src.string());
                out << texts[i];
                out.close();

                ExternalBackend backend;
                std::vector<std::string> argv = hook.argv;
                for (std::string& a : argv) {
                    std::size_t at = a.find("{source}");
                    if (at != std::string::npos) a.replace(at, 8, src.string());
                }
                backend.path = argv.front();
                backend.args.assign(argv.begin() + 1, argv.end());
                backend.timeout_ms = hook.timeout_ms;

                Candidate c;
                c.id = id;
                c.source_text = texts[i];
                c.backend = std::move(backend);
                pool.push_back(std::move(c));
                break;
            }
        }
    }
    return pool;
}

} // namespace taxrank
