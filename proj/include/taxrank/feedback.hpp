#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "taxrank/candidates.hpp"
#include "taxrank/localizer.hpp"
#include "taxrank/metamorphic.hpp"
#include "taxrank/policy.hpp"

namespace taxrank {

enum class PromptMode { WithoutPriorCode, WithPriorCode };

PromptMode prompt_mode_from_key(std::string_view key);
std::string_view prompt_mode_key(PromptMode mode);

// Template prose lives in JSON fixtures; sections render in this fixed
// order: objective, data_structures, user_inputs, requirements,
// policy_block, reference_code_block. Placeholders use {{key}}.
struct PromptTemplate {
    std::string name;
    std::string objective;
    std::string data_structures;
    std::string user_inputs;
    std::string requirements;
    std::string policy_block;
    std::optional<std::string> reference_code_block;
};

PromptTemplate load_prompt_template(const std::filesystem::path& path);

// Policy constants in the list style the prompts expect.
std::string render_policy_block(const TaxPolicy& policy, Scenario scenario);

// Deterministic substitution; throws RenderError on unresolved placeholders
// or when with_prior_code lacks prior code / a reference section.
std::string render_prompt(const PromptTemplate& tmpl, Scenario scenario, const TaxPolicy& policy,
                          PromptMode mode, const std::optional<std::string>& prior_code = {});

struct FeedbackPrompt {
    std::string text;
};

// Digest + localized conditions + fixed repair instruction appended to the
// prior prompt. Requires at least one violation in the report.
FeedbackPrompt generate_feedback_prompt(const std::string& prior_prompt,
                                        const SuiteReport& report,
                                        const std::vector<ExplainedPath>& paths,
                                        const std::string& candidate_source = {});

struct DigestEntry {
    std::string relation;
    std::size_t failed = 0;
    std::size_t checked = 0;
};

// Recovers relation names and counts from a feedback prompt's digest section.
std::vector<DigestEntry> parse_feedback_digest(const std::string& text);

struct GenerationRequest {
    std::string prompt;
    int n = 10;
    double temperature = 1.0;
    std::string model;
};

class GenerationClient {
public:
    virtual ~GenerationClient() = default;

    // Returns exactly n source texts or throws GenerationError.
    virtual std::vector<std::string> generate(const GenerationRequest& request) = 0;
    virtual std::string describe() const = 0;
};

// Deterministic client reading numbered source files from a directory.
class FixtureClient : public GenerationClient {
public:
    explicit FixtureClient(std::filesystem::path directory);

    std::size_t available() const { return files_.size(); }
    std::vector<std::string> generate(const GenerationRequest& request) override;
    std::string describe() const override;

private:
    std::filesystem::path directory_;
    std::vector<std::filesystem::path> files_;
};

// Single-turn chat-completion client. The auth token comes from the
// TAXRANK_API_KEY environment variable; bodies are logged token-redacted
// when trace is enabled.
class HttpChatClient : public GenerationClient {
public:
    HttpChatClient(std::string base_url, std::string model, int retries = 2, bool trace = false,
                   int timeout_ms = 30000);

    std::vector<std::string> generate(const GenerationRequest& request) override;
    std::string describe() const override;

private:
    std::string base_url_;
    std::string model_;
    int retries_;
    bool trace_;
    int timeout_ms_;
};

// How generated source texts become executable candidates.
struct BuildHook {
    enum class Type {
        None,         // source-only candidates (similarity scoring only)
        MutantHeader, // parse the `# taxrank-mutations:` header into a mutant backend
        Command,      // write the source to a file and run argv ({source} substituted)
    };

    Type type = Type::None;
    // MutantHeader context
    TaxPolicy policy;
    Scenario scenario = Scenario::Brackets;
    // Command context
    std::vector<std::string> argv;
    std::filesystem::path workdir;
    int timeout_ms = 5000;
};

// Pool with ids "Version 1".."Version n".
std::vector<Candidate> generate_candidates(GenerationClient& client,
                                           const GenerationRequest& request,
                                           const BuildHook& hook = {});

} // namespace taxrank
