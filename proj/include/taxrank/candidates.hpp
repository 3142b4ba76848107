#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "taxrank/policy.hpp"
#include "taxrank/profile.hpp"

namespace taxrank {

enum class MutationKind {
    RateShift,          // rotate marginal rates against their bounds
    BlindExtraConstant, // add a constant on top of the blind deduction
    DropBlindDeduction, // ignore the blind flag in the deduction lookup
    AllowMfsEitc,       // skip the filing-status eligibility check
    StalePolicy,        // compute against a prior year's policy
    ClampNearZero,      // map |net| < epsilon to exactly zero
};

struct MutationSpec {
    MutationKind kind = MutationKind::RateShift;
    int offset = 0;     // RateShift, nonzero
    double amount = 0.0; // BlindExtraConstant, > 0
    double epsilon = 0.0; // ClampNearZero, > 0
    std::shared_ptr<const TaxPolicy> stale_policy; // StalePolicy

    static MutationSpec rate_shift(int offset);
    static MutationSpec blind_extra_constant(double amount);
    static MutationSpec drop_blind_deduction();
    static MutationSpec allow_mfs_eitc();
    static MutationSpec stale(std::shared_ptr<const TaxPolicy> prior);
    static MutationSpec clamp_near_zero(double epsilon);

    void validate() const;
};

std::string_view mutation_kind_key(MutationKind kind);

// In-process fault-injected engine.
struct MutantBackend {
    TaxPolicy policy;
    Scenario scenario = Scenario::Brackets;
    std::vector<MutationSpec> specs;
};

// External executable speaking the newline-delimited JSON protocol.
struct ExternalBackend {
    std::string path;
    std::vector<std::string> args;
    int timeout_ms = 5000;
};

struct Candidate {
    std::string id;
    std::string source_text;
    std::variant<std::monostate, MutantBackend, ExternalBackend> backend;

    bool executable() const { return !std::holds_alternative<std::monostate>(backend); }
    const MutantBackend* mutant() const { return std::get_if<MutantBackend>(&backend); }
    const ExternalBackend* external() const { return std::get_if<ExternalBackend>(&backend); }
};

struct EvalOutcome {
    enum class Kind { Ok, Crash, Timeout, ProtocolError };

    Kind kind = Kind::Crash;
    double net = 0.0;    // Ok only
    std::string message; // Crash / ProtocolError

    static EvalOutcome ok(double net);
    static EvalOutcome crash(std::string message);
    static EvalOutcome timeout();
    static EvalOutcome protocol_error(std::string message);

    bool is_ok() const { return kind == Kind::Ok; }
};

std::string_view outcome_kind_key(EvalOutcome::Kind kind);

// Outcome matrix keyed by (candidate index, profile index); candidate order
// follows the pool.
struct EvalMatrix {
    std::vector<std::string> candidate_ids;
    std::vector<std::vector<EvalOutcome>> cells;

    std::size_t candidate_count() const { return candidate_ids.size(); }
    std::size_t profile_count() const { return cells.empty() ? 0 : cells.front().size(); }
    const EvalOutcome& at(std::size_t candidate, std::size_t profile) const {
        return cells[candidate][profile];
    }
};

// Builds a fault-injected candidate whose source text is the rendered
// pseudo-source of the mutated engine. Specs must fit the scenario
// (e.g. AllowMfsEitc needs the EITC scenario).
Candidate make_mutant(const TaxPolicy& policy, Scenario scenario,
                      std::vector<MutationSpec> specs, std::string id);

// The mutated engine itself; identity when specs is empty.
TaxResult eval_mutant(const MutantBackend& backend, const TaxpayerProfile& profile);

// Pseudo-source for a (possibly mutated) engine, with a machine-readable
// mutation header line so fixture files can round-trip into backends.
std::string render_mutant_source(const TaxPolicy& policy, Scenario scenario,
                                 const std::vector<MutationSpec>& specs);

// One request line out, one response line back, timeout enforced.
EvalOutcome run_external(const ExternalBackend& backend, const TaxpayerProfile& profile,
                         Scenario scenario);

EvalOutcome evaluate_candidate(const Candidate& candidate, const TaxpayerProfile& profile,
                               Scenario scenario);

// Fills every cell; external failures are recorded per cell, never fatal.
// max_processes bounds concurrent external evaluations (0 = logical CPUs).
EvalMatrix evaluate_pool(const std::vector<Candidate>& pool,
                         const std::vector<TaxpayerProfile>& profiles, Scenario scenario,
                         int max_processes = 0);

std::string wire_request(const TaxpayerProfile& profile, Scenario scenario);

// Parses `# taxrank-mutations: [...]` from the first lines of a source text.
// Returns nullopt when no header is present.
std::optional<std::vector<MutationSpec>> parse_mutation_header(const std::string& source_text);

// Candidate whose backend comes from the source's mutation header and whose
// source text stays exactly as given. Source-only when no header exists.
Candidate candidate_from_mutant_source(std::string source_text, std::string id,
                                       const TaxPolicy& policy, Scenario scenario);

// Pool / manifest files (see README for the schemas).
std::vector<Candidate> load_mutant_pool_file(const std::filesystem::path& path,
                                             const TaxPolicy& policy, Scenario scenario);
std::vector<Candidate> load_external_manifest(const std::filesystem::path& path);

} // namespace taxrank
