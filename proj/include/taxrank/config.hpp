#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "taxrank/feedback.hpp"
#include "taxrank/localizer.hpp"
#include "taxrank/profiles.hpp"
#include "taxrank/scoring.hpp"
#include "taxrank/types.hpp"

namespace taxrank {

struct CandidateSourceConfig {
    enum class Type { MutantPool, Fixtures, Externals, Live };

    Type type = Type::MutantPool;
    std::filesystem::path path; // pool file | fixtures dir | manifest file
    int n = 10;                 // fixtures / live

    BuildHook::Type hook_type = BuildHook::Type::None;
    std::vector<std::string> hook_argv;
    int hook_timeout_ms = 5000;

    // live generation
    std::string endpoint;
    std::string model;
    double temperature = 1.0;
    int retries = 2;
};

struct EmbeddingConfig {
    enum class Provider { Trigram, Http };

    Provider provider = Provider::Trigram;
    std::string host = "127.0.0.1";
    int port = 0;
    std::string path = "/embed";
    int dimension = 256;
};

struct RunConfig {
    std::filesystem::path config_path;
    nlohmann::json stored; // effective config (CLI overrides applied); hashed for the report

    std::filesystem::path policy_file;
    Scenario scenario = Scenario::Brackets;
    PromptMode mode = PromptMode::WithoutPriorCode;
    std::optional<std::filesystem::path> prior_code_file;
    std::optional<std::filesystem::path> template_file;
    std::vector<std::filesystem::path> reference_files;

    CandidateSourceConfig candidates;
    ProfileDistribution distribution;

    std::uint64_t seed_profiles = 0;
    std::uint64_t seed_metamorphic = 0;
    std::size_t n_profiles = 100;
    std::size_t n_pairs = 1000;

    Weights weights;
    double delta_max = 0.10;
    double delta_step = 0.005;
    CartParams cart;
    double min_fail_rate = 0.8;
    int top_k = 1;
    int max_rounds = 3;
    std::int64_t cent_tolerance = 0;
    int max_processes = 0;

    EmbeddingConfig embedding;
    std::filesystem::path out_dir = "out";
    bool trace = false;
};

struct CliOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<Weights> weights;
    std::optional<double> delta_max;
    std::optional<std::filesystem::path> out_dir;
    bool trace = false;
};

// Strict loader: unknown keys are rejected, seeds must be explicit, and every
// referenced path must exist. Relative paths resolve against the config file.
RunConfig load_run_config(const std::filesystem::path& path, const CliOverrides& overrides = {});

// FNV-1a 64 over the canonical dump of the stored config.
std::string config_hash(const RunConfig& config);

} // namespace taxrank
