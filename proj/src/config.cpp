#include "taxrank/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "taxrank/errors.hpp"

namespace taxrank {

namespace {

void reject_unknown(const nlohmann::json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key)) {
            throw ConfigError("unknown key \"" + key + "\" in " + where);
        }
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& rel) {
    std::filesystem::path p(rel);
    return p.is_absolute() ? p : base / p;
}

void require_exists(const std::filesystem::path& p, const std::string& what) {
    if (!std::filesystem::exists(p)) {
        throw ConfigError(what + " does not exist: " + p.string());
    }
}

ProfileDistribution parse_distribution(const nlohmann::json& j) {
    reject_unknown(j,
                   {"income_range", "income_scale", "status_weights", "p_age65", "p_blind",
                    "children_weights", "investment_range"},
                   "distribution");
    ProfileDistribution dist;
    if (j.contains("income_range")) {
        dist.income_range = {j.at("income_range").at(0).get<double>(),
                             j.at("income_range").at(1).get<double>()};
    }
    if (j.contains("income_scale")) {
        const std::string scale = j.at("income_scale").get<std::string>();
        if (scale == "log") {
            dist.income_scale = IncomeScale::Log;
        } else if (scale == "linear") {
            dist.income_scale = IncomeScale::Linear;
        } else {
            throw ConfigError("income_scale must be \"log\" or \"linear\"");
        }
    }
    if (j.contains("status_weights")) {
        auto w = j.at("status_weights").get<std::vector<double>>();
        if (w.size() != 4) throw ConfigError("status_weights needs 4 entries");
        std::copy(w.begin(), w.end(), dist.status_weights.begin());
    }
    if (j.contains("p_age65")) dist.p_age65 = j.at("p_age65").get<double>();
    if (j.contains("p_blind")) dist.p_blind = j.at("p_blind").get<double>();
    if (j.contains("children_weights")) {
        auto w = j.at("children_weights").get<std::vector<double>>();
        if (w.size() != 4) throw ConfigError("children_weights needs 4 entries");
        std::copy(w.begin(), w.end(), dist.children_weights.begin());
    }
    if (j.contains("investment_range")) {
        dist.investment_range = {j.at("investment_range").at(0).get<double>(),
                                 j.at("investment_range").at(1).get<double>()};
    }
    dist.validate();
    return dist;
}

CandidateSourceConfig parse_candidates(const nlohmann::json& j,
                                       const std::filesystem::path& base) {
    reject_unknown(j,
                   {"type", "path", "n", "build_hook", "endpoint", "model", "temperature",
                    "retries"},
                   "candidates");
    CandidateSourceConfig c;
    const std::string type = j.at("type").get<std::string>();
    if (type == "mutant_pool") {
        c.type = CandidateSourceConfig::Type::MutantPool;
    } else if (type == "fixtures") {
        c.type = CandidateSourceConfig::Type::Fixtures;
    } else if (type == "externals") {
        c.type = CandidateSourceConfig::Type::Externals;
    } else if (type == "live") {
        c.type = CandidateSourceConfig::Type::Live;
    } else {
        throw ConfigError("candidates.type must be mutant_pool|fixtures|externals|live");
    }

    if (c.type != CandidateSourceConfig::Type::Live) {
        c.path = resolve(base, j.at("path").get<std::string>());
        require_exists(c.path, "candidates.path");
    } else {
        c.endpoint = j.at("endpoint").get<std::string>();
        c.model = j.at("model").get<std::string>();
    }
    if (j.contains("n")) c.n = j.at("n").get<int>();
    if (c.n < 1) throw ConfigError("candidates.n must be >= 1");
    if (j.contains("temperature")) c.temperature = j.at("temperature").get<double>();
    if (j.contains("retries")) c.retries = j.at("retries").get<int>();

    if (j.contains("build_hook") && !j.at("build_hook").is_null()) {
        const auto& h = j.at("build_hook");
        reject_unknown(h, {"type", "argv", "timeout_ms"}, "build_hook");
        const std::string hook = h.at("type").get<std::string>();
        if (hook == "mutant_header") {
            c.hook_type = BuildHook::Type::MutantHeader;
        } else if (hook == "command") {
            c.hook_type = BuildHook::Type::Command;
            c.hook_argv = h.at("argv").get<std::vector<std::string>>();
            if (c.hook_argv.empty()) throw ConfigError("build_hook.argv must be nonempty");
        } else {
            throw ConfigError("build_hook.type must be mutant_header|command");
        }
        if (h.contains("timeout_ms")) c.hook_timeout_ms = h.at("timeout_ms").get<int>();
    }
    return c;
}

EmbeddingConfig parse_embedding(const nlohmann::json& j) {
    reject_unknown(j, {"provider", "host", "port", "path", "dimension"}, "embedding");
    EmbeddingConfig e;
    const std::string provider = j.at("provider").get<std::string>();
    if (provider == "trigram") {
        e.provider = EmbeddingConfig::Provider::Trigram;
    } else if (provider == "http") {
        e.provider = EmbeddingConfig::Provider::Http;
        e.host = j.at("host").get<std::string>();
        e.port = j.at("port").get<int>();
        if (j.contains("path")) e.path = j.at("path").get<std::string>();
        if (j.contains("dimension")) e.dimension = j.at("dimension").get<int>();
    } else {
        throw ConfigError("embedding.provider must be trigram|http");
    }
    return e;
}

} // namespace

RunConfig load_run_config(const std::filesystem::path& path, const CliOverrides& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError(path.string() + ": config must be a JSON object");

    // Overrides become part of the stored config so the recorded hash matches
    // what the run actually used.
    if (overrides.seed) {
        j["seeds"]["profiles"] = *overrides.seed;
        j["seeds"]["metamorphic"] = *overrides.seed + 1;
    }
    if (overrides.weights) {
        j["weights"]["similarity"] = overrides.weights->w_sim;
        j["weights"]["majority_vote"] = overrides.weights->w_mv;
    }
    if (overrides.delta_max) {
        j["delta"]["max"] = *overrides.delta_max;
    }
    if (overrides.out_dir) {
        j["out_dir"] = overrides.out_dir->string();
    }

    reject_unknown(j,
                   {"policy_file", "scenario", "mode", "prior_code_file", "template_file",
                    "reference_files", "candidates", "distribution", "seeds", "n_profiles",
                    "n_pairs", "weights", "delta", "cart", "min_fail_rate", "top_k",
                    "max_rounds", "cent_tolerance", "max_processes", "embedding", "out_dir"},
                   path.string());

    RunConfig config;
    config.config_path = path;
    config.stored = j;
    config.trace = overrides.trace;

    const std::filesystem::path base = path.parent_path();

    config.policy_file = resolve(base, j.at("policy_file").get<std::string>());
    require_exists(config.policy_file, "policy_file");
    config.scenario = scenario_from_key(j.at("scenario").get<std::string>());
    if (j.contains("mode")) config.mode = prompt_mode_from_key(j.at("mode").get<std::string>());

    if (j.contains("prior_code_file")) {
        config.prior_code_file = resolve(base, j.at("prior_code_file").get<std::string>());
        require_exists(*config.prior_code_file, "prior_code_file");
    }
    if (config.mode == PromptMode::WithPriorCode && !config.prior_code_file) {
        throw ConfigError("mode with_prior_code needs prior_code_file");
    }
    if (j.contains("template_file")) {
        config.template_file = resolve(base, j.at("template_file").get<std::string>());
        require_exists(*config.template_file, "template_file");
    }
    if (j.contains("reference_files")) {
        for (const auto& f : j.at("reference_files")) {
            std::filesystem::path p = resolve(base, f.get<std::string>());
            require_exists(p, "reference file");
            config.reference_files.push_back(std::move(p));
        }
    }

    config.candidates = parse_candidates(j.at("candidates"), base);
    if (j.contains("distribution")) config.distribution = parse_distribution(j.at("distribution"));

    if (!j.contains("seeds") || !j.at("seeds").contains("profiles") ||
        !j.at("seeds").contains("metamorphic")) {
        throw ConfigError("seeds.profiles and seeds.metamorphic must be explicit");
    }
    reject_unknown(j.at("seeds"), {"profiles", "metamorphic"}, "seeds");
    config.seed_profiles = j.at("seeds").at("profiles").get<std::uint64_t>();
    config.seed_metamorphic = j.at("seeds").at("metamorphic").get<std::uint64_t>();

    if (j.contains("n_profiles")) config.n_profiles = j.at("n_profiles").get<std::size_t>();
    if (j.contains("n_pairs")) config.n_pairs = j.at("n_pairs").get<std::size_t>();
    if (config.n_profiles < 1 || config.n_pairs < 1) {
        throw ConfigError("n_profiles and n_pairs must be >= 1");
    }

    if (j.contains("weights")) {
        reject_unknown(j.at("weights"), {"similarity", "majority_vote"}, "weights");
        config.weights.w_sim = j.at("weights").at("similarity").get<double>();
        config.weights.w_mv = j.at("weights").at("majority_vote").get<double>();
    }
    config.weights.validate();

    if (j.contains("delta")) {
        reject_unknown(j.at("delta"), {"max", "step"}, "delta");
        if (j.at("delta").contains("max")) config.delta_max = j.at("delta").at("max").get<double>();
        if (j.at("delta").contains("step")) {
            config.delta_step = j.at("delta").at("step").get<double>();
        }
    }

    if (j.contains("cart")) {
        reject_unknown(j.at("cart"), {"max_depth", "min_samples_leaf", "min_gini_gain"}, "cart");
        const auto& c = j.at("cart");
        if (c.contains("max_depth")) config.cart.max_depth = c.at("max_depth").get<int>();
        if (c.contains("min_samples_leaf")) {
            config.cart.min_samples_leaf = c.at("min_samples_leaf").get<std::size_t>();
        }
        if (c.contains("min_gini_gain")) {
            config.cart.min_gini_gain = c.at("min_gini_gain").get<double>();
        }
    }
    if (j.contains("min_fail_rate")) config.min_fail_rate = j.at("min_fail_rate").get<double>();
    if (j.contains("top_k")) config.top_k = j.at("top_k").get<int>();
    if (j.contains("max_rounds")) config.max_rounds = j.at("max_rounds").get<int>();
    if (config.top_k < 1 || config.max_rounds < 1) {
        throw ConfigError("top_k and max_rounds must be >= 1");
    }
    if (j.contains("cent_tolerance")) {
        config.cent_tolerance = j.at("cent_tolerance").get<std::int64_t>();
    }
    if (j.contains("max_processes")) config.max_processes = j.at("max_processes").get<int>();
    if (j.contains("embedding")) config.embedding = parse_embedding(j.at("embedding"));
    if (j.contains("out_dir")) {
        config.out_dir = std::filesystem::path(j.at("out_dir").get<std::string>());
    }
    return config;
}

std::string config_hash(const RunConfig& config) {
    const std::string dump = config.stored.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace taxrank
