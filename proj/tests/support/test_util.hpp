#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "taxrank/embedding.hpp"
#include "taxrank/policy.hpp"

#ifndef TAXRANK_FIXTURES_DIR
#define TAXRANK_FIXTURES_DIR "fixtures"
#endif

namespace taxrank::testing {

inline std::filesystem::path fixtures_dir() {
    return TAXRANK_FIXTURES_DIR;
}

inline TaxPolicy fixture_policy_2020() {
    return load_policy_file(fixtures_dir() / "policy_2020.json");
}

inline TaxPolicy fixture_policy_2021() {
    return load_policy_file(fixtures_dir() / "policy_2021.json");
}

// Fresh directory under the system temp root, removed by the caller or left
// for inspection; unique per call.
inline std::filesystem::path make_temp_dir(const std::string& tag) {
    static int counter = 0;
    auto dir = std::filesystem::temp_directory_path() /
               ("taxrank_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++));
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void spit(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
}

// Maps every distinct token to its own basis vector; cosine is 1 for equal
// tokens and 0 otherwise. Used for hand-computable similarity expectations.
class OrthogonalEmbedding : public EmbeddingProvider {
public:
    int dimension() const override { return 64; }

    std::vector<std::vector<double>> embed(const std::vector<std::string>& tokens) override {
        std::vector<std::vector<double>> out;
        for (const std::string& t : tokens) {
            auto [it, inserted] = index_.emplace(t, index_.size());
            std::vector<double> v(64, 0.0);
            v[it->second % 64] = 1.0;
            out.push_back(std::move(v));
        }
        return out;
    }

private:
    std::map<std::string, std::size_t> index_;
};

// Minimal synthetic policy with identical values for all statuses; bracket
// bounds and EITC knobs chosen for hand computation.
inline TaxPolicy tiny_policy() {
    TaxPolicy policy;
    policy.year = 2020;
    BracketSchedule schedule{{10000.0, 0.10},
                             {30000.0, 0.20},
                             {std::numeric_limits<double>::infinity(), 0.30}};
    for (FilingStatus s : kAllStatuses) {
        policy.brackets.by_status[status_index(s)] = schedule;
        for (bool a65 : {false, true}) {
            for (bool blind : {false, true}) {
                policy.deductions.set(s, a65, blind,
                                      5000.0 + (a65 ? 1000.0 : 0.0) + (blind ? 1000.0 : 0.0));
            }
        }
    }
    policy.eitc.investment_income_limit = 3000.0;
    policy.eitc.ineligible_statuses = {FilingStatus::MarriedSeparate};
    for (int k = 0; k < 4; ++k) {
        EitcBand band;
        band.phase_in_rate = 0.4;
        band.max_credit = 3000.0 + 500.0 * k;
        band.phaseout_rate = 0.21;
        band.phaseout_start.fill(20000.0);
        band.agi_limit.fill(40000.0);
        policy.eitc.bands[k] = band;
    }
    policy.validate();
    return policy;
}

} // namespace taxrank::testing
