#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include <json.hpp>

#include "taxrank/config.hpp"
#include "taxrank/errors.hpp"
#include "taxrank/runner.hpp"

#include "support/test_util.hpp"

#include <sys/wait.h>

using namespace taxrank;
using namespace taxrank::testing;

TEST_SUITE_BEGIN("cli");

namespace {

nlohmann::json base_config_json() {
    nlohmann::json j;
    j["policy_file"] = (fixtures_dir() / "policy_2020.json").string();
    j["scenario"] = "brackets_deductions_eitc";
    j["mode"] = "without_prior_code";
    j["template_file"] = (fixtures_dir() / "prompt_without_prior_code.json").string();
    j["candidates"] = {{"type", "mutant_pool"},
                       {"path", (fixtures_dir() / "pool_mixed.json").string()}};
    j["distribution"] = {{"income_range", {10000.0, 200000.0}},
                         {"p_blind", 0.3},
                         {"investment_range", {0.0, 3000.0}}};
    j["seeds"] = {{"profiles", 42}, {"metamorphic", 1042}};
    j["n_profiles"] = 100;
    j["n_pairs"] = 400;
    return j;
}

RunConfig write_and_load(const nlohmann::json& j, const std::filesystem::path& dir,
                         const CliOverrides& overrides = {}) {
    spit(dir / "config.json", j.dump(2));
    return load_run_config(dir / "config.json", overrides);
}

struct Captured {
    int exit_code = 0;
    std::string out;
    std::string err;
};

template <typename F>
Captured run(F&& f) {
    std::ostringstream out, err;
    Captured c;
    c.exit_code = f(out, err);
    c.out = out.str();
    c.err = err.str();
    return c;
}

} // namespace

TEST_CASE("config loading is strict about keys, seeds, and paths") {
    auto dir = make_temp_dir("config");

    nlohmann::json j = base_config_json();
    j["out_dir"] = (dir / "out").string();
    RunConfig config = write_and_load(j, dir);
    CHECK(config.scenario == Scenario::BracketsDeductionsEitc);
    CHECK(config.seed_profiles == 42);
    CHECK(config.weights.w_sim == 0.6);

    nlohmann::json no_seeds = j;
    no_seeds.erase("seeds");
    CHECK_THROWS_AS(write_and_load(no_seeds, dir), ConfigError);

    nlohmann::json unknown = j;
    unknown["surprise"] = 1;
    CHECK_THROWS_AS(write_and_load(unknown, dir), ConfigError);

    nlohmann::json missing_policy = j;
    missing_policy["policy_file"] = (dir / "nope.json").string();
    CHECK_THROWS_AS(write_and_load(missing_policy, dir), ConfigError);

    std::filesystem::remove_all(dir);
}

TEST_CASE("cli overrides land in the stored config and its hash") {
    auto dir = make_temp_dir("config_hash");
    nlohmann::json j = base_config_json();
    j["out_dir"] = (dir / "out").string();

    RunConfig base = write_and_load(j, dir);
    RunConfig same = write_and_load(j, dir);
    CHECK(config_hash(base) == config_hash(same));

    CliOverrides seeded;
    seeded.seed = 7;
    RunConfig overridden = write_and_load(j, dir, seeded);
    CHECK(overridden.seed_profiles == 7);
    CHECK(overridden.seed_metamorphic == 8);
    CHECK(config_hash(overridden) != config_hash(base));

    CliOverrides weighted;
    weighted.weights = Weights{0.65, 0.35};
    RunConfig w = write_and_load(j, dir, weighted);
    CHECK(w.weights.w_sim == 0.65);

    std::filesystem::remove_all(dir);
}

TEST_CASE("cmd_score writes deterministic artifacts and ranks the clean engine first") {
    auto dir = make_temp_dir("score");
    nlohmann::json j = base_config_json();

    j["out_dir"] = (dir / "a").string();
    RunConfig first = write_and_load(j, dir);
    Captured a = run([&](auto& out, auto& err) { return cmd_score(first, out, err); });
    REQUIRE(a.exit_code == 0);

    j["out_dir"] = (dir / "b").string();
    RunConfig second = write_and_load(j, dir);
    Captured b = run([&](auto& out, auto& err) { return cmd_score(second, out, err); });
    REQUIRE(b.exit_code == 0);

    CHECK(slurp(dir / "a" / "scores.csv") == slurp(dir / "b" / "scores.csv"));
    CHECK(slurp(dir / "a" / "tolerance.csv") == slurp(dir / "b" / "tolerance.csv"));
    CHECK_FALSE(slurp(dir / "a" / "scores.csv").empty());

    // rerunning the identical config reproduces report.json byte-for-byte
    // (artifacts carry no timestamps)
    std::string report_before = slurp(dir / "a" / "report.json");
    j["out_dir"] = (dir / "a").string();
    RunConfig same = write_and_load(j, dir);
    run([&](auto& out, auto& err) { return cmd_score(same, out, err); });
    CHECK(slurp(dir / "a" / "report.json") == report_before);

    // table and CSV agree on ordering; Version 1 (clean) leads
    std::string csv = slurp(dir / "a" / "scores.csv");
    auto first_row = csv.substr(csv.find('\n') + 1);
    CHECK(first_row.rfind("Version 1,", 0) == 0);
    CHECK(a.out.find("Versions") != std::string::npos);
    CHECK(a.out.find("CodeBertScore") != std::string::npos);

    // report metadata carries the recomputable config hash and prng name
    auto report = nlohmann::json::parse(slurp(dir / "a" / "report.json"));
    CHECK(report.at("metadata").at("config_hash") == config_hash(first));
    CHECK(report.at("metadata").at("prng").get<std::string>().find("mt19937_64") !=
          std::string::npos);
    CHECK(report.at("ranking").at(0).at("candidate_id") == "Version 1");
    CHECK(report.at("ranking").at(0).at("ground_truth_matches") == 100);

    std::filesystem::remove_all(dir);
}

TEST_CASE("an unreachable embedding endpoint degrades similarity to zero") {
    auto dir = make_temp_dir("score_degraded");
    nlohmann::json j = base_config_json();
    j["embedding"] = {{"provider", "http"}, {"host", "127.0.0.1"}, {"port", 9}};
    j["n_pairs"] = 50;
    j["out_dir"] = (dir / "out").string();
    RunConfig config = write_and_load(j, dir);

    Captured c = run([&](auto& out, auto& err) { return cmd_score(config, out, err); });
    REQUIRE(c.exit_code == 0);

    auto report = nlohmann::json::parse(slurp(dir / "out" / "report.json"));
    for (const auto& row : report.at("ranking")) {
        CHECK(row.at("similarity") == 0.0);
        CHECK(row.contains("note"));
    }
    // consensus still ranks the clean engine first
    CHECK(report.at("ranking").at(0).at("candidate_id") == "Version 1");
    std::filesystem::remove_all(dir);
}

TEST_CASE("the printed table and scores.csv agree on ordering") {
    auto dir = make_temp_dir("score_order");
    nlohmann::json j = base_config_json();
    j["n_pairs"] = 50;
    j["out_dir"] = (dir / "out").string();
    RunConfig config = write_and_load(j, dir);
    Captured c = run([&](auto& out, auto& err) { return cmd_score(config, out, err); });
    REQUIRE(c.exit_code == 0);

    std::vector<std::string> csv_ids;
    std::istringstream csv(slurp(dir / "out" / "scores.csv"));
    std::string line;
    std::getline(csv, line); // header
    while (std::getline(csv, line)) {
        csv_ids.push_back(line.substr(0, line.find(',')));
    }
    REQUIRE(csv_ids.size() == 5);

    std::size_t last = 0;
    for (const std::string& id : csv_ids) {
        auto at = c.out.find(id + " ");
        REQUIRE(at != std::string::npos);
        CHECK(at > last);
        last = at;
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("cmd_score reports no candidates on an empty fixture dir") {
    auto dir = make_temp_dir("score_empty");
    std::filesystem::create_directories(dir / "empty");
    nlohmann::json j = base_config_json();
    j["candidates"] = {{"type", "fixtures"}, {"path", (dir / "empty").string()}, {"n", 3}};
    j["out_dir"] = (dir / "out").string();
    RunConfig config = write_and_load(j, dir);

    Captured c = run([&](auto& out, auto& err) { return cmd_score(config, out, err); });
    CHECK(c.exit_code == 2);
    CHECK(c.err.find("no candidates") != std::string::npos);
    std::filesystem::remove_all(dir);
}

TEST_CASE("cmd_metatest passes the clean candidate and fails the mfs mutant") {
    auto dir = make_temp_dir("metatest");
    nlohmann::json j = base_config_json();
    j["distribution"] = {{"income_range", {5000.0, 15000.0}},
                         {"investment_range", {0.0, 1000.0}}};

    j["out_dir"] = (dir / "pass").string();
    RunConfig pass_config = write_and_load(j, dir);
    Captured pass = run(
        [&](auto& out, auto& err) { return cmd_metatest(pass_config, "Version 1", out, err); });
    CHECK(pass.exit_code == 0);
    CHECK(pass.out.find("verdict pass") != std::string::npos);
    CHECK(std::filesystem::exists(dir / "pass" / "violations.json"));
    CHECK_FALSE(std::filesystem::exists(dir / "pass" / "feedback.txt"));

    j["out_dir"] = (dir / "fail").string();
    RunConfig fail_config = write_and_load(j, dir);
    Captured fail = run(
        [&](auto& out, auto& err) { return cmd_metatest(fail_config, "Version 4", out, err); });
    CHECK(fail.exit_code == 1);
    CHECK(std::filesystem::exists(dir / "fail" / "tree.txt"));
    std::string feedback = slurp(dir / "fail" / "feedback.txt");
    CHECK(feedback.find("MarriedSeparate") != std::string::npos);
    CHECK(feedback.find("mfs_exclusion") != std::string::npos);

    // determinism of the violations artifact
    j["out_dir"] = (dir / "fail2").string();
    RunConfig again = write_and_load(j, dir);
    run([&](auto& out, auto& err) { return cmd_metatest(again, "Version 4", out, err); });
    CHECK(slurp(dir / "fail" / "violations.json") == slurp(dir / "fail2" / "violations.json"));

    j["out_dir"] = (dir / "unknown").string();
    RunConfig unknown = write_and_load(j, dir);
    Captured missing = run(
        [&](auto& out, auto& err) { return cmd_metatest(unknown, "Version 99", out, err); });
    CHECK(missing.exit_code == 2);
    CHECK(missing.err.find("unknown candidate") != std::string::npos);

    std::filesystem::remove_all(dir);
}

TEST_CASE("cmd_pipeline resolves the two-round fixture scenario") {
    auto dir = make_temp_dir("pipeline");
    nlohmann::json j = base_config_json();
    j["candidates"] = {{"type", "fixtures"},
                       {"path", (fixtures_dir() / "pipeline").string()},
                       {"n", 3},
                       {"build_hook", {{"type", "mutant_header"}}}};
    j["distribution"] = {{"income_range", {5000.0, 15000.0}},
                         {"investment_range", {0.0, 1000.0}}};
    j["n_profiles"] = 60;
    j["n_pairs"] = 300;
    j["max_rounds"] = 3;
    j["out_dir"] = (dir / "out").string();

    RunConfig config = write_and_load(j, dir);
    Captured c = run([&](auto& out, auto& err) { return cmd_pipeline(config, out, err); });
    REQUIRE(c.exit_code == 0);
    CHECK(c.out.find("verdict pass") != std::string::npos);

    auto report = nlohmann::json::parse(slurp(dir / "out" / "report.json"));
    CHECK(report.at("verdict") == "pass");
    CHECK(report.at("rounds_used") == 2);
    CHECK(report.at("rounds").size() == 2);

    std::string feedback = slurp(dir / "out" / "round1" / "feedback.txt");
    CHECK(feedback.find("MarriedSeparate") != std::string::npos);
    CHECK_FALSE(std::filesystem::exists(dir / "out" / "round2" / "feedback.txt"));

    std::filesystem::remove_all(dir);
}

TEST_CASE("cmd_pipeline exhausts rounds into an unresolved verdict") {
    auto dir = make_temp_dir("pipeline_unresolved");

    // only round1 exists and contains faulty candidates only
    for (const auto& entry :
         std::filesystem::directory_iterator(fixtures_dir() / "pipeline" / "round1")) {
        spit(dir / "rounds" / "round1" / entry.path().filename(), slurp(entry.path()));
    }

    nlohmann::json j = base_config_json();
    j["candidates"] = {{"type", "fixtures"},
                       {"path", (dir / "rounds").string()},
                       {"n", 3},
                       {"build_hook", {{"type", "mutant_header"}}}};
    j["distribution"] = {{"income_range", {5000.0, 15000.0}},
                         {"investment_range", {0.0, 1000.0}}};
    j["n_profiles"] = 40;
    j["n_pairs"] = 300;
    j["max_rounds"] = 1;
    j["out_dir"] = (dir / "out").string();

    RunConfig config = write_and_load(j, dir);
    Captured c = run([&](auto& out, auto& err) { return cmd_pipeline(config, out, err); });
    CHECK(c.exit_code == 1);
    auto report = nlohmann::json::parse(slurp(dir / "out" / "report.json"));
    CHECK(report.at("verdict") == "unresolved");

    std::filesystem::remove_all(dir);
}

TEST_CASE("cmd_report reprints an existing run") {
    auto dir = make_temp_dir("report");
    nlohmann::json j = base_config_json();
    j["out_dir"] = (dir / "out").string();
    RunConfig config = write_and_load(j, dir);
    run([&](auto& out, auto& err) { return cmd_score(config, out, err); });

    Captured c = run([&](auto& out, auto& err) { return cmd_report(config, out, err); });
    CHECK(c.exit_code == 0);
    CHECK(c.out.find("Version 1") != std::string::npos);

    nlohmann::json missing = j;
    missing["out_dir"] = (dir / "nowhere").string();
    RunConfig missing_config = write_and_load(missing, dir);
    Captured m = run([&](auto& out, auto& err) { return cmd_report(missing_config, out, err); });
    CHECK(m.exit_code == 2);

    std::filesystem::remove_all(dir);
}

TEST_CASE("the installed binary honors the documented interface") {
    auto dir = make_temp_dir("binary");
    nlohmann::json j = base_config_json();
    j["n_pairs"] = 50;
    j["out_dir"] = (dir / "out").string();
    spit(dir / "config.json", j.dump(2));

    std::string base = std::string(TAXRANK_BIN_PATH);
    std::string cmd = base + " score --config " + (dir / "config.json").string() + " > " +
                      (dir / "stdout.txt").string() + " 2>/dev/null";
    int rc = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(rc));
    CHECK(WEXITSTATUS(rc) == 0);
    CHECK(slurp(dir / "stdout.txt").find("WeightedScore") != std::string::npos);

    std::string bad = base + " score --config " + (dir / "absent.json").string() +
                      " >/dev/null 2>&1";
    int rc_bad = std::system(bad.c_str());
    REQUIRE(WIFEXITED(rc_bad));
    CHECK(WEXITSTATUS(rc_bad) == 2);

    std::filesystem::remove_all(dir);
}

TEST_SUITE_END();
