#include <doctest.h>

#include <cmath>

#include "taxrank/candidates.hpp"
#include "taxrank/errors.hpp"
#include "taxrank/money.hpp"
#include "taxrank/profiles.hpp"

#include "support/test_util.hpp"

using namespace taxrank;
using namespace taxrank::testing;

TEST_SUITE_BEGIN("candidates");

namespace {

const char* stub_path() {
    return TAXRANK_STUB_PATH;
}

std::string policy_2020_path() {
    return (fixtures_dir() / "policy_2020.json").string();
}

ExternalBackend stub_backend(std::initializer_list<std::string> args, int timeout_ms = 3000) {
    ExternalBackend b;
    b.path = stub_path();
    b.args = args;
    b.timeout_ms = timeout_ms;
    return b;
}

TaxpayerProfile single_filer(double income) {
    TaxpayerProfile p;
    p.income = income;
    return p;
}

} // namespace

TEST_CASE("empty mutation list reproduces ground truth") {
    const TaxPolicy policy = fixture_policy_2020();
    Candidate clean = make_mutant(policy, Scenario::BracketsDeductionsEitc, {}, "clean");
    for (const TaxpayerProfile& p : sample_profiles(ProfileDistribution{}, 3, 200)) {
        TaxResult expected = compute_tax(p, policy, Scenario::BracketsDeductionsEitc);
        TaxResult got = eval_mutant(*clean.mutant(), p);
        CHECK(got.net == expected.net);
        CHECK(got.eitc_amount == expected.eitc_amount);
    }
}

TEST_CASE("drop_blind_deduction swaps the table entry") {
    const TaxPolicy policy = fixture_policy_2020();
    Candidate mutant = make_mutant(policy, Scenario::BracketsDeductions,
                                   {MutationSpec::drop_blind_deduction()}, "m");
    TaxpayerProfile blind = single_filer(50000.0);
    blind.blind = true;

    // 12,200 deduction instead of 13,850
    CHECK(eval_mutant(*mutant.mutant(), blind).tax_liability == doctest::Approx(4338.50));
    CHECK(compute_tax(blind, policy, Scenario::BracketsDeductions).tax_liability ==
          doctest::Approx(4140.50));
}

TEST_CASE("allow_mfs_eitc grants the excluded credit") {
    const TaxPolicy policy = fixture_policy_2020();
    Candidate mutant = make_mutant(policy, Scenario::BracketsDeductionsEitc,
                                   {MutationSpec::allow_mfs_eitc()}, "m");
    TaxpayerProfile mfs = single_filer(15000.0);
    mfs.status = FilingStatus::MarriedSeparate;
    mfs.qualifying_children = 1;

    TaxResult got = eval_mutant(*mutant.mutant(), mfs);
    CHECK(got.eitc_amount == doctest::Approx(3584.00));
    CHECK(got.net == doctest::Approx(260.0 - 3584.0));
    CHECK(compute_tax(mfs, policy, Scenario::BracketsDeductionsEitc).eitc_amount == 0.0);
}

TEST_CASE("blind_extra_constant only moves blind profiles") {
    const TaxPolicy policy = fixture_policy_2020();
    Candidate mutant = make_mutant(policy, Scenario::BracketsDeductionsEitc,
                                   {MutationSpec::blind_extra_constant(1650.0)}, "m");
    for (const TaxpayerProfile& p : sample_profiles(ProfileDistribution{}, 17, 300)) {
        double expected = compute_tax(p, policy, Scenario::BracketsDeductionsEitc).net;
        double got = eval_mutant(*mutant.mutant(), p).net;
        if (!p.blind) {
            CHECK(got == expected);
        }
    }
    TaxpayerProfile blind = single_filer(60000.0);
    blind.blind = true;
    CHECK(eval_mutant(*mutant.mutant(), blind).net <
          compute_tax(blind, policy, Scenario::BracketsDeductionsEitc).net);
}

TEST_CASE("rate_shift misaligns marginal rates against the declared table") {
    const TaxPolicy policy = fixture_policy_2020();
    Candidate mutant = make_mutant(policy, Scenario::Brackets, {MutationSpec::rate_shift(1)}, "m");
    const BracketSchedule& declared = policy.brackets.for_status(FilingStatus::Single);

    bool misaligned = false;
    double lower = 0.0;
    for (const BracketRung& rung : declared) {
        if (std::isinf(rung.upper_bound)) break;
        double mid_lo = (lower + rung.upper_bound) / 2.0;
        TaxpayerProfile a = single_filer(mid_lo);
        TaxpayerProfile b = single_filer(mid_lo + 1.0);
        double observed_rate = eval_mutant(*mutant.mutant(), b).tax_liability -
                               eval_mutant(*mutant.mutant(), a).tax_liability;
        if (std::fabs(observed_rate - rung.rate) > 0.005) misaligned = true;
        lower = rung.upper_bound;
    }
    CHECK(misaligned);
}

TEST_CASE("clamp_near_zero flattens small nets") {
    const TaxPolicy policy = tiny_policy();
    Candidate mutant = make_mutant(policy, Scenario::BracketsDeductionsEitc,
                                   {MutationSpec::clamp_near_zero(5.0)}, "m");

    // income 22,440: tax = 1000 + 0.2*(17440 - 10000) = 2488.00,
    // credit = 3000 - 0.21*(22440 - 20000) = 2487.60, net = 0.40.
    TaxpayerProfile near_zero = single_filer(22440.0);
    CHECK(compute_tax(near_zero, policy, Scenario::BracketsDeductionsEitc).net ==
          doctest::Approx(0.40));
    CHECK(eval_mutant(*mutant.mutant(), near_zero).net == 0.0);

    // far from zero the clamp is inert
    TaxpayerProfile far = single_filer(30000.0);
    CHECK(eval_mutant(*mutant.mutant(), far).net ==
          compute_tax(far, policy, Scenario::BracketsDeductionsEitc).net);
}

TEST_CASE("mutation specs are validated against the scenario") {
    const TaxPolicy policy = fixture_policy_2020();
    CHECK_THROWS_AS(
        make_mutant(policy, Scenario::Brackets, {MutationSpec::allow_mfs_eitc()}, "m"),
        ValidationError);
    CHECK_THROWS_AS(
        make_mutant(policy, Scenario::BracketsDeductions, {MutationSpec::allow_mfs_eitc()}, "m"),
        ValidationError);
    CHECK_THROWS_AS(
        make_mutant(policy, Scenario::Brackets, {MutationSpec::drop_blind_deduction()}, "m"),
        ValidationError);
    CHECK_THROWS_AS(make_mutant(policy, Scenario::Brackets, {}, ""), ValidationError);
    CHECK_THROWS_AS(MutationSpec::rate_shift(0), ValidationError);
    CHECK_THROWS_AS(MutationSpec::blind_extra_constant(0.0), ValidationError);
    CHECK_THROWS_AS(MutationSpec::clamp_near_zero(-1.0), ValidationError);
}

TEST_CASE("wire request matches the documented format") {
    TaxpayerProfile p = single_filer(50000.0);
    CHECK(wire_request(p, Scenario::BracketsDeductions) ==
          R"({"income":50000.0,"status":1,"age65":false,"blind":false,"children":0,)"
          R"("investment_income":0.0,"scenario":"brackets_deductions"})");
}

TEST_CASE("run_external against the fixture oracle executable") {
    const TaxPolicy policy = fixture_policy_2020();
    ExternalBackend ok = stub_backend({"--mode", "ok", "--policy", policy_2020_path()});

    TaxpayerProfile p = single_filer(50000.0);
    EvalOutcome out = run_external(ok, p, Scenario::BracketsDeductions);
    REQUIRE(out.is_ok());
    CHECK(out.net == compute_tax(p, policy, Scenario::BracketsDeductions).net);
}

TEST_CASE("run_external failure taxonomy") {
    TaxpayerProfile p = single_filer(50000.0);

    EvalOutcome nan_out =
        run_external(stub_backend({"--mode", "nan"}), p, Scenario::Brackets);
    CHECK(nan_out.kind == EvalOutcome::Kind::ProtocolError);

    EvalOutcome garbage =
        run_external(stub_backend({"--mode", "garbage"}), p, Scenario::Brackets);
    CHECK(garbage.kind == EvalOutcome::Kind::ProtocolError);

    EvalOutcome extra = run_external(stub_backend({"--mode", "extra"}), p, Scenario::Brackets);
    CHECK(extra.kind == EvalOutcome::Kind::ProtocolError);

    EvalOutcome silent = run_external(stub_backend({"--mode", "silent"}), p, Scenario::Brackets);
    CHECK(silent.kind == EvalOutcome::Kind::ProtocolError);

    EvalOutcome crash =
        run_external(stub_backend({"--mode", "crash", "--code", "3"}), p, Scenario::Brackets);
    CHECK(crash.kind == EvalOutcome::Kind::Crash);
    CHECK(crash.message.find("exit 3") != std::string::npos);

    EvalOutcome timeout = run_external(
        stub_backend({"--mode", "sleep", "--ms", "10000"}, 150), p, Scenario::Brackets);
    CHECK(timeout.kind == EvalOutcome::Kind::Timeout);
}

TEST_CASE("evaluate_pool fills every cell and stays deterministic") {
    const TaxPolicy policy = fixture_policy_2020();
    std::vector<Candidate> pool;
    for (int i = 0; i < 3; ++i) {
        pool.push_back(make_mutant(policy, Scenario::BracketsDeductions, {},
                                   "identity " + std::to_string(i + 1)));
    }
    auto profiles = sample_profiles(ProfileDistribution{}, 8, 5);

    EvalMatrix first = evaluate_pool(pool, profiles, Scenario::BracketsDeductions);
    EvalMatrix second = evaluate_pool(pool, profiles, Scenario::BracketsDeductions);
    REQUIRE(first.candidate_count() == 3);
    REQUIRE(first.profile_count() == 5);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < 5; ++i) {
            REQUIRE(first.at(c, i).is_ok());
            CHECK(first.at(c, i).net ==
                  compute_tax(profiles[i], policy, Scenario::BracketsDeductions).net);
            CHECK(first.at(c, i).net == second.at(c, i).net);
        }
    }
}

TEST_CASE("parallel and serial external evaluation agree") {
    const TaxPolicy policy = fixture_policy_2020();
    Candidate external;
    external.id = "stub";
    external.backend =
        ExternalBackend{stub_path(), {"--mode", "ok", "--policy", policy_2020_path()}, 3000};
    std::vector<Candidate> pool{external};
    auto profiles = sample_profiles(ProfileDistribution{}, 4, 6);

    EvalMatrix serial = evaluate_pool(pool, profiles, Scenario::BracketsDeductions, 1);
    EvalMatrix parallel = evaluate_pool(pool, profiles, Scenario::BracketsDeductions, 4);
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        REQUIRE(serial.at(0, i).is_ok());
        REQUIRE(parallel.at(0, i).is_ok());
        CHECK(serial.at(0, i).net == parallel.at(0, i).net);
    }
}

TEST_CASE("a missing executable yields a full row of crashes") {
    const TaxPolicy policy = fixture_policy_2020();
    Candidate broken;
    broken.id = "missing";
    broken.backend = ExternalBackend{"/nonexistent/tool", {}, 1000};
    std::vector<Candidate> pool{make_mutant(policy, Scenario::Brackets, {}, "ok"), broken};

    auto profiles = sample_profiles(ProfileDistribution{}, 9, 3);
    EvalMatrix matrix = evaluate_pool(pool, profiles, Scenario::Brackets);
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        CHECK(matrix.at(1, i).kind == EvalOutcome::Kind::Crash);
    }
}

TEST_CASE("pool evaluation rejects bad input") {
    const TaxPolicy policy = fixture_policy_2020();
    auto profiles = sample_profiles(ProfileDistribution{}, 1, 2);
    std::vector<Candidate> pool;
    CHECK_THROWS_AS(evaluate_pool(pool, profiles, Scenario::Brackets), ValidationError);

    pool.push_back(make_mutant(policy, Scenario::Brackets, {}, "dup"));
    pool.push_back(make_mutant(policy, Scenario::Brackets, {}, "dup"));
    CHECK_THROWS_AS(evaluate_pool(pool, profiles, Scenario::Brackets), ValidationError);
}

TEST_CASE("mutation headers round-trip through rendered sources") {
    const TaxPolicy policy = fixture_policy_2020();
    std::vector<MutationSpec> specs{MutationSpec::rate_shift(2),
                                    MutationSpec::blind_extra_constant(1650.0)};
    std::string source = render_mutant_source(policy, Scenario::BracketsDeductionsEitc, specs);

    auto parsed = parse_mutation_header(source);
    REQUIRE(parsed.has_value());
    REQUIRE(parsed->size() == 2);
    CHECK((*parsed)[0].kind == MutationKind::RateShift);
    CHECK((*parsed)[0].offset == 2);
    CHECK((*parsed)[1].kind == MutationKind::BlindExtraConstant);
    CHECK((*parsed)[1].amount == 1650.0);

    CHECK_FALSE(parse_mutation_header("def f():\n    return 0\n").has_value());
    CHECK_THROWS_AS(parse_mutation_header("# taxrank-mutations: [{\"kind\":\"stale_policy\"}]\n"),
                    ValidationError);
}

TEST_CASE("rendered source reflects the mutations") {
    const TaxPolicy policy = fixture_policy_2020();
    std::string clean = render_mutant_source(policy, Scenario::BracketsDeductionsEitc, {});
    std::string dropped = render_mutant_source(policy, Scenario::BracketsDeductionsEitc,
                                               {MutationSpec::drop_blind_deduction()});
    std::string allowed = render_mutant_source(policy, Scenario::BracketsDeductionsEitc,
                                               {MutationSpec::allow_mfs_eitc()});

    CHECK(clean.find("(age65, blind)") != std::string::npos);
    CHECK(dropped.find("(age65, False)") != std::string::npos);
    CHECK(clean.find("married_separate") != std::string::npos);
    CHECK(allowed.find("eligible = True") != std::string::npos);
    CHECK(clean != dropped);
}

TEST_CASE("candidate_from_mutant_source wires the header to a backend") {
    const TaxPolicy policy = fixture_policy_2020();
    std::string source = render_mutant_source(policy, Scenario::BracketsDeductionsEitc,
                                              {MutationSpec::allow_mfs_eitc()});
    Candidate c =
        candidate_from_mutant_source(source, "v1", policy, Scenario::BracketsDeductionsEitc);
    CHECK(c.executable());
    CHECK(c.mutant() != nullptr);
    CHECK(c.source_text == source);

    Candidate plain = candidate_from_mutant_source("print(1)\n", "v2", policy,
                                                   Scenario::BracketsDeductionsEitc);
    CHECK_FALSE(plain.executable());
}

TEST_CASE("mutant pool fixture loads") {
    const TaxPolicy policy = fixture_policy_2020();
    auto pool = load_mutant_pool_file(fixtures_dir() / "pool_mixed.json", policy,
                                      Scenario::BracketsDeductionsEitc);
    REQUIRE(pool.size() == 5);
    CHECK(pool[0].id == "Version 1");
    CHECK(pool[0].mutant()->specs.empty());
    CHECK(pool[1].mutant()->specs[0].kind == MutationKind::RateShift);
    CHECK(pool[4].mutant()->specs[0].kind == MutationKind::BlindExtraConstant);
    for (const Candidate& c : pool) CHECK_FALSE(c.source_text.empty());
}

TEST_SUITE_END();
