#include "taxrank/runner.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "taxrank/errors.hpp"
#include "taxrank/money.hpp"
#include "taxrank/version.hpp"

namespace taxrank {

namespace {

std::string read_text_file(const std::filesystem::path& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw ConfigError(std::string("cannot open ") + what + ": " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

// Everything a subcommand needs that is derived from config once.
struct RunInputs {
    TaxPolicy policy;
    std::vector<std::string> references;
    std::string base_prompt; // rendered when a template is configured
    std::unique_ptr<EmbeddingProvider> provider;
};

std::unique_ptr<EmbeddingProvider> make_provider(const RunConfig& config) {
    if (config.embedding.provider == EmbeddingConfig::Provider::Http) {
        return std::make_unique<HttpEmbeddingProvider>(config.embedding.host,
                                                       config.embedding.port,
                                                       config.embedding.path,
                                                       config.embedding.dimension);
    }
    return std::make_unique<TrigramEmbedding>();
}

RunInputs prepare_inputs(const RunConfig& config) {
    RunInputs inputs;
    inputs.policy = load_policy_file(config.policy_file);
    inputs.provider = make_provider(config);

    std::optional<std::string> prior_code;
    if (config.prior_code_file) {
        prior_code = read_text_file(*config.prior_code_file, "prior code file");
    }

    // Similarity references: prior-year code when present, the policy
    // constants, the clean engine source for mutant pools, plus any
    // configured extras.
    if (config.mode == PromptMode::WithPriorCode && prior_code) {
        inputs.references.push_back(*prior_code);
    }
    inputs.references.push_back(render_policy_block(inputs.policy, config.scenario));
    if (config.candidates.type == CandidateSourceConfig::Type::MutantPool ||
        config.candidates.hook_type == BuildHook::Type::MutantHeader) {
        inputs.references.push_back(render_mutant_source(inputs.policy, config.scenario, {}));
    }
    for (const auto& f : config.reference_files) {
        inputs.references.push_back(read_text_file(f, "reference file"));
    }

    if (config.template_file) {
        PromptTemplate tmpl = load_prompt_template(*config.template_file);
        inputs.base_prompt =
            render_prompt(tmpl, config.scenario, inputs.policy, config.mode, prior_code);
    }
    return inputs;
}

BuildHook make_hook(const RunConfig& config, const RunInputs& inputs,
                    const std::filesystem::path& workdir) {
    BuildHook hook;
    hook.type = config.candidates.hook_type;
    hook.policy = inputs.policy;
    hook.scenario = config.scenario;
    hook.argv = config.candidates.hook_argv;
    hook.workdir = workdir;
    hook.timeout_ms = config.candidates.hook_timeout_ms;
    return hook;
}

std::unique_ptr<GenerationClient> make_live_client(const RunConfig& config) {
    return std::make_unique<HttpChatClient>(config.candidates.endpoint, config.candidates.model,
                                            config.candidates.retries, config.trace);
}

GenerationRequest make_request(const RunConfig& config, const std::string& prompt) {
    GenerationRequest request;
    request.prompt = prompt;
    request.n = config.candidates.n;
    request.temperature = config.candidates.temperature;
    request.model = config.candidates.model;
    return request;
}

std::vector<Candidate> build_pool(const RunConfig& config, const RunInputs& inputs) {
    switch (config.candidates.type) {
        case CandidateSourceConfig::Type::MutantPool:
            return load_mutant_pool_file(config.candidates.path, inputs.policy, config.scenario);
        case CandidateSourceConfig::Type::Externals:
            return load_external_manifest(config.candidates.path);
        case CandidateSourceConfig::Type::Fixtures: {
            FixtureClient client(config.candidates.path);
            if (client.available() == 0) throw ConfigError("no candidates");
            BuildHook hook = make_hook(config, inputs, config.out_dir / "generated");
            return generate_candidates(client, make_request(config, inputs.base_prompt), hook);
        }
        case CandidateSourceConfig::Type::Live: {
            auto client = make_live_client(config);
            BuildHook hook = make_hook(config, inputs, config.out_dir / "generated");
            return generate_candidates(*client, make_request(config, inputs.base_prompt), hook);
        }
    }
    throw ConfigError("unknown candidate source type");
}

struct ScoringResult {
    std::vector<ScoreCard> ranked;
    EvalMatrix matrix;
    std::vector<double> oracle_nets;
};

ScoringResult score_candidates(const RunConfig& config, const RunInputs& inputs,
                               const std::vector<Candidate>& pool,
                               const std::vector<TaxpayerProfile>& profiles) {
    ScoringResult result;
    result.matrix = evaluate_pool(pool, profiles, config.scenario, config.max_processes);

    result.oracle_nets.reserve(profiles.size());
    for (const TaxpayerProfile& p : profiles) {
        result.oracle_nets.push_back(compute_tax(p, inputs.policy, config.scenario).net);
    }

    const auto mv = majority_vote_scores(result.matrix, config.cent_tolerance);
    const auto grid = default_delta_grid(config.delta_max, config.delta_step);

    std::vector<ScoreCard> cards;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        ScoreCard card;
        card.candidate_id = pool[i].id;
        card.majority_vote = mv.at(pool[i].id);
        if (pool[i].source_text.empty()) {
            card.similarity = 0.0;
            card.scoring_note = "no source text";
        } else {
            try {
                card.similarity =
                    similarity_score(pool[i].source_text, inputs.references, *inputs.provider);
            } catch (const std::exception& e) {
                card.similarity = 0.0;
                card.scoring_note = std::string("similarity scoring failed: ") + e.what();
            }
        }
        card.weighted = weighted_score(card.similarity, card.majority_vote, config.weights);
        card.tolerance_curve =
            ground_truth_curve(result.matrix.cells[i], result.oracle_nets, grid);
        card.ground_truth_total = static_cast<long>(profiles.size());
        card.ground_truth_matches = std::lround(card.tolerance_curve.front().accuracy *
                                                static_cast<double>(profiles.size()));
        cards.push_back(std::move(card));
    }
    result.ranked = rank(std::move(cards));
    return result;
}

std::string scores_csv(const std::vector<ScoreCard>& ranked) {
    std::ostringstream out;
    out << "candidate_id,similarity,majority_vote,weighted,ground_truth_matches,"
           "ground_truth_total\n";
    for (const ScoreCard& c : ranked) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.3f,%ld,%ld", c.similarity, c.majority_vote,
                      c.weighted, c.ground_truth_matches, c.ground_truth_total);
        out << c.candidate_id << "," << buf << "\n";
    }
    return out.str();
}

std::string tolerance_csv(const std::vector<ScoreCard>& ranked) {
    std::ostringstream out;
    out << "candidate_id,delta,accuracy\n";
    for (const ScoreCard& c : ranked) {
        for (const TolerancePoint& p : c.tolerance_curve) {
            char buf[96];
            std::snprintf(buf, sizeof(buf), "%.4f,%.6f", p.delta, p.accuracy);
            out << c.candidate_id << "," << buf << "\n";
        }
    }
    return out.str();
}

void print_ranking_table(const std::vector<ScoreCard>& ranked, std::ostream& out) {
    char line[256];
    std::snprintf(line, sizeof(line), "%-14s %14s %18s %14s %20s", "Versions", "CodeBertScore",
                  "MajorityVoteScore", "WeightedScore", "Ground Truth Score");
    out << line << "\n";
    for (const ScoreCard& c : ranked) {
        std::string gt = std::to_string(c.ground_truth_matches) + "/" +
                         std::to_string(c.ground_truth_total);
        std::snprintf(line, sizeof(line), "%-14s %14.3f %18.3f %14.3f %20s",
                      c.candidate_id.c_str(), c.similarity, c.majority_vote, c.weighted,
                      gt.c_str());
        out << line << "\n";
    }
}

nlohmann::json card_to_json(const ScoreCard& c) {
    nlohmann::json j;
    j["candidate_id"] = c.candidate_id;
    j["similarity"] = c.similarity;
    j["majority_vote"] = c.majority_vote;
    j["weighted"] = c.weighted;
    j["ground_truth_matches"] = c.ground_truth_matches;
    j["ground_truth_total"] = c.ground_truth_total;
    if (!c.scoring_note.empty()) j["note"] = c.scoring_note;
    return j;
}

nlohmann::json metadata_json(const RunConfig& config) {
    nlohmann::json j;
    j["tool"] = std::string(kToolName);
    j["tool_version"] = std::string(kToolVersion);
    j["prng"] = std::string(prng_name());
    j["seeds"] = {{"profiles", config.seed_profiles}, {"metamorphic", config.seed_metamorphic}};
    j["weights"] = {{"similarity", config.weights.w_sim}, {"majority_vote", config.weights.w_mv}};
    if (config.candidates.type == CandidateSourceConfig::Type::Fixtures ||
        config.candidates.type == CandidateSourceConfig::Type::Live) {
        j["generation"] = {{"n", config.candidates.n},
                           {"temperature", config.candidates.temperature}};
        if (!config.candidates.model.empty()) j["generation"]["model"] = config.candidates.model;
    }
    j["config_hash"] = config_hash(config);
    return j;
}

struct MetatestArtifacts {
    SuiteReport suite;
    std::vector<ExplainedPath> paths; // across failing relations
    std::string tree_text;
    bool pass = false;
};

MetatestArtifacts run_metatest_for(const RunConfig& config, const RunInputs& inputs,
                                   const Candidate& candidate) {
    MetatestArtifacts artifacts;

    const RelationContext ctx{&inputs.policy, config.scenario};
    const std::vector<MetamorphicRelation> relations =
        relations_for_scenario(builtin_relations(), config.scenario);
    const SystemUnderTest sut = make_sut(candidate, config.scenario);

    artifacts.suite = run_metamorphic_suite(sut, relations, ctx, config.distribution,
                                            config.seed_metamorphic, config.n_pairs);
    artifacts.pass = artifacts.suite.pass;
    if (artifacts.pass) return artifacts;

    std::ostringstream trees;
    for (const RelationReport& rel : artifacts.suite.relations) {
        if (rel.violations.empty()) continue;
        std::vector<LabeledSample> samples = to_samples(rel.labeled);
        trees << "relation " << rel.relation << ":\n";
        try {
            DecisionTree tree = fit_cart(samples, config.cart);
            trees << tree_to_text(tree) << "\n";
            for (ExplainedPath& path : explain_paths(tree, config.min_fail_rate)) {
                artifacts.paths.push_back(std::move(path));
            }
        } catch (const ValidationError& e) {
            trees << "  (no tree: " << e.what() << ")\n\n";
        }
    }
    artifacts.tree_text = trees.str();
    return artifacts;
}

nlohmann::json suite_summary_json(const std::string& candidate_id, const SuiteReport& suite) {
    nlohmann::json j;
    j["candidate_id"] = candidate_id;
    j["pass"] = suite.pass;
    nlohmann::json rels = nlohmann::json::array();
    for (const RelationReport& rel : suite.relations) {
        rels.push_back({{"relation", rel.relation},
                        {"pairs", rel.pairs_checked},
                        {"violations", rel.violations.size()}});
    }
    j["relations"] = std::move(rels);
    return j;
}

} // namespace

int cmd_score(const RunConfig& config, std::ostream& out, std::ostream& err) {
    try {
        RunInputs inputs = prepare_inputs(config);
        std::vector<Candidate> pool = build_pool(config, inputs);
        std::vector<TaxpayerProfile> profiles =
            sample_profiles(config.distribution, config.seed_profiles, config.n_profiles);

        ScoringResult scoring = score_candidates(config, inputs, pool, profiles);

        write_text_file(config.out_dir / "scores.csv", scores_csv(scoring.ranked));
        write_text_file(config.out_dir / "tolerance.csv", tolerance_csv(scoring.ranked));

        nlohmann::json report;
        report["metadata"] = metadata_json(config);
        report["config"] = config.stored;
        report["ranking"] = nlohmann::json::array();
        for (const ScoreCard& c : scoring.ranked) report["ranking"].push_back(card_to_json(c));
        report["files"] = {"scores.csv", "tolerance.csv", "report.json"};
        write_text_file(config.out_dir / "report.json", report.dump(2) + "\n");

        print_ranking_table(scoring.ranked, out);
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

int cmd_metatest(const RunConfig& config, const std::string& candidate_id, std::ostream& out,
                 std::ostream& err) {
    try {
        RunInputs inputs = prepare_inputs(config);
        std::vector<Candidate> pool = build_pool(config, inputs);

        const Candidate* candidate = nullptr;
        for (const Candidate& c : pool) {
            if (c.id == candidate_id) candidate = &c;
        }
        if (!candidate) {
            err << "error: unknown candidate id \"" << candidate_id << "\"\n";
            return kExitUsage;
        }

        MetatestArtifacts artifacts = run_metatest_for(config, inputs, *candidate);
        write_text_file(config.out_dir / "violations.json",
                        suite_report_to_json(artifacts.suite));

        nlohmann::json report;
        report["metadata"] = metadata_json(config);
        report["config"] = config.stored;
        report["candidate_id"] = candidate_id;
        report["verdict"] = artifacts.pass ? "pass" : "fail";
        report["metamorphic"] = {suite_summary_json(candidate_id, artifacts.suite)};
        nlohmann::json files = {"violations.json", "report.json"};

        if (artifacts.pass) {
            out << "verdict pass\n";
        } else {
            write_text_file(config.out_dir / "tree.txt", artifacts.tree_text);
            FeedbackPrompt feedback =
                generate_feedback_prompt(inputs.base_prompt, artifacts.suite, artifacts.paths,
                                         candidate->source_text);
            write_text_file(config.out_dir / "feedback.txt", feedback.text);
            files.push_back("tree.txt");
            files.push_back("feedback.txt");
            nlohmann::json paths = nlohmann::json::array();
            for (const ExplainedPath& p : artifacts.paths) {
                paths.push_back({{"condition", p.condition_text},
                                 {"n_samples", p.n_samples},
                                 {"fail_rate", p.fail_rate}});
            }
            report["localized_paths"] = std::move(paths);
            out << "verdict fail\n";
            for (const RelationReport& rel : artifacts.suite.relations) {
                if (rel.violations.empty()) continue;
                out << "  relation " << rel.relation << ": " << rel.violations.size() << "/"
                    << rel.pairs_checked << " pairs violated\n";
            }
        }
        report["files"] = std::move(files);
        write_text_file(config.out_dir / "report.json", report.dump(2) + "\n");
        return artifacts.pass ? kExitOk : kExitUnresolved;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

int cmd_pipeline(const RunConfig& config, std::ostream& out, std::ostream& err) {
    try {
        if (config.candidates.type != CandidateSourceConfig::Type::Fixtures &&
            config.candidates.type != CandidateSourceConfig::Type::Live) {
            throw ConfigError("pipeline needs a regenerating candidate source "
                              "(fixtures with round subdirectories, or live)");
        }
        RunInputs inputs = prepare_inputs(config);
        if (inputs.base_prompt.empty()) {
            throw ConfigError("pipeline needs template_file for prompt rendering");
        }

        const std::vector<TaxpayerProfile> profiles =
            sample_profiles(config.distribution, config.seed_profiles, config.n_profiles);

        nlohmann::json rounds = nlohmann::json::array();
        std::string prompt = inputs.base_prompt;
        std::string verdict = "unresolved";
        std::string solution_id;
        int rounds_used = 0;

        for (int round = 1; round <= config.max_rounds; ++round) {
            const std::filesystem::path round_dir =
                config.out_dir / ("round" + std::to_string(round));

            // Build this round's pool.
            std::vector<Candidate> pool;
            if (config.candidates.type == CandidateSourceConfig::Type::Fixtures) {
                std::filesystem::path fixture_dir =
                    config.candidates.path / ("round" + std::to_string(round));
                if (!std::filesystem::is_directory(fixture_dir)) {
                    if (round == 1) throw ConfigError("no candidates: missing " +
                                                      fixture_dir.string());
                    break; // fixtures exhausted before max_rounds
                }
                FixtureClient client(fixture_dir);
                if (client.available() == 0) throw ConfigError("no candidates");
                pool = generate_candidates(client, make_request(config, prompt),
                                           make_hook(config, inputs, round_dir / "generated"));
            } else {
                auto client = make_live_client(config);
                pool = generate_candidates(*client, make_request(config, prompt),
                                           make_hook(config, inputs, round_dir / "generated"));
            }
            rounds_used = round;

            ScoringResult scoring = score_candidates(config, inputs, pool, profiles);
            write_text_file(round_dir / "scores.csv", scores_csv(scoring.ranked));
            write_text_file(round_dir / "tolerance.csv", tolerance_csv(scoring.ranked));

            nlohmann::json round_json;
            round_json["round"] = round;
            round_json["ranking"] = nlohmann::json::array();
            for (const ScoreCard& c : scoring.ranked) {
                round_json["ranking"].push_back(card_to_json(c));
            }

            // Validate the top-k candidates; the first passing one wins.
            const int k = std::min<int>(config.top_k, static_cast<int>(scoring.ranked.size()));
            nlohmann::json suites = nlohmann::json::array();
            bool round_pass = false;
            MetatestArtifacts top1_artifacts;
            for (int i = 0; i < k && !round_pass; ++i) {
                const std::string& id = scoring.ranked[i].candidate_id;
                const Candidate* candidate = nullptr;
                for (const Candidate& c : pool) {
                    if (c.id == id) candidate = &c;
                }
                MetatestArtifacts artifacts = run_metatest_for(config, inputs, *candidate);
                suites.push_back(suite_summary_json(id, artifacts.suite));
                if (i == 0) {
                    write_text_file(round_dir / "violations.json",
                                    suite_report_to_json(artifacts.suite));
                    top1_artifacts = artifacts;
                }
                if (artifacts.pass) {
                    round_pass = true;
                    solution_id = id;
                }
            }
            round_json["metamorphic"] = std::move(suites);

            if (round_pass) {
                round_json["verdict"] = "pass";
                rounds.push_back(std::move(round_json));
                verdict = "pass";
                out << "round " << round << ": pass (" << solution_id << ")\n";
                break;
            }

            // Feedback for the next round from the top-1 failure.
            write_text_file(round_dir / "tree.txt", top1_artifacts.tree_text);
            const Candidate* top1 = nullptr;
            for (const Candidate& c : pool) {
                if (c.id == scoring.ranked.front().candidate_id) top1 = &c;
            }
            FeedbackPrompt feedback = generate_feedback_prompt(
                prompt, top1_artifacts.suite, top1_artifacts.paths, top1->source_text);
            write_text_file(round_dir / "feedback.txt", feedback.text);
            prompt = feedback.text;

            round_json["verdict"] = "fail";
            nlohmann::json paths = nlohmann::json::array();
            for (const ExplainedPath& p : top1_artifacts.paths) {
                paths.push_back({{"condition", p.condition_text},
                                 {"n_samples", p.n_samples},
                                 {"fail_rate", p.fail_rate}});
            }
            round_json["localized_paths"] = std::move(paths);
            rounds.push_back(std::move(round_json));
            out << "round " << round << ": fail\n";
        }

        nlohmann::json report;
        report["metadata"] = metadata_json(config);
        report["config"] = config.stored;
        report["verdict"] = verdict;
        report["rounds_used"] = rounds_used;
        if (!solution_id.empty()) report["solution"] = solution_id;
        report["rounds"] = std::move(rounds);
        write_text_file(config.out_dir / "report.json", report.dump(2) + "\n");

        out << "verdict " << verdict << "\n";
        return verdict == "pass" ? kExitOk : kExitUnresolved;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

int cmd_report(const RunConfig& config, std::ostream& out, std::ostream& err) {
    try {
        const std::filesystem::path path = config.out_dir / "report.json";
        std::ifstream in(path);
        if (!in) {
            err << "error: no report at " << path.string() << "\n";
            return kExitUsage;
        }
        nlohmann::json report;
        in >> report;

        if (report.contains("verdict")) {
            out << "verdict: " << report.at("verdict").get<std::string>() << "\n";
        }
        auto print_ranking = [&](const nlohmann::json& ranking) {
            std::vector<ScoreCard> cards;
            for (const auto& rj : ranking) {
                ScoreCard c;
                c.candidate_id = rj.at("candidate_id").get<std::string>();
                c.similarity = rj.at("similarity").get<double>();
                c.majority_vote = rj.at("majority_vote").get<double>();
                c.weighted = rj.at("weighted").get<double>();
                c.ground_truth_matches = rj.at("ground_truth_matches").get<long>();
                c.ground_truth_total = rj.at("ground_truth_total").get<long>();
                cards.push_back(std::move(c));
            }
            print_ranking_table(cards, out);
        };
        if (report.contains("ranking")) {
            print_ranking(report.at("ranking"));
        } else if (report.contains("rounds")) {
            for (const auto& round : report.at("rounds")) {
                out << "round " << round.at("round").get<int>() << " ("
                    << round.at("verdict").get<std::string>() << "):\n";
                print_ranking(round.at("ranking"));
            }
        }
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

} // namespace taxrank
