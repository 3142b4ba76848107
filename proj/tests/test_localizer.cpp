#include <doctest.h>

#include <algorithm>

#include "taxrank/errors.hpp"
#include "taxrank/localizer.hpp"
#include "taxrank/profiles.hpp"

#include "support/test_util.hpp"

using namespace taxrank;
using namespace taxrank::testing;

TEST_SUITE_BEGIN("localizer");

namespace {

LabeledSample sample_of(double income, FilingStatus status, bool fail) {
    TaxpayerProfile p;
    p.income = income;
    p.status = status;
    return {to_features(p), fail};
}

} // namespace

TEST_CASE("all-pass data yields a single pure leaf") {
    std::vector<LabeledSample> samples;
    for (int i = 0; i < 100; ++i) {
        samples.push_back(sample_of(1000.0 * i + 1.0, FilingStatus::Single, false));
    }
    DecisionTree tree = fit_cart(samples);
    REQUIRE(tree.nodes.size() == 1);
    CHECK(tree.root().leaf);
    CHECK(tree.root().gini == 0.0);
    CHECK_FALSE(tree.root().predicted_fail);
    CHECK(explain_paths(tree).empty());
}

TEST_CASE("a clean status fault splits into two pure leaves with gain 0.5") {
    std::vector<LabeledSample> samples;
    for (int i = 0; i < 40; ++i) {
        samples.push_back(sample_of(10000.0 + i, FilingStatus::MarriedSeparate, true));
        samples.push_back(sample_of(10000.0 + i, FilingStatus::Single, false));
    }
    DecisionTree tree = fit_cart(samples);
    REQUIRE_FALSE(tree.root().leaf);
    CHECK(tree.root().feature == kStatusFeature);
    CHECK(tree.root().categorical);
    CHECK(tree.root().gini == doctest::Approx(0.5)); // impurity fully removed by the split
    CHECK(tree.nodes[tree.root().left].gini == 0.0);
    CHECK(tree.nodes[tree.root().right].gini == 0.0);

    // the leaf holding the MFS samples is pure fail
    TaxpayerProfile mfs;
    mfs.income = 10000.0;
    mfs.status = FilingStatus::MarriedSeparate;
    const TreeNode& leaf = tree.nodes[tree.route(to_features(mfs))];
    CHECK(leaf.n_samples == 40);
    CHECK(leaf.n_fail == 40);

    auto paths = explain_paths(tree);
    REQUIRE(paths.size() == 1);
    CHECK(paths[0].fail_rate == 1.0);
    CHECK(paths[0].n_samples == 40);
}

TEST_CASE("with all four statuses the failing subset is named exactly") {
    std::vector<LabeledSample> samples;
    for (int i = 0; i < 30; ++i) {
        samples.push_back(sample_of(9000.0 + i, FilingStatus::MarriedSeparate, true));
        samples.push_back(sample_of(9000.0 + i, FilingStatus::Single, false));
        samples.push_back(sample_of(9000.0 + i, FilingStatus::MarriedJoint, false));
        samples.push_back(sample_of(9000.0 + i, FilingStatus::HeadOfHousehold, false));
    }
    DecisionTree tree = fit_cart(samples);
    auto paths = explain_paths(tree);
    REQUIRE(paths.size() == 1);
    CHECK(paths[0].condition_text == "status ∈ {MarriedSeparate}");
    CHECK(paths[0].fail_rate == 1.0);
}

TEST_CASE("numeric thresholds land inside the separating gap") {
    ProfileDistribution dist;
    dist.income_range = {1000.0, 120000.0};
    dist.income_scale = IncomeScale::Linear;
    auto profiles = sample_profiles(dist, 77, 1000);

    std::vector<LabeledSample> samples;
    double below = 0.0, above = 1e18;
    for (const TaxpayerProfile& p : profiles) {
        bool fail = p.income > 56844.0;
        samples.push_back({to_features(p), fail});
        if (!fail) below = std::max(below, p.income);
        if (fail) above = std::min(above, p.income);
    }
    DecisionTree tree = fit_cart(samples);
    REQUIRE_FALSE(tree.root().leaf);
    CHECK(tree.root().feature == 0);
    CHECK(tree.root().threshold >= below);
    CHECK(tree.root().threshold <= above);
}

TEST_CASE("refitting identical data reproduces the tree") {
    ProfileDistribution dist;
    auto profiles = sample_profiles(dist, 13, 600);
    std::vector<LabeledSample> samples;
    for (const TaxpayerProfile& p : profiles) {
        samples.push_back({to_features(p), p.blind || p.income > 90000.0});
    }
    DecisionTree a = fit_cart(samples);
    DecisionTree b = fit_cart(samples);
    CHECK(tree_to_text(a) == tree_to_text(b));
    CHECK(tree_to_json(a) == tree_to_json(b));
}

TEST_CASE("training accuracy is at least the majority-class baseline") {
    ProfileDistribution dist;
    auto profiles = sample_profiles(dist, 29, 800);
    std::vector<LabeledSample> samples;
    std::size_t fails = 0;
    for (const TaxpayerProfile& p : profiles) {
        bool fail = p.status == FilingStatus::MarriedSeparate && p.income < 60000.0;
        fails += fail ? 1 : 0;
        samples.push_back({to_features(p), fail});
    }
    DecisionTree tree = fit_cart(samples);

    std::size_t correct = 0;
    for (const LabeledSample& s : samples) {
        const TreeNode& leaf = tree.nodes[tree.route(s.features)];
        if (leaf.predicted_fail == s.fail) ++correct;
    }
    double baseline =
        std::max(fails, samples.size() - fails) / static_cast<double>(samples.size());
    CHECK(static_cast<double>(correct) / static_cast<double>(samples.size()) >=
          baseline - 1e-12);
}

TEST_CASE("explained path conditions select exactly the leaf samples") {
    ProfileDistribution dist;
    auto profiles = sample_profiles(dist, 41, 700);
    std::vector<LabeledSample> samples;
    for (const TaxpayerProfile& p : profiles) {
        samples.push_back({to_features(p), p.blind && p.income > 30000.0});
    }
    DecisionTree tree = fit_cart(samples);

    for (const ExplainedPath& path : explain_paths(tree, 0.5)) {
        std::size_t selected = 0;
        for (const LabeledSample& s : samples) {
            bool matches = std::all_of(path.conditions.begin(), path.conditions.end(),
                                       [&](const PathCondition& c) {
                                           return c.matches(s.features);
                                       });
            bool routed = tree.route(s.features) == path.leaf_index;
            CHECK(matches == routed);
            selected += matches ? 1 : 0;
        }
        CHECK(selected == path.n_samples);
    }
}

TEST_CASE("paths below the fail-rate threshold are excluded") {
    std::vector<LabeledSample> samples;
    for (int i = 0; i < 40; ++i) {
        // the MFS leaf fails 95% of the time
        samples.push_back(sample_of(5000.0 + i, FilingStatus::MarriedSeparate, i % 20 != 0));
        samples.push_back(sample_of(5000.0 + i, FilingStatus::Single, false));
    }
    DecisionTree tree = fit_cart(samples);
    CHECK_FALSE(explain_paths(tree, 0.8).empty());
    CHECK(explain_paths(tree, 1.0).empty());
}

TEST_CASE("depth, leaf-size, and sample floors hold") {
    ProfileDistribution dist;
    auto profiles = sample_profiles(dist, 53, 500);
    std::vector<LabeledSample> samples;
    for (const TaxpayerProfile& p : profiles) {
        samples.push_back({to_features(p), p.income > 40000.0 && p.qualifying_children > 1});
    }
    CartParams params;
    params.max_depth = 2;
    params.min_samples_leaf = 30;
    DecisionTree tree = fit_cart(samples, params);

    // depth bound: no path root->leaf longer than max_depth edges
    for (const ExplainedPath& path : explain_paths(tree, 0.0)) {
        CHECK(path.conditions.size() <= 2);
        CHECK(path.n_samples >= 30);
    }

    CHECK_THROWS_AS(fit_cart(std::vector<LabeledSample>(samples.begin(), samples.begin() + 10),
                             CartParams{}),
                    ValidationError);
}

TEST_SUITE_END();
