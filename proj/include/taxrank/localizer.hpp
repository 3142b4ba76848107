#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "taxrank/metamorphic.hpp"
#include "taxrank/profile.hpp"

namespace taxrank {

// Feature layout, in declaration order (ties in split search break this way):
//   0 income, 1 status (categorical), 2 age65, 3 blind, 4 children,
//   5 investment_income
inline constexpr int kFeatureCount = 6;
inline constexpr int kStatusFeature = 1;

std::string_view feature_name(int feature);

struct FeatureVector {
    std::array<double, kFeatureCount> values{};
};

FeatureVector to_features(const TaxpayerProfile& profile);

struct LabeledSample {
    FeatureVector features;
    bool fail = false;
};

std::vector<LabeledSample> to_samples(const std::vector<LabeledProfile>& labeled);

struct CartParams {
    int max_depth = 4;
    std::size_t min_samples_leaf = 20;
    double min_gini_gain = 0.01;
};

struct TreeNode {
    bool leaf = true;
    // split (internal nodes)
    int feature = 0;
    bool categorical = false;
    double threshold = 0.0;     // numeric: left iff value <= threshold
    std::uint8_t subset_mask = 0; // categorical: left iff bit (code-1) set
    int left = -1;
    int right = -1;
    // stats (all nodes)
    std::size_t n_samples = 0;
    std::size_t n_fail = 0;
    double gini = 0.0;
    bool predicted_fail = false;
};

struct DecisionTree {
    std::vector<TreeNode> nodes; // root at index 0
    CartParams params;

    const TreeNode& root() const { return nodes.front(); }
    int route(const FeatureVector& x) const; // leaf index for x
};

// Greedy binary CART minimizing weighted Gini impurity. Numeric features
// split on midpoints between sorted distinct values; the categorical status
// feature tries all 7 nontrivial bipartitions of the four codes.
// Deterministic: ties break by feature declaration order, then lower
// threshold / lower subset mask.
DecisionTree fit_cart(const std::vector<LabeledSample>& samples, const CartParams& params = {});

struct PathCondition {
    int feature = 0;
    bool categorical = false;
    bool left = true;          // numeric: <= threshold vs >
    double threshold = 0.0;
    std::uint8_t subset_mask = 0; // the branch's own subset

    bool matches(const FeatureVector& x) const;
    std::string render() const;
};

struct ExplainedPath {
    std::vector<PathCondition> conditions;
    std::string condition_text; // conjunction, e.g. "status ∈ {MarriedSeparate} ∧ income ≤ 56844"
    std::size_t n_samples = 0;
    std::size_t n_fail = 0;
    double fail_rate = 0.0;
    int leaf_index = -1;
};

// Root-to-leaf conjunctions for leaves with fail_rate >= min_fail_rate,
// sorted by n_samples descending.
std::vector<ExplainedPath> explain_paths(const DecisionTree& tree, double min_fail_rate = 0.8);

std::string tree_to_text(const DecisionTree& tree);
std::string tree_to_json(const DecisionTree& tree);

} // namespace taxrank
