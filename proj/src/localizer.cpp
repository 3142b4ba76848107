#include "taxrank/localizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include <json.hpp>

#include "taxrank/errors.hpp"

namespace taxrank {

namespace {

constexpr std::array<const char*, kFeatureCount> kFeatureNames = {
    "income", "status", "age65", "blind", "children", "investment_income"};

// Nontrivial bipartitions of the four status codes; every mask keeps code 1
// on the left so each partition appears exactly once.
constexpr std::array<std::uint8_t, 7> kStatusMasks = {1, 3, 5, 7, 9, 11, 13};

double gini_of(std::size_t n_fail, std::size_t n_total) {
    if (n_total == 0) return 0.0;
    double p = static_cast<double>(n_fail) / static_cast<double>(n_total);
    return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

std::string format_threshold(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

struct SplitChoice {
    bool found = false;
    int feature = 0;
    bool categorical = false;
    double threshold = 0.0;
    std::uint8_t subset_mask = 0;
    double gain = 0.0;
};

} // namespace

std::string_view feature_name(int feature) {
    return kFeatureNames[feature];
}

FeatureVector to_features(const TaxpayerProfile& profile) {
    FeatureVector f;
    f.values[0] = profile.income;
    f.values[1] = static_cast<double>(status_code(profile.status));
    f.values[2] = profile.age_65_or_older ? 1.0 : 0.0;
    f.values[3] = profile.blind ? 1.0 : 0.0;
    f.values[4] = static_cast<double>(profile.qualifying_children);
    f.values[5] = profile.investment_income;
    return f;
}

std::vector<LabeledSample> to_samples(const std::vector<LabeledProfile>& labeled) {
    std::vector<LabeledSample> out;
    out.reserve(labeled.size());
    for (const LabeledProfile& lp : labeled) {
        out.push_back({to_features(lp.profile), !lp.pass});
    }
    return out;
}

namespace {

bool goes_left(const TreeNode& node, const FeatureVector& x) {
    double v = x.values[node.feature];
    if (node.categorical) {
        int code = static_cast<int>(v);
        return (node.subset_mask >> (code - 1)) & 1u;
    }
    return v <= node.threshold;
}

class CartBuilder {
public:
    CartBuilder(const std::vector<LabeledSample>& samples, const CartParams& params)
        : samples_(samples), params_(params) {}

    DecisionTree build() {
        DecisionTree tree;
        tree.params = params_;
        std::vector<std::size_t> all(samples_.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        grow(tree, all, 0);
        return tree;
    }

private:
    int grow(DecisionTree& tree, const std::vector<std::size_t>& idx, int depth) {
        const int node_index = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        fill_stats(tree.nodes.back(), idx);

        const TreeNode stats = tree.nodes[node_index];
        const bool can_split = depth < params_.max_depth && stats.gini > 0.0 &&
                               idx.size() >= 2 * params_.min_samples_leaf;
        if (!can_split) return node_index;

        SplitChoice best = best_split(idx, stats.gini);
        if (!best.found || best.gain < params_.min_gini_gain) return node_index;

        std::vector<std::size_t> left_idx, right_idx;
        TreeNode probe;
        probe.feature = best.feature;
        probe.categorical = best.categorical;
        probe.threshold = best.threshold;
        probe.subset_mask = best.subset_mask;
        for (std::size_t i : idx) {
            (goes_left(probe, samples_[i].features) ? left_idx : right_idx).push_back(i);
        }

        int left = grow(tree, left_idx, depth + 1);
        int right = grow(tree, right_idx, depth + 1);

        TreeNode& node = tree.nodes[node_index];
        node.leaf = false;
        node.feature = best.feature;
        node.categorical = best.categorical;
        node.threshold = best.threshold;
        node.subset_mask = best.subset_mask;
        node.left = left;
        node.right = right;
        return node_index;
    }

    void fill_stats(TreeNode& node, const std::vector<std::size_t>& idx) const {
        node.n_samples = idx.size();
        node.n_fail = 0;
        for (std::size_t i : idx) {
            if (samples_[i].fail) ++node.n_fail;
        }
        node.gini = gini_of(node.n_fail, node.n_samples);
        node.predicted_fail = node.n_fail * 2 > node.n_samples;
    }

    SplitChoice best_split(const std::vector<std::size_t>& idx, double parent_gini) const {
        SplitChoice best;
        const double n = static_cast<double>(idx.size());

        for (int feature = 0; feature < kFeatureCount; ++feature) {
            if (feature == kStatusFeature) {
                for (std::uint8_t mask : kStatusMasks) {
                    std::size_t nl = 0, fl = 0, nr = 0, fr = 0;
                    for (std::size_t i : idx) {
                        int code = static_cast<int>(samples_[i].features.values[feature]);
                        bool left = (mask >> (code - 1)) & 1u;
                        (left ? nl : nr) += 1;
                        if (samples_[i].fail) (left ? fl : fr) += 1;
                    }
                    consider(best, feature, true, 0.0, mask, parent_gini, n, nl, fl, nr, fr);
                }
            } else {
                std::vector<std::pair<double, bool>> vals; // (value, fail)
                vals.reserve(idx.size());
                for (std::size_t i : idx) {
                    vals.emplace_back(samples_[i].features.values[feature], samples_[i].fail);
                }
                std::sort(vals.begin(), vals.end());

                std::size_t total_fail = 0;
                for (const auto& [v, f] : vals) total_fail += f ? 1 : 0;

                std::size_t nl = 0, fl = 0;
                for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
                    nl += 1;
                    fl += vals[i].second ? 1 : 0;
                    if (vals[i].first == vals[i + 1].first) continue;
                    double threshold = vals[i].first + (vals[i + 1].first - vals[i].first) / 2.0;
                    consider(best, feature, false, threshold, 0, parent_gini, n, nl, fl,
                             vals.size() - nl, total_fail - fl);
                }
            }
        }
        return best;
    }

    void consider(SplitChoice& best, int feature, bool categorical, double threshold,
                  std::uint8_t mask, double parent_gini, double n, std::size_t nl,
                  std::size_t fl, std::size_t nr, std::size_t fr) const {
        if (nl < params_.min_samples_leaf || nr < params_.min_samples_leaf) return;
        double weighted = (static_cast<double>(nl) / n) * gini_of(fl, nl) +
                          (static_cast<double>(nr) / n) * gini_of(fr, nr);
        double gain = parent_gini - weighted;
        // strict improvement keeps the earliest feature / lowest threshold on ties
        if (!best.found || gain > best.gain + 1e-12) {
            best = {true, feature, categorical, threshold, mask, gain};
        }
    }

    const std::vector<LabeledSample>& samples_;
    CartParams params_;
};

} // namespace

int DecisionTree::route(const FeatureVector& x) const {
    int i = 0;
    while (!nodes[i].leaf) {
        i = goes_left(nodes[i], x) ? nodes[i].left : nodes[i].right;
    }
    return i;
}

DecisionTree fit_cart(const std::vector<LabeledSample>& samples, const CartParams& params) {
    if (params.max_depth < 0 || params.min_samples_leaf < 1 || params.min_gini_gain < 0.0) {
        throw ValidationError("bad CART parameters");
    }
    if (samples.size() < 2 * params.min_samples_leaf) {
        throw ValidationError("fit_cart needs at least 2 * min_samples_leaf samples");
    }
    return CartBuilder(samples, params).build();
}

bool PathCondition::matches(const FeatureVector& x) const {
    double v = x.values[feature];
    if (categorical) {
        int code = static_cast<int>(v);
        return (subset_mask >> (code - 1)) & 1u;
    }
    return left ? v <= threshold : v > threshold;
}

std::string PathCondition::render() const {
    std::ostringstream out;
    if (categorical) {
        out << feature_name(feature) << " ∈ {";
        bool first = true;
        for (FilingStatus s : kAllStatuses) {
            if ((subset_mask >> (status_code(s) - 1)) & 1u) {
                if (!first) out << ", ";
                first = false;
                out << status_display(s);
            }
        }
        out << "}";
    } else {
        out << feature_name(feature) << (left ? " ≤ " : " > ")
            << format_threshold(threshold);
    }
    return out.str();
}

namespace {

void collect_paths(const DecisionTree& tree, int node_index,
                   std::vector<PathCondition>& prefix, double min_fail_rate,
                   std::vector<ExplainedPath>& out) {
    const TreeNode& node = tree.nodes[node_index];
    if (node.leaf) {
        double fail_rate = node.n_samples == 0
                               ? 0.0
                               : static_cast<double>(node.n_fail) /
                                     static_cast<double>(node.n_samples);
        if (fail_rate >= min_fail_rate) {
            ExplainedPath path;
            path.conditions = prefix;
            path.n_samples = node.n_samples;
            path.n_fail = node.n_fail;
            path.fail_rate = fail_rate;
            path.leaf_index = node_index;
            std::ostringstream text;
            if (prefix.empty()) {
                text << "(all inputs)";
            } else {
                for (std::size_t i = 0; i < prefix.size(); ++i) {
                    if (i) text << " ∧ ";
                    text << prefix[i].render();
                }
            }
            path.condition_text = text.str();
            out.push_back(std::move(path));
        }
        return;
    }

    PathCondition cond;
    cond.feature = node.feature;
    cond.categorical = node.categorical;
    cond.threshold = node.threshold;

    cond.left = true;
    cond.subset_mask = node.subset_mask;
    prefix.push_back(cond);
    collect_paths(tree, node.left, prefix, min_fail_rate, out);
    prefix.pop_back();

    cond.left = false;
    cond.subset_mask = static_cast<std::uint8_t>(~node.subset_mask & 0x0f);
    prefix.push_back(cond);
    collect_paths(tree, node.right, prefix, min_fail_rate, out);
    prefix.pop_back();
}

} // namespace

std::vector<ExplainedPath> explain_paths(const DecisionTree& tree, double min_fail_rate) {
    if (tree.nodes.empty()) throw ValidationError("explain_paths needs a fitted tree");
    std::vector<ExplainedPath> out;
    std::vector<PathCondition> prefix;
    collect_paths(tree, 0, prefix, min_fail_rate, out);
    std::stable_sort(out.begin(), out.end(), [](const ExplainedPath& a, const ExplainedPath& b) {
        return a.n_samples > b.n_samples;
    });
    return out;
}

namespace {

void render_text(const DecisionTree& tree, int node_index, int indent, std::ostringstream& out) {
    const TreeNode& node = tree.nodes[node_index];
    std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    char stats[128];
    std::snprintf(stats, sizeof(stats), "[n=%zu, fail=%zu, gini=%.4f]", node.n_samples,
                  node.n_fail, node.gini);
    if (node.leaf) {
        out << pad << "leaf " << (node.predicted_fail ? "fail " : "pass ") << stats << "\n";
        return;
    }
    PathCondition cond;
    cond.feature = node.feature;
    cond.categorical = node.categorical;
    cond.threshold = node.threshold;
    cond.left = true;
    cond.subset_mask = node.subset_mask;
    out << pad << "split " << cond.render() << " " << stats << "\n";
    render_text(tree, node.left, indent + 1, out);
    cond.left = false;
    cond.subset_mask = static_cast<std::uint8_t>(~node.subset_mask & 0x0f);
    out << pad << "else " << cond.render() << "\n";
    render_text(tree, node.right, indent + 1, out);
}

nlohmann::json node_to_json(const DecisionTree& tree, int node_index) {
    const TreeNode& node = tree.nodes[node_index];
    nlohmann::json j;
    j["n_samples"] = node.n_samples;
    j["n_fail"] = node.n_fail;
    j["gini"] = node.gini;
    if (node.leaf) {
        j["leaf"] = true;
        j["label"] = node.predicted_fail ? "fail" : "pass";
        return j;
    }
    j["leaf"] = false;
    j["feature"] = std::string(feature_name(node.feature));
    if (node.categorical) {
        nlohmann::json subset = nlohmann::json::array();
        for (FilingStatus s : kAllStatuses) {
            if ((node.subset_mask >> (status_code(s) - 1)) & 1u) {
                subset.push_back(std::string(status_display(s)));
            }
        }
        j["subset"] = std::move(subset);
    } else {
        j["threshold"] = node.threshold;
    }
    j["left"] = node_to_json(tree, node.left);
    j["right"] = node_to_json(tree, node.right);
    return j;
}

} // namespace

std::string tree_to_text(const DecisionTree& tree) {
    std::ostringstream out;
    render_text(tree, 0, 0, out);
    return out.str();
}

std::string tree_to_json(const DecisionTree& tree) {
    return node_to_json(tree, 0).dump(2) + "\n";
}

} // namespace taxrank
