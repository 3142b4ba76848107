#include "taxrank/scoring.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>

#include "taxrank/errors.hpp"
#include "taxrank/money.hpp"

namespace taxrank {

void Weights::validate() const {
    if (w_sim < 0.0 || w_sim > 1.0 || w_mv < 0.0 || w_mv > 1.0 ||
        std::fabs(w_sim + w_mv - 1.0) > 1e-9) {
        throw ValidationError("weights must lie in [0,1] and sum to 1");
    }
}

std::map<std::string, double> majority_vote_scores(const EvalMatrix& matrix,
                                                   std::int64_t cent_tolerance) {
    const std::size_t n_candidates = matrix.candidate_count();
    const std::size_t n_profiles = matrix.profile_count();
    if (n_candidates == 0 || n_profiles == 0) {
        throw ValidationError("majority vote needs a nonempty outcome matrix");
    }

    std::map<std::string, double> points;
    for (const std::string& id : matrix.candidate_ids) points[id] = 0.0;

    for (std::size_t col = 0; col < n_profiles; ++col) {
        // Sort the Ok outputs; outputs within cent_tolerance link into one
        // class, so class formation is order-independent.
        std::vector<std::pair<std::int64_t, std::size_t>> oks; // (cents, candidate)
        for (std::size_t c = 0; c < n_candidates; ++c) {
            const EvalOutcome& cell = matrix.at(c, col);
            if (cell.is_ok()) oks.emplace_back(to_cents(cell.net), c);
        }
        if (oks.empty()) continue;
        std::sort(oks.begin(), oks.end());

        std::vector<std::size_t> class_of(oks.size(), 0);
        std::size_t n_classes = 1;
        for (std::size_t i = 1; i < oks.size(); ++i) {
            if (oks[i].first - oks[i - 1].first > cent_tolerance) ++n_classes;
            class_of[i] = n_classes - 1;
        }
        std::vector<std::size_t> class_size(n_classes, 0);
        for (std::size_t cls : class_of) ++class_size[cls];
        const std::size_t max_size = *std::max_element(class_size.begin(), class_size.end());

        for (std::size_t i = 0; i < oks.size(); ++i) {
            if (class_size[class_of[i]] == max_size) {
                points[matrix.candidate_ids[oks[i].second]] += 1.0;
            }
        }
    }

    for (auto& [id, score] : points) score /= static_cast<double>(n_profiles);
    return points;
}

std::vector<std::string> tokenize_source(const std::string& text) {
    std::vector<std::string> tokens;
    std::string word;
    auto flush_word = [&] {
        if (word.empty()) return;
        // split camelCase-style identifiers at lower/digit -> upper boundaries
        std::string part;
        for (std::size_t i = 0; i < word.size(); ++i) {
            const bool boundary =
                i > 0 && std::isupper(static_cast<unsigned char>(word[i])) &&
                !std::isupper(static_cast<unsigned char>(word[i - 1]));
            if (boundary && !part.empty()) {
                tokens.push_back(part);
                part.clear();
            }
            part.push_back(word[i]);
        }
        if (!part.empty()) tokens.push_back(part);
        word.clear();
    };

    for (char ch : text) {
        if (std::isalnum(static_cast<unsigned char>(ch))) {
            word.push_back(ch);
        } else {
            flush_word(); // whitespace, punctuation, and underscores all split
        }
    }
    flush_word();
    return tokens;
}

namespace {

double max_cosine(const std::vector<double>& v, const std::vector<std::vector<double>>& others,
                  const std::vector<double>& norms, double v_norm) {
    double best = -1.0;
    for (std::size_t i = 0; i < others.size(); ++i) {
        double dot = std::inner_product(v.begin(), v.end(), others[i].begin(), 0.0);
        double denom = v_norm * norms[i];
        best = std::max(best, denom > 0.0 ? dot / denom : 0.0);
    }
    return best;
}

std::vector<double> l2_norms(const std::vector<std::vector<double>>& vecs) {
    std::vector<double> norms;
    norms.reserve(vecs.size());
    for (const auto& v : vecs) {
        norms.push_back(std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)));
    }
    return norms;
}

} // namespace

double similarity_score(const std::string& source_text,
                        const std::vector<std::string>& references,
                        EmbeddingProvider& provider) {
    if (source_text.empty()) throw ValidationError("similarity needs a nonempty source text");
    if (references.empty()) throw ValidationError("similarity needs at least one reference");

    std::string reference;
    for (const std::string& r : references) {
        if (!reference.empty()) reference.push_back('\n');
        reference += r;
    }

    const std::vector<std::string> cand_tokens = tokenize_source(source_text);
    const std::vector<std::string> ref_tokens = tokenize_source(reference);
    if (cand_tokens.empty() || ref_tokens.empty()) return 0.0;

    const auto cand_vecs = provider.embed(cand_tokens);
    const auto ref_vecs = provider.embed(ref_tokens);
    if (cand_vecs.size() != cand_tokens.size() || ref_vecs.size() != ref_tokens.size()) {
        throw GenerationError("embedding provider returned the wrong number of vectors");
    }
    const auto cand_norms = l2_norms(cand_vecs);
    const auto ref_norms = l2_norms(ref_vecs);

    double precision = 0.0;
    for (std::size_t i = 0; i < cand_vecs.size(); ++i) {
        precision += max_cosine(cand_vecs[i], ref_vecs, ref_norms, cand_norms[i]);
    }
    precision /= static_cast<double>(cand_vecs.size());

    double recall = 0.0;
    for (std::size_t i = 0; i < ref_vecs.size(); ++i) {
        recall += max_cosine(ref_vecs[i], cand_vecs, cand_norms, ref_norms[i]);
    }
    recall /= static_cast<double>(ref_vecs.size());

    if (precision + recall <= 0.0) return 0.0;
    double f1 = 2.0 * precision * recall / (precision + recall);
    return std::clamp(f1, 0.0, 1.0);
}

double weighted_score(double similarity, double majority_vote, const Weights& weights) {
    weights.validate();
    if (similarity < 0.0 || similarity > 1.0 || majority_vote < 0.0 || majority_vote > 1.0) {
        throw ValidationError("scores must lie in [0,1]");
    }
    return weights.w_sim * similarity + weights.w_mv * majority_vote;
}

std::vector<double> default_delta_grid(double max_delta, double step) {
    if (!(step > 0.0) || max_delta < 0.0) {
        throw ValidationError("delta grid needs step > 0 and max >= 0");
    }
    std::vector<double> grid;
    for (int i = 0;; ++i) {
        double d = i * step;
        if (d > max_delta + 1e-12) break;
        grid.push_back(d);
    }
    return grid;
}

std::vector<TolerancePoint> ground_truth_curve(const std::vector<EvalOutcome>& outcomes,
                                               const std::vector<double>& oracle_nets,
                                               const std::vector<double>& delta_grid) {
    if (outcomes.size() != oracle_nets.size()) {
        throw ValidationError("outcomes and oracle outputs must align on the same profiles");
    }
    if (outcomes.empty()) throw ValidationError("tolerance curve needs at least one profile");
    if (delta_grid.empty() || delta_grid.front() != 0.0 ||
        !std::is_sorted(delta_grid.begin(), delta_grid.end())) {
        throw ValidationError("delta grid must be ascending and include 0");
    }

    std::vector<TolerancePoint> curve;
    curve.reserve(delta_grid.size());
    for (double delta : delta_grid) {
        long matches = 0;
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
            if (!outcomes[i].is_ok()) continue;
            // $1 floor keeps the margin meaningful when the oracle is near zero.
            double margin = delta * std::max(std::fabs(oracle_nets[i]), 1.0);
            double diff = std::fabs(outcomes[i].net - oracle_nets[i]);
            bool exact = to_cents(outcomes[i].net) == to_cents(oracle_nets[i]);
            if (exact || diff <= margin + 1e-9) ++matches;
        }
        curve.push_back({delta, static_cast<double>(matches) /
                                    static_cast<double>(outcomes.size())});
    }
    return curve;
}

std::vector<ScoreCard> rank(std::vector<ScoreCard> cards) {
    if (cards.empty()) throw ValidationError("rank needs at least one scorecard");
    std::set<std::string> ids;
    for (const ScoreCard& c : cards) {
        if (!ids.insert(c.candidate_id).second) {
            throw ValidationError("duplicate candidate id in scorecards: " + c.candidate_id);
        }
    }
    std::sort(cards.begin(), cards.end(), [](const ScoreCard& a, const ScoreCard& b) {
        if (a.weighted != b.weighted) return a.weighted > b.weighted;
        if (a.majority_vote != b.majority_vote) return a.majority_vote > b.majority_vote;
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.candidate_id < b.candidate_id;
    });
    return cards;
}

} // namespace taxrank
