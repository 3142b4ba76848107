#pragma once

#include <map>
#include <string>
#include <vector>

#include "taxrank/candidates.hpp"
#include "taxrank/embedding.hpp"

namespace taxrank {

struct Weights {
    double w_sim = 0.6;
    double w_mv = 0.4;

    void validate() const; // both in [0,1], summing to 1
};

struct TolerancePoint {
    double delta = 0.0;
    double accuracy = 0.0;
};

struct ScoreCard {
    std::string candidate_id;
    double similarity = 0.0;
    double majority_vote = 0.0;
    double weighted = 0.0;
    long ground_truth_matches = 0;
    long ground_truth_total = 0;
    std::vector<TolerancePoint> tolerance_curve;
    std::string scoring_note; // nonempty when a provider failure degraded similarity to 0
};

// Per input column, Ok outputs are grouped into cents-equality classes
// (cent_tolerance widens the class linkage); a candidate earns the column
// iff its cell is Ok and sits in a maximum-cardinality class.
std::map<std::string, double> majority_vote_scores(const EvalMatrix& matrix,
                                                   std::int64_t cent_tolerance = 0);

// Whitespace/punctuation tokenizer; identifiers additionally split on
// underscores and lower-to-upper case boundaries.
std::vector<std::string> tokenize_source(const std::string& text);

// BERTScore-style F1 between the candidate text and the concatenated
// references over `provider` embeddings, clamped to [0,1].
double similarity_score(const std::string& source_text,
                        const std::vector<std::string>& references,
                        EmbeddingProvider& provider);

double weighted_score(double similarity, double majority_vote, const Weights& weights);

// Grid of delta fractions, ascending, starting at 0.
std::vector<double> default_delta_grid(double max_delta = 0.10, double step = 0.005);

// accuracy(delta) = share of profiles whose cell is Ok and within
// delta * max(|oracle|, $1) of the oracle output.
std::vector<TolerancePoint> ground_truth_curve(const std::vector<EvalOutcome>& outcomes,
                                               const std::vector<double>& oracle_nets,
                                               const std::vector<double>& delta_grid);

// Descending by weighted score; ties by majority vote, then similarity,
// then candidate id ascending.
std::vector<ScoreCard> rank(std::vector<ScoreCard> cards);

} // namespace taxrank
