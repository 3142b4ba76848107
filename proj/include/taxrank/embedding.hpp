#pragma once

#include <memory>
#include <string>
#include <vector>

namespace taxrank {

// Deterministic token-embedding backend: equal token lists give equal vectors.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    virtual int dimension() const = 0;
    virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& tokens) = 0;
};

// Default backend: each token becomes the L2-normalized sum of hashed
// character-trigram one-hot vectors in d = 256. Fully deterministic and
// dependency-free; intended for reproducible ordering, not for matching
// any neural model's absolute similarity values.
class TrigramEmbedding : public EmbeddingProvider {
public:
    static constexpr int kDimension = 256;

    int dimension() const override { return kDimension; }
    std::vector<std::vector<double>> embed(const std::vector<std::string>& tokens) override;
};

// Backend calling an external embedding HTTP endpoint:
//   POST <path> {"tokens": [...]} -> {"vectors": [[...], ...]}
// Throws GenerationError on transport or shape problems.
class HttpEmbeddingProvider : public EmbeddingProvider {
public:
    HttpEmbeddingProvider(std::string host, int port, std::string path, int dimension,
                          int timeout_ms = 5000);

    int dimension() const override { return dimension_; }
    std::vector<std::vector<double>> embed(const std::vector<std::string>& tokens) override;

private:
    std::string host_;
    int port_;
    std::string path_;
    int dimension_;
    int timeout_ms_;
};

} // namespace taxrank
