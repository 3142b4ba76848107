#include "taxrank/embedding.hpp"

#include <cmath>
#include <cstdint>

#include <httplib.h>
#include <json.hpp>

#include "taxrank/errors.hpp"

namespace taxrank {

namespace {

std::uint64_t fnv1a64(const char* data, std::size_t len) {
    std::uint64_t h = 1469598103934665603ULL;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= static_cast<unsigned char>(data[i]);
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace

std::vector<std::vector<double>> TrigramEmbedding::embed(const std::vector<std::string>& tokens) {
    std::vector<std::vector<double>> out;
    out.reserve(tokens.size());
    for (const std::string& token : tokens) {
        std::vector<double> vec(kDimension, 0.0);
        if (token.size() < 3) {
            vec[fnv1a64(token.data(), token.size()) % kDimension] += 1.0;
        } else {
            for (std::size_t i = 0; i + 3 <= token.size(); ++i) {
                vec[fnv1a64(token.data() + i, 3) % kDimension] += 1.0;
            }
        }
        double norm = 0.0;
        for (double v : vec) norm += v * v;
        norm = std::sqrt(norm);
        if (norm > 0.0) {
            for (double& v : vec) v /= norm;
        }
        out.push_back(std::move(vec));
    }
    return out;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string host, int port, std::string path,
                                             int dimension, int timeout_ms)
    : host_(std::move(host)), port_(port), path_(std::move(path)), dimension_(dimension),
      timeout_ms_(timeout_ms) {
    if (dimension_ < 8) throw ValidationError("embedding dimension must be >= 8");
}

std::vector<std::vector<double>> HttpEmbeddingProvider::embed(
    const std::vector<std::string>& tokens) {
    httplib::Client client(host_, port_);
    client.set_connection_timeout(0, timeout_ms_ * 1000);
    client.set_read_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);

    nlohmann::json body{{"tokens", tokens}};
    auto res = client.Post(path_, body.dump(), "application/json");
    if (!res || res->status != 200) {
        throw GenerationError("embedding endpoint unreachable or returned an error");
    }
    nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("vectors") || !j.at("vectors").is_array() ||
        j.at("vectors").size() != tokens.size()) {
        throw GenerationError("embedding endpoint returned a malformed body");
    }
    std::vector<std::vector<double>> out;
    for (const auto& row : j.at("vectors")) {
        std::vector<double> vec = row.get<std::vector<double>>();
        if (static_cast<int>(vec.size()) != dimension_) {
            throw GenerationError("embedding endpoint returned the wrong dimension");
        }
        for (double v : vec) {
            if (!std::isfinite(v)) throw GenerationError("embedding vector is not finite");
        }
        out.push_back(std::move(vec));
    }
    return out;
}

} // namespace taxrank
