#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "agbs/errors.hpp"
#include "agbs/hashing.hpp"
#include "agbs/segmentation.hpp"

namespace agbs::mlm {

struct Candidate {
    std::string token;
    double probability = 0.0;

    bool operator==(const Candidate&) const = default;
};

// Rank-ordered Top-k list for one mask position. Rank r lives at index
// r - 1; probabilities are non-increasing. When the vocabulary is smaller
// than the requested k, effective_k records what was actually available.
struct CandidateSet {
    std::size_t mask_position = 0;
    std::vector<Candidate> candidates;
    std::size_t requested_k = 0;
    std::size_t effective_k = 0;

    const Candidate& at_rank(std::size_t rank) const { return candidates.at(rank - 1); }
};

struct EmbeddingVector {
    std::vector<double> values;
    std::string backend_id;

    std::size_t dimension() const { return values.size(); }
};

inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension() != b.dimension())
        throw validation_error("cosine_similarity: dimension mismatch (" +
                               std::to_string(a.dimension()) + " vs " +
                               std::to_string(b.dimension()) + ")");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0.0 || nb == 0.0)
        throw validation_error("cosine_similarity: zero vector has no direction");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Masked-token candidate distributions plus sentence embeddings, behind one
// interface so the search engine cannot tell an in-process model from an
// HTTP one. Implementations that are not safe for concurrent queries must
// return false from shareable(); the harness serializes calls to them.
class MlmBackend {
public:
    virtual ~MlmBackend() = default;

    virtual CandidateSet top_k_candidates(const text::MaskedSentence& masked, std::size_t k) = 0;
    virtual EmbeddingVector embed(const std::string& text) = 0;
    virtual std::size_t embedding_dimension() const = 0;
    virtual std::string id() const = 0;
    virtual bool shareable() const = 0;
};

// Deterministic stand-in for a real masked LM. Everything is a pure
// function of (text bytes, mask position, token id, seed):
//   vocabulary   w0000..w9999
//   score(c)     keyed hash of (masked text, mask position, token id) in (0,1)
//   probability  softmax of score over the whole vocabulary
//   embed(text)  64 components, each hash(text, component) in [-1,1], then
//                L2-normalized
// Same inputs give identical results on every platform, which is what the
// golden end-to-end tests lean on.
class MockMlmBackend : public MlmBackend {
public:
    static constexpr std::size_t kVocabularySize = 10000;
    static constexpr std::size_t kDimension = 64;

    explicit MockMlmBackend(std::uint64_t seed = 0x41474253ULL) : seed_(seed) {}

    CandidateSet top_k_candidates(const text::MaskedSentence& masked, std::size_t k) override {
        if (k == 0) throw validation_error("top_k_candidates: k must be >= 1");
        const std::string context = text::detokenize(masked.stream);
        const std::uint64_t context_key = hashing::hash_combine(
            hashing::hash_bytes(context, seed_), static_cast<std::uint64_t>(masked.mask_position));

        std::vector<double> scores(kVocabularySize);
        double max_score = 0.0;
        for (std::size_t id = 0; id < kVocabularySize; ++id) {
            scores[id] = hashing::to_unit_open(hashing::hash_combine(context_key, id));
            max_score = std::max(max_score, scores[id]);
        }
        double denom = 0.0;
        for (double s : scores) denom += std::exp(s - max_score);

        std::vector<std::size_t> ids(kVocabularySize);
        std::iota(ids.begin(), ids.end(), 0);
        const std::size_t take = std::min(k, kVocabularySize);
        std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(take), ids.end(),
                          [&](std::size_t a, std::size_t b) {
                              if (scores[a] != scores[b]) return scores[a] > scores[b];
                              return a < b;  // ties break toward the lower vocabulary index
                          });

        CandidateSet set;
        set.mask_position = masked.mask_position;
        set.requested_k = k;
        set.effective_k = take;
        set.candidates.reserve(take);
        for (std::size_t i = 0; i < take; ++i) {
            set.candidates.push_back(
                Candidate{token_for(ids[i]), std::exp(scores[ids[i]] - max_score) / denom});
        }
        return set;
    }

    EmbeddingVector embed(const std::string& input) override {
        if (input.empty()) throw validation_error("embed: text is empty");
        const std::uint64_t key = hashing::hash_bytes(input, seed_ ^ 0x656d626564ULL);
        EmbeddingVector v;
        v.backend_id = id();
        v.values.resize(kDimension);
        double norm = 0.0;
        for (std::size_t c = 0; c < kDimension; ++c) {
            v.values[c] = hashing::to_signed_unit(hashing::hash_combine(key, c));
            norm += v.values[c] * v.values[c];
        }
        norm = std::sqrt(norm);
        for (double& x : v.values) x /= norm;
        return v;
    }

    std::size_t embedding_dimension() const override { return kDimension; }
    std::string id() const override { return "mock"; }
    bool shareable() const override { return true; }

    static std::string token_for(std::size_t vocab_id) {
        char buf[8];
        std::snprintf(buf, sizeof buf, "w%04zu", vocab_id);
        return std::string(buf);
    }

private:
    std::uint64_t seed_;
};

}  // namespace agbs::mlm
