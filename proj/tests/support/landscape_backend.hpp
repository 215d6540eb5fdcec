#pragma once

// Test backend with a fully controlled similarity landscape. Candidates are
// named r0001, r0002, ... by rank; embeddings are 2-d unit vectors chosen
// so that the prefix similarity seen by the engine equals g(rank) for the
// last r-token present in the text. g decreases linearly in rank, so the
// landscape crosses any threshold at a known rank and the search must
// oscillate around it.

#include <cmath>
#include <cstdio>
#include <string>

#include "agbs/mlm_backend.hpp"

namespace agbs_test {

class LandscapeBackend : public agbs::mlm::MlmBackend {
public:
    explicit LandscapeBackend(std::size_t vocabulary = 1000, double slope = 0.001)
        : vocabulary_(vocabulary), slope_(slope) {}

    double g(std::size_t rank) const {
        double value = 1.0 - slope_ * static_cast<double>(rank - 1);
        return std::max(-1.0, std::min(1.0, value));
    }

    agbs::mlm::CandidateSet top_k_candidates(const agbs::text::MaskedSentence& masked,
                                             std::size_t k) override {
        agbs::mlm::CandidateSet set;
        set.mask_position = masked.mask_position;
        set.requested_k = k;
        const std::size_t take = std::min(k, vocabulary_);
        set.effective_k = take;
        for (std::size_t i = 0; i < take; ++i) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "r%04zu", i + 1);
            set.candidates.push_back(agbs::mlm::Candidate{
                buf, 1.0 / static_cast<double>(i + 2)});
        }
        return set;
    }

    agbs::mlm::EmbeddingVector embed(const std::string& text) override {
        const std::size_t rank = last_rank_token(text);
        agbs::mlm::EmbeddingVector v;
        v.backend_id = id();
        if (rank == 0) {
            v.values = {1.0, 0.0};
        } else {
            const double c = g(rank);
            v.values = {c, std::sqrt(std::max(0.0, 1.0 - c * c))};
        }
        return v;
    }

    std::size_t embedding_dimension() const override { return 2; }
    std::string id() const override { return "landscape"; }
    bool shareable() const override { return true; }

private:
    static std::size_t last_rank_token(const std::string& text) {
        std::size_t rank = 0;
        for (std::size_t i = 0; i + 4 < text.size(); ++i) {
            if (text[i] != 'r') continue;
            bool digits = true;
            for (std::size_t d = 1; d <= 4; ++d)
                if (!std::isdigit(static_cast<unsigned char>(text[i + d]))) digits = false;
            const bool word_start = i == 0 || !std::isalnum(static_cast<unsigned char>(text[i - 1]));
            const bool word_end =
                i + 5 >= text.size() || !std::isalnum(static_cast<unsigned char>(text[i + 5]));
            if (digits && word_start && word_end)
                rank = static_cast<std::size_t>(std::stoul(text.substr(i + 1, 4)));
        }
        return rank;
    }

    std::size_t vocabulary_;
    double slope_;
};

}  // namespace agbs_test
