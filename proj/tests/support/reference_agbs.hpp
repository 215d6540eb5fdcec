#pragma once

// Straight-line reference implementation of the adaptive rank search,
// written independently of agbs/engine.hpp and kept deliberately naive: no
// early exits beyond the stable-rank stop, no shared helpers, every step
// spelled out. The engine must reproduce its output token for token; the
// golden files under data/ were generated from this code.

#include <algorithm>
#include <string>
#include <vector>

#include "agbs/mlm_backend.hpp"
#include "agbs/segmentation.hpp"
#include "agbs/tagger.hpp"
#include "agbs/tokenizer.hpp"

namespace agbs_test::reference {

struct Step {
    std::size_t checkpoint = 0;
    std::size_t t_i = 0;
    std::size_t iteration = 0;
    std::size_t rank = 0;
    double sigma = 0.0;
    std::string token;
};

struct Output {
    std::string adversarial;
    std::vector<Step> steps;
    std::vector<double> checkpoint_similarity;
    double final_similarity = 1.0;
    bool changed = false;
};

inline bool reference_usable(const std::string& token) {
    if (token.empty()) return false;
    if (token.size() >= 2 && token.substr(0, 2) == "##") return false;
    if (token.front() == '[' && token.back() == ']') return false;
    return true;
}

inline Output run(const std::string& input, double sigma_th, std::size_t k, std::size_t step_s,
                  std::size_t max_iters, bool start_second_sentence, bool pin_static,
                  agbs::mlm::MlmBackend& backend, const agbs::text::PosTagger& tagger) {
    using namespace agbs::text;

    Output out;
    const SentenceSegmentation seg = segment(input, tagger);
    std::vector<MaskedSentence> targets =
        select_mask_targets(seg, MaskPolicy::first_keyword_per_clause);

    if (start_second_sentence && sentence_count(seg) >= 2) {
        std::vector<MaskedSentence> kept;
        for (const MaskedSentence& m : targets)
            if (m.checking_point > first_sentence_end(seg)) kept.push_back(m);
        targets = kept;
    }

    TokenStream working = seg.stream;
    std::size_t rank = k / 2;
    if (rank < 1) rank = 1;

    for (std::size_t target_index = 0; target_index < targets.size(); ++target_index) {
        const MaskedSentence& target = targets[target_index];
        const std::size_t position = target.mask_position;
        const std::size_t t_i = target.checking_point;
        const std::string before = working.tokens[position].text;

        MaskedSentence query;
        query.stream = working;
        query.stream.tokens[position].text = kMaskSentinel;
        query.mask_position = position;
        query.original_token = before;
        const agbs::mlm::CandidateSet candidates = backend.top_k_candidates(query, k);

        const std::string original_prefix = detokenize_prefix(seg.stream, t_i);

        std::string chosen = before;
        double sigma_last = 1.0;
        const std::size_t iteration_budget = pin_static ? 1 : max_iters;
        for (std::size_t iteration = 0; iteration < iteration_budget; ++iteration) {
            std::size_t usable_rank = rank;
            if (usable_rank > candidates.candidates.size())
                usable_rank = candidates.candidates.size();
            if (usable_rank < 1) usable_rank = 1;

            std::string token;
            bool found = false;
            for (std::size_t i = usable_rank - 1; i < candidates.candidates.size(); ++i) {
                if (reference_usable(candidates.candidates[i].token)) {
                    token = candidates.candidates[i].token;
                    found = true;
                    break;
                }
            }
            if (!found) {
                for (std::size_t i = usable_rank - 1; i > 0; --i) {
                    if (reference_usable(candidates.candidates[i - 1].token)) {
                        token = candidates.candidates[i - 1].token;
                        found = true;
                        break;
                    }
                }
            }
            if (!found) token = before;

            TokenStream trial = working;
            trial.tokens[position].text = token;
            const double sigma = agbs::mlm::cosine_similarity(
                backend.embed(original_prefix), backend.embed(detokenize_prefix(trial, t_i)));

            Step step;
            step.checkpoint = target_index;
            step.t_i = t_i;
            step.iteration = iteration;
            step.rank = usable_rank;
            step.sigma = sigma;
            step.token = token;
            out.steps.push_back(step);

            chosen = token;
            sigma_last = sigma;

            if (pin_static) break;

            std::size_t next = rank;
            if (sigma < sigma_th) {
                next = rank > step_s ? rank - step_s : 1;
            } else if (sigma > sigma_th) {
                next = rank + step_s;
                if (next > k) next = k;
            }
            if (next == rank) break;
            rank = next;
        }

        working.tokens[position].text = chosen;
        if (chosen != before) out.changed = true;
        out.checkpoint_similarity.push_back(sigma_last);
    }

    out.adversarial = detokenize(working);
    out.final_similarity = agbs::mlm::cosine_similarity(backend.embed(input),
                                                        backend.embed(out.adversarial));
    return out;
}

}  // namespace agbs_test::reference
