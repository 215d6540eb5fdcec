#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "agbs/errors.hpp"
#include "agbs/mlm_backend.hpp"
#include "agbs/segmentation.hpp"

namespace agbs::engine {

// Search knobs. Defaults follow the reference setup: threshold 0.8, search
// scope 13000, step 50. length_norm_alpha and omega are carried in configs
// and run metadata but take no part in the search arithmetic; they are
// reserved knobs (see README).
struct AttackConfig {
    double sigma_th = 0.8;
    std::size_t k = 13000;
    std::size_t step_s = 50;
    double length_norm_alpha = 0.7;
    double omega = 0.7;
    std::size_t max_adjust_iters = 8;
    text::MaskPolicy mask_policy = text::MaskPolicy::first_keyword_per_clause;
    bool start_at_second_sentence = true;
    bool require_final_similarity = false;

    void validate() const {
        if (!(sigma_th > 0.0 && sigma_th < 1.0))
            throw validation_error("AttackConfig: sigma_th must be in (0, 1)");
        if (k < 1) throw validation_error("AttackConfig: k must be >= 1");
        if (step_s < 1) throw validation_error("AttackConfig: step_s must be >= 1");
        if (max_adjust_iters < 1)
            throw validation_error("AttackConfig: max_adjust_iters must be >= 1");
    }

    bool operator==(const AttackConfig&) const = default;
};

// One similarity measurement: candidate at `rank` tried at checking point
// `checking_point` (token index t_i) during `iteration` of checkpoint
// number `checkpoint_index`.
struct TraceEntry {
    std::size_t checkpoint_index = 0;
    std::size_t checking_point = 0;
    std::size_t iteration = 0;
    std::size_t rank = 0;
    double sigma_sim = 0.0;
    std::string token;

    bool operator==(const TraceEntry&) const = default;
};

struct Substitution {
    std::size_t mask_position = 0;
    std::string original;
    std::string replacement;

    bool operator==(const Substitution&) const = default;
};

struct SearchState {
    std::size_t current_rank = 0;
    std::vector<TraceEntry> trace;
    std::vector<Substitution> substitutions;
};

struct AdversarialResult {
    std::string original_text;
    std::string adversarial_text;
    std::vector<double> per_checkpoint_similarity;
    double final_similarity = 1.0;
    bool accepted = false;
    double elapsed_s = 0.0;
    SearchState state;
};

// Engine failure carrying whatever trace existed when the backend died.
struct attack_error : error {
    attack_error(const std::string& message, std::vector<TraceEntry> trace)
        : error(message), partial_trace(std::move(trace)) {}

    std::vector<TraceEntry> partial_trace;
};

// Middle of the Top-k list, floored at rank 1.
inline std::size_t initial_rank(std::size_t k) {
    if (k < 1) throw validation_error("initial_rank: k must be >= 1");
    return std::max<std::size_t>(1, k / 2);
}

// Rank update. Below-threshold similarity moves toward rank 1 (higher
// probability, closer to the original); above-threshold moves away; exact
// equality stays put. Clamped into [1, k].
inline std::size_t adjust_rank(std::size_t p, double sigma_sim, double sigma_th, std::size_t s,
                               std::size_t k) {
    if (p < 1 || p > k) throw validation_error("adjust_rank: rank out of [1, k]");
    if (sigma_sim < sigma_th) return p > s ? p - s : 1;
    if (sigma_sim > sigma_th) return std::min(k, p + s);
    return p;
}

// Splice a candidate token into the masked slot. Every other byte of the
// sentence, including spacing, survives untouched.
inline std::string substitute(const text::MaskedSentence& masked, const std::string& token) {
    if (token.empty()) throw validation_error("substitute: token is empty");
    text::TokenStream stream = masked.stream;
    stream.tokens.at(masked.mask_position).text = token;
    return text::detokenize(stream);
}

// Cosine similarity of the two prefix embeddings (Sim at a checking point).
inline double checkpoint_similarity(const std::string& original_prefix,
                                    const std::string& generated_prefix, mlm::MlmBackend& backend) {
    return mlm::cosine_similarity(backend.embed(original_prefix), backend.embed(generated_prefix));
}

namespace detail {

// Candidates a word-level substitution can actually use: no wordpiece
// fragments, no special tokens. Scanning keeps the requested rank for
// accounting and walks down the list until something usable appears.
inline bool usable_candidate(const std::string& token) {
    if (token.empty()) return false;
    if (token.size() >= 2 && token[0] == '#' && token[1] == '#') return false;
    if (token.front() == '[' && token.back() == ']') return false;
    return true;
}

inline std::optional<std::string> pick_candidate(const mlm::CandidateSet& set, std::size_t rank) {
    for (std::size_t i = rank - 1; i < set.candidates.size(); ++i)
        if (usable_candidate(set.candidates[i].token)) return set.candidates[i].token;
    for (std::size_t i = rank - 1; i-- > 0;)
        if (usable_candidate(set.candidates[i].token)) return set.candidates[i].token;
    return std::nullopt;
}

enum class SearchMode { dynamic_rank, static_rank };

inline AdversarialResult run_attack(const std::string& input, const AttackConfig& config,
                                    mlm::MlmBackend& backend, const text::PosTagger& tagger,
                                    SearchMode mode) {
    config.validate();
    if (input.empty()) throw validation_error("attack_sentence: text is empty");
    const auto started = std::chrono::steady_clock::now();

    AdversarialResult result;
    result.original_text = input;
    SearchState& state = result.state;

    try {
        const text::SentenceSegmentation seg = text::segment(input, tagger);
        std::vector<text::MaskedSentence> targets =
            text::select_mask_targets(seg, config.mask_policy);

        // Perturbation starts at the second sentence when there is one;
        // single-sentence questions are attacked from their first clause.
        if (config.start_at_second_sentence && text::sentence_count(seg) >= 2) {
            const std::size_t cutoff = text::first_sentence_end(seg);
            std::erase_if(targets, [&](const text::MaskedSentence& m) {
                return m.checking_point <= cutoff;
            });
        }

        text::TokenStream current = seg.stream;
        state.current_rank = initial_rank(config.k);

        std::size_t checkpoint_ordinal = 0;
        for (const text::MaskedSentence& target : targets) {
            const std::size_t mask_pos = target.mask_position;
            const std::size_t t_i = target.checking_point;
            const std::string original_token = current.tokens[mask_pos].text;

            // Re-mask over the updated context so substitutions committed at
            // earlier checking points condition this query.
            text::MaskedSentence masked;
            masked.stream = current;
            masked.stream.tokens[mask_pos].text = text::kMaskSentinel;
            masked.mask_position = mask_pos;
            masked.original_token = original_token;
            masked.clause_index = target.clause_index;
            masked.checking_point = t_i;

            const mlm::CandidateSet candidates = backend.top_k_candidates(masked, config.k);
            const mlm::EmbeddingVector original_prefix =
                backend.embed(text::detokenize_prefix(seg.stream, t_i));

            std::string committed = original_token;
            double last_sigma = 1.0;
            const std::size_t iters =
                mode == SearchMode::static_rank ? 1 : config.max_adjust_iters;
            for (std::size_t iteration = 0; iteration < iters; ++iteration) {
                const std::size_t rank_used =
                    std::min(state.current_rank, std::max<std::size_t>(1, candidates.effective_k));
                const std::string token =
                    pick_candidate(candidates, rank_used).value_or(original_token);

                text::TokenStream trial = current;
                trial.tokens[mask_pos].text = token;
                const double sigma = mlm::cosine_similarity(
                    original_prefix, backend.embed(text::detokenize_prefix(trial, t_i)));

                state.trace.push_back(
                    TraceEntry{checkpoint_ordinal, t_i, iteration, rank_used, sigma, token});
                committed = token;
                last_sigma = sigma;

                if (mode == SearchMode::static_rank) break;
                const std::size_t next = adjust_rank(state.current_rank, sigma, config.sigma_th,
                                                     config.step_s, config.k);
                if (next == state.current_rank) break;
                state.current_rank = next;
            }

            current.tokens[mask_pos].text = committed;
            if (committed != original_token)
                state.substitutions.push_back(Substitution{mask_pos, original_token, committed});
            result.per_checkpoint_similarity.push_back(last_sigma);
            ++checkpoint_ordinal;
        }

        result.adversarial_text = text::detokenize(current);
        result.final_similarity = mlm::cosine_similarity(backend.embed(result.original_text),
                                                         backend.embed(result.adversarial_text));
    } catch (const validation_error&) {
        throw;
    } catch (const error& ex) {
        throw attack_error(ex.what(), state.trace);
    }

    bool changed = !state.substitutions.empty();
    if (config.require_final_similarity && result.final_similarity < config.sigma_th - 0.05)
        changed = false;
    result.accepted = changed;
    result.elapsed_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

}  // namespace detail

// Adaptive search: per checking point, try the candidate at the current
// rank, measure prefix similarity, move the rank by +-step_s against the
// threshold, and carry the committed substitution into the context for the
// next checking point. The rank pointer persists across checking points.
inline AdversarialResult attack_sentence(const std::string& input, const AttackConfig& config,
                                         mlm::MlmBackend& backend, const text::PosTagger& tagger) {
    return detail::run_attack(input, config, backend, tagger, detail::SearchMode::dynamic_rank);
}

// Ablation variant: same pipeline with the rank pinned at floor(k/2) and no
// adjustment, so every trace entry carries the same rank.
inline AdversarialResult attack_sentence_static(const std::string& input,
                                                const AttackConfig& config,
                                                mlm::MlmBackend& backend,
                                                const text::PosTagger& tagger) {
    return detail::run_attack(input, config, backend, tagger, detail::SearchMode::static_rank);
}

// Trace export: one JSONL line per (checkpoint, iteration) measurement.
inline void write_trace_jsonl(std::ostream& out, const std::string& qa_id,
                              const AdversarialResult& result) {
    for (const TraceEntry& entry : result.state.trace) {
        nlohmann::json line{{"qa_id", qa_id},
                            {"t_i", entry.checking_point},
                            {"rank", entry.rank},
                            {"sigma_sim", entry.sigma_sim},
                            {"token", entry.token}};
        out << line.dump() << '\n';
    }
}

}  // namespace agbs::engine
