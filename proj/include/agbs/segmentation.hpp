#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "agbs/errors.hpp"
#include "agbs/tagger.hpp"
#include "agbs/tokenizer.hpp"

namespace agbs::text {

inline constexpr const char* kMaskSentinel = "[MASK]";

// One sub-clause. end_checking_point is the token index the clause ends at
// (a punctuation token, or the last token for an unpunctuated tail).
// keyword_positions lists the maskable token indices inside the span.
struct ClauseSpan {
    std::size_t start = 0;
    std::size_t end_checking_point = 0;
    std::vector<std::size_t> keyword_positions;

    bool operator==(const ClauseSpan&) const = default;
};

struct SentenceSegmentation {
    std::string original_text;
    TokenStream stream;
    std::vector<std::string> tags;  // parallel to stream.tokens
    std::vector<ClauseSpan> clauses;
    std::vector<std::size_t> sentence_boundaries;  // indices of . ? ! tokens

    bool operator==(const SentenceSegmentation&) const = default;
};

// A copy of the token stream with exactly one token replaced by [MASK].
struct MaskedSentence {
    TokenStream stream;
    std::size_t mask_position = 0;
    std::string original_token;
    std::size_t clause_index = 0;    // which clause the mask lives in
    std::size_t checking_point = 0;  // that clause's checking point

    bool operator==(const MaskedSentence&) const = default;
};

enum class MaskPolicy { first_keyword_per_clause, all_keywords };

inline const char* to_string(MaskPolicy p) {
    return p == MaskPolicy::first_keyword_per_clause ? "first_keyword_per_clause" : "all_keywords";
}

// Split a question into sub-clauses ending at punctuation checking points.
// A punctuation token only closes a clause that already contains a word, so
// runs like "..." or a bare "?!" never produce empty clauses; an
// unpunctuated tail becomes a final clause ending at the last token.
inline SentenceSegmentation segment(const std::string& input, const PosTagger& tagger) {
    std::string trimmed(input);
    // pre: non-empty after trim
    {
        auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
        std::size_t b = 0, e = trimmed.size();
        while (b < e && is_space(static_cast<unsigned char>(trimmed[b]))) ++b;
        while (e > b && is_space(static_cast<unsigned char>(trimmed[e - 1]))) --e;
        if (b == e) throw validation_error("segment: text is empty");
    }

    SentenceSegmentation seg;
    seg.original_text = input;
    seg.stream = tokenize(input);

    try {
        seg.tags = tagger.tag(seg.stream.tokens);
    } catch (const error&) {
        throw;
    } catch (const std::exception& ex) {
        throw backend_error(std::string("tagger '") + tagger.id() + "' failed: " + ex.what());
    }
    if (seg.tags.size() != seg.stream.tokens.size())
        throw backend_error("tagger '" + tagger.id() + "' returned " +
                            std::to_string(seg.tags.size()) + " tags for " +
                            std::to_string(seg.stream.tokens.size()) + " tokens");

    const auto& toks = seg.stream.tokens;
    std::size_t clause_start = 0;
    bool clause_has_word = false;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (is_sentence_terminator(toks[i])) seg.sentence_boundaries.push_back(i);
        if (!is_punct_token(toks[i])) clause_has_word = true;
        if (is_clause_terminator(toks[i]) && clause_has_word) {
            seg.clauses.push_back(ClauseSpan{clause_start, i, {}});
            clause_start = i + 1;
            clause_has_word = false;
        }
    }
    if (clause_start < toks.size()) {
        // Unpunctuated tail (or trailing punctuation run): fold into a final
        // clause whose checking point is the last token.
        seg.clauses.push_back(ClauseSpan{clause_start, toks.size() - 1, {}});
    }

    for (ClauseSpan& clause : seg.clauses) {
        for (std::size_t i = clause.start; i <= clause.end_checking_point; ++i) {
            if (!is_punct_token(toks[i]) && is_keyword_tag(seg.tags[i]))
                clause.keyword_positions.push_back(i);
        }
    }
    return seg;
}

// Number of sentences: terminator tokens count one each, a trailing
// fragment after the last terminator counts one more.
inline std::size_t sentence_count(const SentenceSegmentation& seg) {
    std::size_t n = seg.sentence_boundaries.size();
    if (seg.sentence_boundaries.empty() ||
        seg.sentence_boundaries.back() + 1 < seg.stream.tokens.size()) {
        ++n;
    }
    return n;
}

// Token index of the last token of sentence 1, when the text has at least
// two sentences. Used by the engine's start-at-second-sentence rule.
inline std::size_t first_sentence_end(const SentenceSegmentation& seg) {
    return seg.sentence_boundaries.empty() ? 0 : seg.sentence_boundaries.front();
}

inline MaskedSentence make_masked(const SentenceSegmentation& seg, std::size_t clause_index,
                                  std::size_t position) {
    MaskedSentence masked;
    masked.stream = seg.stream;
    masked.mask_position = position;
    masked.original_token = seg.stream.tokens[position].text;
    masked.clause_index = clause_index;
    masked.checking_point = seg.clauses[clause_index].end_checking_point;
    masked.stream.tokens[position].text = kMaskSentinel;
    return masked;
}

// Pick mask targets per clause. Under first_keyword_per_clause only the
// earliest keyword of each clause is masked; clauses without keywords yield
// nothing. Order follows clause order, then position.
inline std::vector<MaskedSentence> select_mask_targets(const SentenceSegmentation& seg,
                                                       MaskPolicy policy) {
    std::vector<MaskedSentence> targets;
    for (std::size_t c = 0; c < seg.clauses.size(); ++c) {
        const ClauseSpan& clause = seg.clauses[c];
        if (clause.keyword_positions.empty()) continue;
        if (policy == MaskPolicy::first_keyword_per_clause) {
            targets.push_back(make_masked(seg, c, clause.keyword_positions.front()));
        } else {
            for (std::size_t pos : clause.keyword_positions)
                targets.push_back(make_masked(seg, c, pos));
        }
    }
    return targets;
}

}  // namespace agbs::text
