#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "agbs/errors.hpp"
#include "agbs/tokenizer.hpp"

namespace agbs::text {

// Keyword tags: only tokens tagged with one of these are ever masked.
inline bool is_keyword_tag(const std::string& tag) {
    return tag == "VB" || tag == "VBZ" || tag == "VBD" || tag == "VBN" || tag == "NNS";
}

// POS tagging capability. Implementations must say whether one instance may
// be shared across threads; the engine serializes calls otherwise.
class PosTagger {
public:
    virtual ~PosTagger() = default;

    // One Penn-style tag per token. Throws backend_error on failure.
    virtual std::vector<std::string> tag(const std::vector<Token>& tokens) const = 0;

    virtual bool shareable() const { return false; }
    virtual std::string id() const = 0;
};

// Dictionary tagger for deterministic fixtures: exact lowercase lookup,
// punctuation tags itself, everything else falls back to NN.
class StubTagger : public PosTagger {
public:
    explicit StubTagger(std::map<std::string, std::string> entries)
        : entries_(std::move(entries)) {}

    std::vector<std::string> tag(const std::vector<Token>& tokens) const override {
        std::vector<std::string> tags;
        tags.reserve(tokens.size());
        for (const Token& t : tokens) {
            if (is_punct_token(t)) {
                tags.push_back(t.text);
                continue;
            }
            auto it = entries_.find(lower(t.text));
            tags.push_back(it != entries_.end() ? it->second : "NN");
        }
        return tags;
    }

    bool shareable() const override { return true; }
    std::string id() const override { return "stub"; }

private:
    static std::string lower(const std::string& s) {
        std::string out(s);
        std::transform(out.begin(), out.end(), out.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        return out;
    }

    std::map<std::string, std::string> entries_;
};

// Heuristic English tagger: small closed-class lexicon, verb form tables,
// and suffix rules. Deterministic and dependency-free; good enough to find
// the VB/VBZ/VBD/VBN/NNS keywords in everyday QA text. Not a replacement
// for a trained tagger on hard text.
class RuleTagger : public PosTagger {
public:
    std::vector<std::string> tag(const std::vector<Token>& tokens) const override {
        std::vector<std::string> tags;
        tags.reserve(tokens.size());
        for (const Token& t : tokens) tags.push_back(tag_one(t));
        return tags;
    }

    bool shareable() const override { return true; }
    std::string id() const override { return "rule"; }

private:
    static std::string lower(const std::string& s) {
        std::string out(s);
        std::transform(out.begin(), out.end(), out.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        return out;
    }

    static bool is_number(const std::string& s) {
        bool digit_seen = false;
        for (char c : s) {
            if (std::isdigit(static_cast<unsigned char>(c))) {
                digit_seen = true;
            } else if (c != '.' && c != ',' && c != '-' && c != '+') {
                return false;
            }
        }
        return digit_seen;
    }

    static const std::map<std::string, std::string>& lexicon() {
        // Closed classes plus the irregular verbs that matter for QA text.
        static const std::map<std::string, std::string> table = {
            {"the", "DT"},    {"a", "DT"},      {"an", "DT"},     {"this", "DT"},
            {"that", "DT"},   {"these", "DT"},  {"those", "DT"},  {"each", "DT"},
            {"every", "DT"},  {"some", "DT"},   {"any", "DT"},    {"no", "DT"},
            {"all", "DT"},    {"both", "DT"},   {"another", "DT"},
            {"i", "PRP"},     {"you", "PRP"},   {"he", "PRP"},    {"she", "PRP"},
            {"it", "PRP"},    {"we", "PRP"},    {"they", "PRP"},  {"him", "PRP"},
            {"her", "PRP"},   {"them", "PRP"},  {"me", "PRP"},    {"us", "PRP"},
            {"his", "PRP$"},  {"their", "PRP$"},{"its", "PRP$"},  {"my", "PRP$"},
            {"your", "PRP$"}, {"our", "PRP$"},
            {"of", "IN"},     {"in", "IN"},     {"on", "IN"},     {"at", "IN"},
            {"by", "IN"},     {"for", "IN"},    {"with", "IN"},   {"from", "IN"},
            {"to", "TO"},     {"into", "IN"},   {"over", "IN"},   {"under", "IN"},
            {"after", "IN"},  {"before", "IN"}, {"between", "IN"},{"during", "IN"},
            {"per", "IN"},    {"than", "IN"},   {"about", "IN"},
            {"and", "CC"},    {"or", "CC"},     {"but", "CC"},    {"nor", "CC"},
            {"if", "IN"},     {"because", "IN"},{"while", "IN"},  {"when", "WRB"},
            {"where", "WRB"}, {"why", "WRB"},   {"how", "WRB"},
            {"what", "WP"},   {"who", "WP"},    {"which", "WDT"}, {"whose", "WP$"},
            {"not", "RB"},    {"now", "RB"},    {"then", "RB"},   {"there", "EX"},
            {"here", "RB"},   {"also", "RB"},   {"only", "RB"},   {"very", "RB"},
            {"more", "JJR"},  {"most", "JJS"},  {"many", "JJ"},   {"much", "JJ"},
            {"few", "JJ"},    {"left", "VBN"},  {"total", "NN"},  {"together", "RB"},
            {"is", "VBZ"},    {"are", "VBP"},   {"was", "VBD"},   {"were", "VBD"},
            {"be", "VB"},     {"been", "VBN"},  {"being", "VBG"},
            {"has", "VBZ"},   {"have", "VB"},   {"had", "VBD"},   {"having", "VBG"},
            {"does", "VBZ"},  {"do", "VB"},     {"did", "VBD"},   {"done", "VBN"},
            {"will", "MD"},   {"would", "MD"},  {"can", "MD"},    {"could", "MD"},
            {"should", "MD"}, {"may", "MD"},    {"might", "MD"},  {"must", "MD"},
            {"gets", "VBZ"},  {"get", "VB"},    {"got", "VBD"},   {"gotten", "VBN"},
            {"goes", "VBZ"},  {"go", "VB"},     {"went", "VBD"},  {"gone", "VBN"},
            {"makes", "VBZ"}, {"make", "VB"},   {"made", "VBD"},
            {"takes", "VBZ"}, {"take", "VB"},   {"took", "VBD"},  {"taken", "VBN"},
            {"gives", "VBZ"}, {"give", "VB"},   {"gave", "VBD"},  {"given", "VBN"},
            {"buys", "VBZ"},  {"buy", "VB"},    {"bought", "VBD"},
            {"sells", "VBZ"}, {"sell", "VB"},   {"sold", "VBD"},
            {"pays", "VBZ"},  {"pay", "VB"},    {"paid", "VBD"},
            {"runs", "VBZ"},  {"run", "VB"},    {"ran", "VBD"},
            {"eats", "VBZ"},  {"eat", "VB"},    {"ate", "VBD"},   {"eaten", "VBN"},
            {"finds", "VBZ"}, {"find", "VB"},   {"found", "VBD"},
            {"keeps", "VBZ"}, {"keep", "VB"},   {"kept", "VBD"},
            {"puts", "VBZ"},  {"put", "VB"},
            {"sees", "VBZ"},  {"see", "VB"},    {"saw", "VBD"},   {"seen", "VBN"},
            {"says", "VBZ"},  {"say", "VB"},    {"said", "VBD"},
            {"holds", "VBZ"}, {"hold", "VB"},   {"held", "VBD"},
            {"loses", "VBZ"}, {"lose", "VB"},   {"lost", "VBD"},
            {"wins", "VBZ"},  {"win", "VB"},    {"won", "VBD"},
            {"writes", "VBZ"},{"write", "VB"},  {"wrote", "VBD"}, {"written", "VBN"},
            {"reads", "VBZ"}, {"read", "VB"},
            {"knows", "VBZ"}, {"know", "VB"},   {"knew", "VBD"},  {"known", "VBN"},
            {"comes", "VBZ"}, {"come", "VB"},   {"came", "VBD"},
            {"leaves", "VBZ"},{"leave", "VB"},
            {"spends", "VBZ"},{"spend", "VB"},  {"spent", "VBD"},
            {"costs", "VBZ"}, {"cost", "VB"},
            {"needs", "VBZ"}, {"need", "VB"},
            {"wants", "VBZ"}, {"want", "VB"},
            {"owns", "VBZ"},  {"own", "VB"},
            {"uses", "VBZ"},  {"use", "VB"},    {"used", "VBN"},
            {"plays", "VBZ"}, {"play", "VB"},   {"played", "VBD"},
            {"starts", "VBZ"},{"start", "VB"},  {"started", "VBD"},
            {"adds", "VBZ"},  {"add", "VB"},    {"added", "VBD"},
        };
        return table;
    }

    static bool ends_with(const std::string& s, const char* suffix) {
        std::string_view sv(suffix);
        return s.size() >= sv.size() && s.compare(s.size() - sv.size(), sv.size(), sv) == 0;
    }

    std::string tag_one(const Token& t) const {
        if (is_punct_token(t)) return t.text;
        const std::string w = lower(t.text);
        if (is_number(w)) return "CD";
        auto it = lexicon().find(w);
        if (it != lexicon().end()) return it->second;
        if (w.size() > 4 && ends_with(w, "ing")) return "VBG";
        if (w.size() > 3 && ends_with(w, "ed")) return "VBD";
        if (w.size() > 2 && ends_with(w, "ly")) return "RB";
        // Plural heuristic: trailing -s that is not -ss/-us/-is. Verb
        // third-person forms not in the lexicon land here too; NNS is the
        // more common case in QA text and both are keyword tags anyway.
        if (w.size() > 3 && w.back() == 's' && !ends_with(w, "ss") && !ends_with(w, "us") &&
            !ends_with(w, "is")) {
            return "NNS";
        }
        return "NN";
    }
};

inline std::shared_ptr<PosTagger> make_rule_tagger() { return std::make_shared<RuleTagger>(); }

}  // namespace agbs::text
