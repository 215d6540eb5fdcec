#pragma once

#include <algorithm>
#include <cstdlib>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "agbs/corpus.hpp"
#include "agbs/errors.hpp"
#include "agbs/grading.hpp"

namespace agbs::victim {

enum class Protocol { openai_compatible, ollama_style, scripted };

inline const char* to_string(Protocol p) {
    switch (p) {
        case Protocol::openai_compatible: return "openai_compatible";
        case Protocol::ollama_style: return "ollama_style";
        case Protocol::scripted: return "scripted";
    }
    return "?";
}

struct VictimEndpoint {
    std::string name;
    Protocol protocol = Protocol::openai_compatible;
    std::string base_url;
    std::string model_id;
    std::string api_key_env;  // env var name; resolved at query time, never stored
    double timeout_s = 60.0;
    std::size_t max_retries = 2;
    std::size_t max_concurrency = 4;
    double backoff_base_s = 0.25;
    double requests_per_minute = 0.0;  // 0 = unthrottled

    void validate() const {
        if (timeout_s <= 0) throw validation_error("endpoint '" + name + "': timeout_s must be > 0");
        if (max_concurrency < 1)
            throw validation_error("endpoint '" + name + "': max_concurrency must be >= 1");
        if (requests_per_minute < 0)
            throw validation_error("endpoint '" + name + "': requests_per_minute must be >= 0");
    }

    std::string api_key() const {
        std::string var = api_key_env;
        if (var.empty()) {
            var = name;
            std::transform(var.begin(), var.end(), var.begin(), [](unsigned char c) {
                return std::isalnum(c) ? static_cast<char>(std::toupper(c)) : '_';
            });
            var += "_API_KEY";
        }
        const char* value = std::getenv(var.c_str());
        return value ? value : "";
    }
};

struct VictimResponse {
    std::string raw_text;
    double latency_s = 0.0;  // wall clock around the successful attempt only
    std::size_t attempt_count = 1;
    std::string endpoint_name;
};

// Verbatim instruction templates per (answer kind, protocol family); the
// question follows the template's colon after a single space.
inline std::string build_prompt(corpus::AnswerKind kind, Protocol protocol,
                                const std::string& question) {
    if (question.empty()) throw validation_error("build_prompt: question is empty");
    const char* prefix = nullptr;
    const bool ollama = protocol == Protocol::ollama_style;
    if (kind == corpus::AnswerKind::numeric) {
        prefix = ollama
                     ? "Give me the numerical answers directly, without giving the intermediate "
                       "steps:"
                     : "Give me the numerical answers directly in the following questions, "
                       "without giving the intermediate steps:";
    } else {
        prefix = ollama
                     ? "Please give me a brief answer directly and promise to answer in English:"
                     : "Please give me a brief answer directly to the following questions and "
                       "promise to answer in English:";
    }
    return std::string(prefix) + " " + question;
}

// Transport-agnostic victim handle. Implementations bound their own
// concurrency; callers may fan out freely.
class VictimClient {
public:
    virtual ~VictimClient() = default;

    virtual VictimResponse query(const std::string& prompt) = 0;
    virtual std::string name() const = 0;
};

// Rule-based responder for offline runs and tests. It knows the fixture's
// questions and gold answers, matches an incoming prompt to the closest
// known question by word overlap (substitutions shift only a few words, so
// the original still wins), and answers correctly unless the prompt
// contains a poison token.
class ScriptedVictim : public VictimClient {
public:
    struct Entry {
        std::string question;
        std::string gold_answer;
        corpus::AnswerKind answer_kind = corpus::AnswerKind::text;
    };

    ScriptedVictim(std::vector<Entry> entries, std::set<std::string> poison_tokens,
                   std::string name = "scripted")
        : entries_(std::move(entries)), poison_(std::move(poison_tokens)), name_(std::move(name)) {}

    VictimResponse query(const std::string& prompt) override {
        const Entry* best = match(prompt);
        VictimResponse response;
        response.endpoint_name = name_;
        response.latency_s = 0.0;  // fixed so offline artifacts are byte-stable
        response.attempt_count = 1;
        if (!best) {
            response.raw_text = "I do not know.";
            return response;
        }
        if (poisoned(prompt)) {
            response.raw_text = wrong_answer(*best);
        } else {
            response.raw_text = best->gold_answer;
        }
        return response;
    }

    std::string name() const override { return name_; }

private:
    const Entry* match(const std::string& prompt) const {
        const std::set<std::string> prompt_words = grading::tokenize_for_grading(prompt);
        const Entry* best = nullptr;
        std::size_t best_overlap = 0;
        for (const Entry& entry : entries_) {
            const std::set<std::string> words = grading::tokenize_for_grading(entry.question);
            std::size_t overlap = 0;
            for (const std::string& w : words)
                if (prompt_words.count(w)) ++overlap;
            if (overlap > best_overlap) {
                best_overlap = overlap;
                best = &entry;
            }
        }
        return best;
    }

    bool poisoned(const std::string& prompt) const {
        if (poison_.empty()) return false;
        const std::set<std::string> words = grading::tokenize_for_grading(prompt);
        for (const std::string& p : poison_)
            if (words.count(p)) return true;
        return false;
    }

    static std::string wrong_answer(const Entry& entry) {
        if (entry.answer_kind == corpus::AnswerKind::numeric) {
            auto canonical = grading::canonicalize_gold_number(entry.gold_answer);
            if (canonical) {
                // Off-by-one keeps the reply shaped like a number while
                // guaranteeing the exact-match grader rejects it.
                try {
                    const double v = std::stod(canonical->text);
                    const long long shifted = static_cast<long long>(v) + 1;
                    return std::to_string(shifted);
                } catch (...) {
                }
            }
            return "0";
        }
        return "That question cannot be resolved.";
    }

    std::vector<Entry> entries_;
    std::set<std::string> poison_;
    std::string name_;
};

inline std::shared_ptr<ScriptedVictim> scripted_victim_for(
    const std::vector<corpus::QAPair>& pairs, std::set<std::string> poison_tokens,
    std::string name = "scripted") {
    std::vector<ScriptedVictim::Entry> entries;
    entries.reserve(pairs.size());
    for (const corpus::QAPair& pair : pairs)
        entries.push_back(ScriptedVictim::Entry{pair.question, pair.gold_answer, pair.answer_kind});
    return std::make_shared<ScriptedVictim>(std::move(entries), std::move(poison_tokens),
                                            std::move(name));
}

}  // namespace agbs::victim
