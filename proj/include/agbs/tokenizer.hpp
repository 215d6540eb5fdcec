#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace agbs::text {

// Word-level token that remembers the exact whitespace preceding it, so
// detokenize(tokenize(s)) == s byte for byte. Mask substitution swaps the
// text field and leaves the spacing untouched.
struct Token {
    std::string text;
    std::string leading_ws;

    bool operator==(const Token&) const = default;
};

// Token sequence plus whatever whitespace followed the last token.
struct TokenStream {
    std::vector<Token> tokens;
    std::string trailing_ws;

    bool operator==(const TokenStream&) const = default;
};

inline bool is_punct_char(char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

// True when the token is nothing but punctuation characters.
inline bool is_punct_token(const Token& t) {
    if (t.text.empty()) return false;
    for (char c : t.text)
        if (!is_punct_char(c)) return false;
    return true;
}

// Clause terminators; each one ends a sub-clause and becomes a checking point.
inline bool is_clause_terminator(const Token& t) {
    return t.text.size() == 1 && (t.text[0] == ',' || t.text[0] == ';' || t.text[0] == ':' ||
                                  t.text[0] == '.' || t.text[0] == '?' || t.text[0] == '!');
}

inline bool is_sentence_terminator(const Token& t) {
    return t.text.size() == 1 && (t.text[0] == '.' || t.text[0] == '?' || t.text[0] == '!');
}

// Split text into word and punctuation tokens. A maximal non-space run is
// split into leading punctuation chars, a core, and trailing punctuation
// chars; punctuation inside the core stays put, so "don't", "3.5" and
// "1,234" survive as single tokens while "(hi!)" becomes ( hi ! ).
inline TokenStream tokenize(std::string_view text) {
    TokenStream stream;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        std::size_t ws_start = i;
        while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::string ws(text.substr(ws_start, i - ws_start));
        if (i >= n) {
            stream.trailing_ws = std::move(ws);
            break;
        }
        std::size_t run_start = i;
        while (i < n && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::string_view run = text.substr(run_start, i - run_start);

        std::size_t lead = 0;
        while (lead < run.size() && is_punct_char(run[lead])) ++lead;
        std::size_t trail = run.size();
        if (lead < run.size()) {
            while (trail > lead && is_punct_char(run[trail - 1])) --trail;
        }

        bool first = true;
        auto emit = [&](std::string_view piece) {
            stream.tokens.push_back(Token{std::string(piece), first ? ws : std::string()});
            first = false;
        };
        if (lead == run.size()) {
            // Pure punctuation run: one token per character.
            for (std::size_t j = 0; j < run.size(); ++j) emit(run.substr(j, 1));
        } else {
            for (std::size_t j = 0; j < lead; ++j) emit(run.substr(j, 1));
            emit(run.substr(lead, trail - lead));
            for (std::size_t j = trail; j < run.size(); ++j) emit(run.substr(j, 1));
        }
    }
    return stream;
}

inline std::string detokenize(const TokenStream& stream) {
    std::string out;
    for (const Token& t : stream.tokens) {
        out += t.leading_ws;
        out += t.text;
    }
    out += stream.trailing_ws;
    return out;
}

// Detokenize the inclusive token range [0, end_index]. Trailing whitespace
// is not part of any prefix.
inline std::string detokenize_prefix(const TokenStream& stream, std::size_t end_index) {
    std::string out;
    for (std::size_t i = 0; i <= end_index && i < stream.tokens.size(); ++i) {
        out += stream.tokens[i].leading_ws;
        out += stream.tokens[i].text;
    }
    return out;
}

}  // namespace agbs::text
