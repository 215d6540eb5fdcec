#pragma once

#include <cctype>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace agbs::grading {

enum class GradingRule { text_long, text_short, numeric_exact };

inline const char* to_string(GradingRule r) {
    switch (r) {
        case GradingRule::text_long: return "text_long";
        case GradingRule::text_short: return "text_short";
        case GradingRule::numeric_exact: return "numeric_exact";
    }
    return "?";
}

struct GradingOutcome {
    bool correct = false;
    GradingRule rule_applied = GradingRule::text_long;
    std::string evidence;  // overlap words or extracted number
};

// Lowercased word set with punctuation treated as separators; duplicates
// collapse (set semantics).
inline std::set<std::string> tokenize_for_grading(std::string_view text) {
    std::set<std::string> words;
    std::string current;
    for (char ch : text) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            words.insert(current);
            current.clear();
        }
    }
    if (!current.empty()) words.insert(current);
    return words;
}

// Gold answers with >= 3 words need more than 2 shared words; shorter gold
// answers must appear in the response in full.
inline GradingOutcome grade_text(std::string_view response, std::string_view gold) {
    const std::set<std::string> a = tokenize_for_grading(response);
    const std::set<std::string> b = tokenize_for_grading(gold);

    GradingOutcome outcome;
    std::string shared;
    std::size_t shared_count = 0;
    for (const std::string& w : b) {
        if (a.count(w)) {
            ++shared_count;
            if (!shared.empty()) shared += ' ';
            shared += w;
        }
    }
    outcome.evidence = shared;
    if (b.size() >= 3) {
        outcome.rule_applied = GradingRule::text_long;
        outcome.correct = shared_count > 2;
    } else {
        outcome.rule_applied = GradingRule::text_short;
        outcome.correct = !b.empty() && shared_count == b.size();
    }
    return outcome;
}

// A number in canonical decimal form: optional '-', integer digits without
// leading zeros, fraction without trailing zeros. "18", "18.0" and "018"
// all canonicalize to "18", so equality on the canonical string is exact
// numeric equality without floating-point round-off.
struct CanonicalNumber {
    std::string text;

    bool operator==(const CanonicalNumber&) const = default;
};

namespace detail {

inline CanonicalNumber canonicalize(bool negative, std::string int_digits, std::string frac_digits) {
    std::size_t lead = 0;
    while (lead + 1 < int_digits.size() && int_digits[lead] == '0') ++lead;
    int_digits.erase(0, lead);
    if (int_digits.empty()) int_digits = "0";
    while (!frac_digits.empty() && frac_digits.back() == '0') frac_digits.pop_back();

    std::string out;
    if (negative && !(int_digits == "0" && frac_digits.empty())) out += '-';
    out += int_digits;
    if (!frac_digits.empty()) {
        out += '.';
        out += frac_digits;
    }
    return CanonicalNumber{out};
}

// Parse one number starting at position i. Accepts plain digit runs,
// 3-digit comma grouping ("1,234,567") and a decimal fraction. Returns the
// position one past the number, or i if nothing parses.
inline std::size_t parse_number_at(std::string_view s, std::size_t i, bool negative,
                                   CanonicalNumber* out) {
    std::size_t j = i;
    std::string int_digits;
    auto is_digit = [&](std::size_t p) {
        return p < s.size() && std::isdigit(static_cast<unsigned char>(s[p]));
    };

    if (is_digit(j)) {
        while (is_digit(j)) int_digits.push_back(s[j++]);
        // Comma-grouped thousands: only runs of exactly three digits merge,
        // and only when the leading group has at most three digits.
        if (int_digits.size() <= 3) {
            std::size_t k = j;
            std::string grouped = int_digits;
            while (k < s.size() && s[k] == ',' && is_digit(k + 1) && is_digit(k + 2) &&
                   is_digit(k + 3) && !is_digit(k + 4)) {
                grouped += s.substr(k + 1, 3);
                k += 4;
            }
            if (k != j) {
                int_digits = grouped;
                j = k;
            }
        }
    }

    std::string frac_digits;
    if (j < s.size() && s[j] == '.' && is_digit(j + 1)) {
        ++j;
        while (is_digit(j)) frac_digits.push_back(s[j++]);
    }

    if (int_digits.empty() && frac_digits.empty()) return i;
    if (int_digits.empty()) int_digits = "0";
    *out = canonicalize(negative, std::move(int_digits), std::move(frac_digits));
    return j;
}

}  // namespace detail

// The last parseable decimal number in the text, or nullopt when there is
// none. A sign counts only when it does not follow a word or digit, so the
// "-7" in "5-7" reads as plain 7.
inline std::optional<CanonicalNumber> extract_numeric(std::string_view response) {
    std::optional<CanonicalNumber> last;
    std::size_t i = 0;
    while (i < response.size()) {
        char c = response[i];
        bool negative = false;
        std::size_t start = i;
        if ((c == '-' || c == '+') && i + 1 < response.size()) {
            bool prev_joined = start > 0 && (std::isalnum(static_cast<unsigned char>(
                                                 response[start - 1])) != 0);
            if (!prev_joined) {
                negative = (c == '-');
                ++i;
            } else {
                ++i;
                continue;
            }
        }
        CanonicalNumber parsed;
        std::size_t end = detail::parse_number_at(response, i, negative, &parsed);
        if (end != i) {
            last = parsed;
            i = end;
        } else {
            i = start + 1;
        }
    }
    return last;
}

// Whole-string canonicalization for gold answers: the trimmed string must
// be exactly one number.
inline std::optional<CanonicalNumber> canonicalize_gold_number(std::string_view gold) {
    std::size_t b = 0, e = gold.size();
    while (b < e && std::isspace(static_cast<unsigned char>(gold[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(gold[e - 1]))) --e;
    std::string_view trimmed = gold.substr(b, e - b);
    if (trimmed.empty()) return std::nullopt;

    std::size_t i = 0;
    bool negative = false;
    if (trimmed[0] == '-' || trimmed[0] == '+') {
        negative = trimmed[0] == '-';
        i = 1;
    }
    CanonicalNumber parsed;
    std::size_t end = detail::parse_number_at(trimmed, i, negative, &parsed);
    if (end != trimmed.size() || end == i) return std::nullopt;
    return parsed;
}

// Exact-match numeric grading: the response's final number must equal the
// gold answer after canonicalization. No tolerance.
inline GradingOutcome grade_numeric(std::string_view response, std::string_view gold) {
    GradingOutcome outcome;
    outcome.rule_applied = GradingRule::numeric_exact;
    const std::optional<CanonicalNumber> want = canonicalize_gold_number(gold);
    const std::optional<CanonicalNumber> got = extract_numeric(response);
    if (got) outcome.evidence = got->text;
    outcome.correct = want && got && *want == *got;
    return outcome;
}

}  // namespace agbs::grading
