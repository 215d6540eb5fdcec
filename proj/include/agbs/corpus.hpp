#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "agbs/errors.hpp"
#include "agbs/grading.hpp"
#include "agbs/hashing.hpp"

namespace agbs::corpus {

enum class AnswerKind { numeric, text };

inline const char* to_string(AnswerKind k) { return k == AnswerKind::numeric ? "numeric" : "text"; }

inline std::optional<AnswerKind> answer_kind_from(std::string_view s) {
    if (s == "numeric") return AnswerKind::numeric;
    if (s == "text") return AnswerKind::text;
    return std::nullopt;
}

enum class DatasetFormat { jsonl, csv };

// One question/answer pair, the unit of evaluation.
struct QAPair {
    std::string id;
    std::string question;
    std::string gold_answer;
    AnswerKind answer_kind = AnswerKind::text;
    std::string source_dataset;

    bool operator==(const QAPair&) const = default;
};

// A record that failed validation, kept for the reject sidecar.
struct RejectedRecord {
    std::size_t line_number = 0;  // 1-based; CSV counts the header as line 1
    std::string reason;
    std::string raw;
};

struct LoadResult {
    std::vector<QAPair> pairs;
    std::vector<RejectedRecord> rejects;
};

struct CorpusSample {
    std::vector<QAPair> pairs;
    std::uint64_t seed = 0;
    std::size_t requested_n = 0;
};

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// Validate a raw record; returns the failure reason or nullopt.
inline std::optional<std::string> validate(QAPair& pair) {
    if (trim(pair.question).empty()) return "question is empty";
    if (pair.gold_answer.empty()) return "answer is empty";
    if (pair.answer_kind == AnswerKind::numeric &&
        !grading::canonicalize_gold_number(pair.gold_answer)) {
        return "answer_kind is numeric but answer '" + pair.gold_answer +
               "' is not a finite decimal number";
    }
    return std::nullopt;
}

// RFC 4180-ish line splitter: quoted fields, doubled quotes as escapes.
inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field += c;
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

}  // namespace detail

// Load a dataset in the normalized JSONL format ({id, question, answer,
// answer_kind, source_dataset}; only question and answer are required) or
// as CSV with a header row naming those columns. Malformed records are
// collected in the result, never silently dropped.
inline LoadResult load_dataset(const std::filesystem::path& path, DatasetFormat format,
                               AnswerKind default_kind) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open dataset file: " + path.string());

    const std::string stem = path.stem().string();
    LoadResult result;
    std::string line;
    std::size_t line_no = 0;

    auto finish_record = [&](QAPair pair, const std::string& raw) {
        if (pair.id.empty()) pair.id = stem + "-" + std::to_string(line_no);
        if (pair.source_dataset.empty()) pair.source_dataset = stem;
        if (auto reason = detail::validate(pair)) {
            result.rejects.push_back(
                RejectedRecord{line_no, "line " + std::to_string(line_no) + ": " + *reason, raw});
        } else {
            result.pairs.push_back(std::move(pair));
        }
    };

    if (format == DatasetFormat::jsonl) {
        while (std::getline(in, line)) {
            ++line_no;
            if (detail::trim(line).empty()) continue;
            nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
            if (record.is_discarded() || !record.is_object()) {
                result.rejects.push_back(RejectedRecord{
                    line_no, "line " + std::to_string(line_no) + ": not a JSON object", line});
                continue;
            }
            // Strings pass through; numbers are stringified so integer ids
            // and numeric answers load without fuss.
            auto text_field = [&](const char* name) -> std::string {
                if (!record.contains(name)) return {};
                const nlohmann::json& v = record[name];
                if (v.is_string()) return v.get<std::string>();
                if (v.is_number()) return v.dump();
                return {};
            };
            QAPair pair;
            pair.answer_kind = default_kind;
            pair.id = text_field("id");
            pair.question = text_field("question");
            pair.gold_answer = text_field("answer");
            pair.source_dataset = text_field("source_dataset");
            if (record.contains("answer_kind")) {
                const std::string kind_text = text_field("answer_kind");
                auto kind = answer_kind_from(kind_text);
                if (!kind) {
                    result.rejects.push_back(RejectedRecord{
                        line_no,
                        "line " + std::to_string(line_no) + ": unknown answer_kind '" + kind_text +
                            "'",
                        line});
                    continue;
                }
                pair.answer_kind = *kind;
            }
            if (!record.contains("question") || !record.contains("answer")) {
                result.rejects.push_back(RejectedRecord{
                    line_no,
                    "line " + std::to_string(line_no) + ": missing question or answer field",
                    line});
                continue;
            }
            finish_record(std::move(pair), line);
        }
        return result;
    }

    // CSV: header row maps column names to fields.
    if (!std::getline(in, line)) throw validation_error("CSV file has no header row: " + path.string());
    ++line_no;
    std::vector<std::string> header = detail::split_csv_line(line);
    auto column = [&](std::string_view name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (detail::trim(header[i]) == name) return i;
        return std::nullopt;
    };
    const auto q_col = column("question");
    const auto a_col = column("answer");
    if (!q_col || !a_col)
        throw validation_error("CSV header must name question and answer columns: " +
                               path.string());
    const auto id_col = column("id");
    const auto kind_col = column("answer_kind");
    const auto source_col = column("source_dataset");

    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        std::vector<std::string> fields = detail::split_csv_line(line);
        auto field = [&](std::optional<std::size_t> col) -> std::string {
            return col && *col < fields.size() ? fields[*col] : std::string();
        };
        QAPair pair;
        pair.answer_kind = default_kind;
        pair.id = field(id_col);
        pair.question = field(q_col);
        pair.gold_answer = field(a_col);
        pair.source_dataset = field(source_col);
        if (kind_col) {
            const std::string kind_text = field(kind_col);
            if (!kind_text.empty()) {
                auto kind = answer_kind_from(kind_text);
                if (!kind) {
                    result.rejects.push_back(RejectedRecord{
                        line_no,
                        "line " + std::to_string(line_no) + ": unknown answer_kind '" + kind_text +
                            "'",
                        line});
                    continue;
                }
                pair.answer_kind = *kind;
            }
        }
        finish_record(std::move(pair), line);
    }
    return result;
}

// Write pairs in the normalized JSONL interchange format.
inline void save_normalized(const std::vector<QAPair>& pairs, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write dataset file: " + path.string());
    for (const QAPair& pair : pairs) {
        nlohmann::json record{{"id", pair.id},
                              {"question", pair.question},
                              {"answer", pair.gold_answer},
                              {"answer_kind", to_string(pair.answer_kind)},
                              {"source_dataset", pair.source_dataset}};
        out << record.dump() << '\n';
    }
}

// Quarantine rejects to the <name>.rejects.jsonl sidecar.
inline void write_rejects_sidecar(const std::vector<RejectedRecord>& rejects,
                                  const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write rejects sidecar: " + path.string());
    for (const RejectedRecord& reject : rejects) {
        nlohmann::json record{
            {"line", reject.line_number}, {"reason", reject.reason}, {"raw", reject.raw}};
        out << record.dump() << '\n';
    }
}

// Deterministic sample without replacement: a partial Fisher-Yates shuffle
// driven by SplitMixRng, so the same (corpus, seed, n) reproduces the same
// ordering on every platform. n >= |pairs| returns all pairs in a
// seed-determined order.
inline CorpusSample sample(const std::vector<QAPair>& pairs, std::size_t n, std::uint64_t seed) {
    if (pairs.empty()) throw validation_error("sample: corpus is empty");
    if (n == 0) throw validation_error("sample: n must be >= 1");

    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    hashing::SplitMixRng rng(seed);
    const std::size_t take = std::min(n, pairs.size());
    for (std::size_t i = 0; i < take; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.next_below(order.size() - i));
        std::swap(order[i], order[j]);
    }

    CorpusSample out;
    out.seed = seed;
    out.requested_n = n;
    out.pairs.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.pairs.push_back(pairs[order[i]]);
    return out;
}

}  // namespace agbs::corpus
