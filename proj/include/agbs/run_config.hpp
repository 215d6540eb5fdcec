#pragma once

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "agbs/corpus.hpp"
#include "agbs/engine.hpp"
#include "agbs/errors.hpp"
#include "agbs/hashing.hpp"
#include "agbs/victim.hpp"

namespace agbs::config {

enum class BackendKind { mock, http };
enum class TaggerKind { rule, stub };
enum class RunMode { attack, evaluate, sweep, ablate, report };

inline const char* to_string(RunMode m) {
    switch (m) {
        case RunMode::attack: return "attack";
        case RunMode::evaluate: return "evaluate";
        case RunMode::sweep: return "sweep";
        case RunMode::ablate: return "ablate";
        case RunMode::report: return "report";
    }
    return "?";
}

struct EndpointConfig {
    victim::VictimEndpoint endpoint;
    std::vector<std::string> poison_tokens;  // scripted protocol only
};

struct RunConfig {
    std::filesystem::path dataset_path;
    corpus::DatasetFormat dataset_format = corpus::DatasetFormat::jsonl;
    corpus::AnswerKind answer_kind = corpus::AnswerKind::text;

    std::size_t sample_n = 300;
    std::uint64_t sample_seed = 7;

    engine::AttackConfig attack;

    BackendKind backend_kind = BackendKind::mock;
    std::string backend_url;
    std::uint64_t backend_seed = 0x41474253ULL;

    TaggerKind tagger_kind = TaggerKind::rule;
    std::filesystem::path tagger_dict_path;

    std::vector<EndpointConfig> endpoints;

    std::filesystem::path out_dir = "runs/out";
    bool dump_segmentations = false;

    nlohmann::json raw;  // canonical source, used for hashing and metadata

    void validate() const {
        if (dataset_path.empty()) throw validation_error("config: dataset path is required");
        if (!std::filesystem::exists(dataset_path))
            throw validation_error("config: dataset path does not exist: " + dataset_path.string());
        if (sample_n == 0) throw validation_error("config: sample n must be >= 1");
        attack.validate();
        if (backend_kind == BackendKind::http && backend_url.empty())
            throw validation_error("config: backend.kind=http needs backend.url");
        if (tagger_kind == TaggerKind::stub) {
            if (tagger_dict_path.empty())
                throw validation_error("config: tagger.kind=stub needs tagger.dict_path");
            if (!std::filesystem::exists(tagger_dict_path))
                throw validation_error("config: tagger dictionary does not exist: " +
                                       tagger_dict_path.string());
        }
        for (const EndpointConfig& e : endpoints) e.endpoint.validate();
    }
};

// 64-bit config fingerprint over the canonical JSON dump. nlohmann::json
// keeps object keys sorted, so the hash is stable under key reordering in
// the source file.
inline std::string config_hash(const nlohmann::json& raw) {
    const std::uint64_t h = hashing::hash_bytes(raw.dump());
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

namespace detail {

// Minimal TOML reader covering the subset run configs use: [table] and
// [[array-of-tables]] headers with dotted paths, `key = value` lines with
// string / integer / float / boolean / inline scalar-array values, and #
// comments. Anything fancier should just be written as JSON.
inline nlohmann::json parse_toml(const std::string& text) {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* current = &root;

    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;

    auto fail = [&](const std::string& why) -> void {
        throw validation_error("TOML line " + std::to_string(line_no) + ": " + why);
    };

    auto strip = [](std::string s) {
        // comments start at an unquoted '#'
        bool quoted = false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '"') quoted = !quoted;
            if (s[i] == '#' && !quoted) {
                s.erase(i);
                break;
            }
        }
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    };

    auto split_path = [&](const std::string& path) {
        std::vector<std::string> parts;
        std::string part;
        for (char c : path) {
            if (c == '.') {
                if (part.empty()) fail("empty path segment");
                parts.push_back(part);
                part.clear();
            } else if (!std::isspace(static_cast<unsigned char>(c))) {
                part += c;
            }
        }
        if (part.empty()) fail("empty path segment");
        parts.push_back(part);
        return parts;
    };

    std::function<nlohmann::json(const std::string&)> parse_value =
        [&](const std::string& raw) -> nlohmann::json {
        std::string v = strip(raw);
        if (v.empty()) fail("missing value");
        if (v.front() == '"') {
            if (v.size() < 2 || v.back() != '"') fail("unterminated string");
            std::string out;
            for (std::size_t i = 1; i + 1 < v.size(); ++i) {
                if (v[i] == '\\' && i + 2 < v.size()) {
                    ++i;
                    switch (v[i]) {
                        case 'n': out += '\n'; break;
                        case 't': out += '\t'; break;
                        case '"': out += '"'; break;
                        case '\\': out += '\\'; break;
                        default: fail("unsupported escape");
                    }
                } else {
                    out += v[i];
                }
            }
            return out;
        }
        if (v == "true") return true;
        if (v == "false") return false;
        if (v.front() == '[') {
            if (v.back() != ']') fail("unterminated array");
            nlohmann::json arr = nlohmann::json::array();
            std::string inner = v.substr(1, v.size() - 2);
            std::string item;
            bool quoted = false;
            for (char c : inner) {
                if (c == '"') quoted = !quoted;
                if (c == ',' && !quoted) {
                    if (!strip(item).empty()) arr.push_back(parse_value(item));
                    item.clear();
                } else {
                    item += c;
                }
            }
            if (!strip(item).empty()) arr.push_back(parse_value(item));
            return arr;
        }
        // number
        try {
            if (v.find_first_of(".eE") == std::string::npos) {
                std::size_t used = 0;
                long long n = std::stoll(v, &used);
                if (used == v.size()) return n;
            } else {
                std::size_t used = 0;
                double d = std::stod(v, &used);
                if (used == v.size()) return d;
            }
        } catch (...) {
        }
        fail("cannot parse value '" + v + "'");
        return nullptr;
    };

    while (std::getline(in, line)) {
        ++line_no;
        std::string s = strip(line);
        if (s.empty()) continue;

        if (s.size() >= 4 && s.rfind("[[", 0) == 0 && s.substr(s.size() - 2) == "]]") {
            nlohmann::json* node = &root;
            const auto parts = split_path(s.substr(2, s.size() - 4));
            for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
                if (!node->contains(parts[i])) (*node)[parts[i]] = nlohmann::json::object();
                node = &(*node)[parts[i]];
            }
            if (!node->contains(parts.back())) (*node)[parts.back()] = nlohmann::json::array();
            nlohmann::json& arr = (*node)[parts.back()];
            if (!arr.is_array()) fail("redefined as array of tables");
            arr.push_back(nlohmann::json::object());
            current = &arr.back();
            continue;
        }
        if (s.front() == '[' && s.back() == ']') {
            nlohmann::json* node = &root;
            for (const std::string& part : split_path(s.substr(1, s.size() - 2))) {
                if (!node->contains(part)) (*node)[part] = nlohmann::json::object();
                node = &(*node)[part];
            }
            current = node;
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) fail("expected key = value");
        const std::string key = strip(s.substr(0, eq));
        if (key.empty()) fail("empty key");
        (*current)[key] = parse_value(s.substr(eq + 1));
    }
    return root;
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw validation_error(std::string("config: field '") + key + "' has the wrong type");
    }
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    cfg.raw = j;

    if (j.contains("dataset")) {
        const nlohmann::json& d = j.at("dataset");
        cfg.dataset_path = detail::get_or<std::string>(d, "path", "");
        const std::string format = detail::get_or<std::string>(d, "format", "jsonl");
        if (format == "jsonl") {
            cfg.dataset_format = corpus::DatasetFormat::jsonl;
        } else if (format == "csv") {
            cfg.dataset_format = corpus::DatasetFormat::csv;
        } else {
            throw validation_error("config: dataset.format must be jsonl or csv");
        }
        const std::string kind = detail::get_or<std::string>(d, "answer_kind", "text");
        auto parsed = corpus::answer_kind_from(kind);
        if (!parsed) throw validation_error("config: dataset.answer_kind must be numeric or text");
        cfg.answer_kind = *parsed;
    }
    if (j.contains("sample")) {
        const nlohmann::json& s = j.at("sample");
        cfg.sample_n = detail::get_or<std::size_t>(s, "n", cfg.sample_n);
        cfg.sample_seed = detail::get_or<std::uint64_t>(s, "seed", cfg.sample_seed);
    }
    if (j.contains("attack")) {
        const nlohmann::json& a = j.at("attack");
        cfg.attack.sigma_th = detail::get_or<double>(a, "sigma_th", cfg.attack.sigma_th);
        cfg.attack.k = detail::get_or<std::size_t>(a, "k", cfg.attack.k);
        cfg.attack.step_s = detail::get_or<std::size_t>(a, "step_s", cfg.attack.step_s);
        cfg.attack.length_norm_alpha =
            detail::get_or<double>(a, "length_norm_alpha", cfg.attack.length_norm_alpha);
        cfg.attack.omega = detail::get_or<double>(a, "omega", cfg.attack.omega);
        cfg.attack.max_adjust_iters =
            detail::get_or<std::size_t>(a, "max_adjust_iters", cfg.attack.max_adjust_iters);
        const std::string policy =
            detail::get_or<std::string>(a, "mask_policy", "first_keyword_per_clause");
        if (policy == "first_keyword_per_clause") {
            cfg.attack.mask_policy = text::MaskPolicy::first_keyword_per_clause;
        } else if (policy == "all_keywords") {
            cfg.attack.mask_policy = text::MaskPolicy::all_keywords;
        } else {
            throw validation_error("config: attack.mask_policy unknown: " + policy);
        }
        cfg.attack.start_at_second_sentence = detail::get_or<bool>(
            a, "start_at_second_sentence", cfg.attack.start_at_second_sentence);
        cfg.attack.require_final_similarity = detail::get_or<bool>(
            a, "require_final_similarity", cfg.attack.require_final_similarity);
    }
    if (j.contains("backend")) {
        const nlohmann::json& b = j.at("backend");
        const std::string kind = detail::get_or<std::string>(b, "kind", "mock");
        if (kind == "mock") {
            cfg.backend_kind = BackendKind::mock;
        } else if (kind == "http" || kind == "real") {
            cfg.backend_kind = BackendKind::http;
        } else {
            throw validation_error("config: backend.kind must be mock or http");
        }
        cfg.backend_url = detail::get_or<std::string>(b, "url", "");
        cfg.backend_seed = detail::get_or<std::uint64_t>(b, "seed", cfg.backend_seed);
    }
    if (j.contains("tagger")) {
        const nlohmann::json& t = j.at("tagger");
        const std::string kind = detail::get_or<std::string>(t, "kind", "rule");
        if (kind == "rule") {
            cfg.tagger_kind = TaggerKind::rule;
        } else if (kind == "stub") {
            cfg.tagger_kind = TaggerKind::stub;
        } else {
            throw validation_error("config: tagger.kind must be rule or stub");
        }
        cfg.tagger_dict_path = detail::get_or<std::string>(t, "dict_path", "");
    }
    if (j.contains("endpoints")) {
        for (const nlohmann::json& e : j.at("endpoints")) {
            EndpointConfig ec;
            ec.endpoint.name = detail::get_or<std::string>(e, "name", "victim");
            const std::string protocol =
                detail::get_or<std::string>(e, "protocol", "openai_compatible");
            if (protocol == "openai_compatible") {
                ec.endpoint.protocol = victim::Protocol::openai_compatible;
            } else if (protocol == "ollama_style") {
                ec.endpoint.protocol = victim::Protocol::ollama_style;
            } else if (protocol == "scripted") {
                ec.endpoint.protocol = victim::Protocol::scripted;
            } else {
                throw validation_error("config: endpoint protocol unknown: " + protocol);
            }
            ec.endpoint.base_url = detail::get_or<std::string>(e, "base_url", "");
            ec.endpoint.model_id = detail::get_or<std::string>(e, "model_id", "");
            ec.endpoint.api_key_env = detail::get_or<std::string>(e, "api_key_env", "");
            ec.endpoint.timeout_s = detail::get_or<double>(e, "timeout_s", 60.0);
            ec.endpoint.max_retries = detail::get_or<std::size_t>(e, "max_retries", 2);
            ec.endpoint.max_concurrency = detail::get_or<std::size_t>(e, "max_concurrency", 4);
            ec.endpoint.backoff_base_s = detail::get_or<double>(e, "backoff_base_s", 0.25);
            ec.endpoint.requests_per_minute =
                detail::get_or<double>(e, "requests_per_minute", 0.0);
            ec.poison_tokens =
                detail::get_or<std::vector<std::string>>(e, "poison_tokens", {});
            cfg.endpoints.push_back(std::move(ec));
        }
    }
    if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
    cfg.dump_segmentations = detail::get_or<bool>(j, "dump_segmentations", false);
    return cfg;
}

// Accepts .json or .toml; anything else is sniffed (JSON starts with '{').
inline nlohmann::json load_config_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config file: " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string content = buffer.str();

    const std::string ext = path.extension().string();
    bool looks_json = ext == ".json";
    if (ext != ".json" && ext != ".toml") {
        const auto first = content.find_first_not_of(" \t\r\n");
        looks_json = first != std::string::npos && content[first] == '{';
    }
    if (looks_json) {
        nlohmann::json j = nlohmann::json::parse(content, nullptr, false);
        if (j.is_discarded())
            throw validation_error("config: invalid JSON in " + path.string());
        return j;
    }
    return detail::parse_toml(content);
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    return config_from_json(load_config_json(path));
}

}  // namespace agbs::config
