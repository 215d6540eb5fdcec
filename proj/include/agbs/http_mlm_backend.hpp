#pragma once

#include <string>

#include <httplib.h>
#include <json.hpp>

#include "agbs/errors.hpp"
#include "agbs/mlm_backend.hpp"

namespace agbs::mlm {

// Client for the MLM-over-HTTP protocol:
//   POST /top_k  {"text": ..., "mask_index": ..., "k": ...}
//                -> {"candidates": [{"token": ..., "p": ...}, ...]}
//   POST /embed  {"text": ...} -> {"values": [...]}
// Non-2xx responses carry {"error": ...}. The serving side decides what
// model backs it; the engine only sees this surface.
class HttpMlmBackend : public MlmBackend {
public:
    explicit HttpMlmBackend(std::string base_url, double timeout_s = 120.0,
                            std::string backend_id = "http")
        : base_url_(std::move(base_url)), timeout_s_(timeout_s), id_(std::move(backend_id)) {}

    CandidateSet top_k_candidates(const text::MaskedSentence& masked, std::size_t k) override {
        if (k == 0) throw validation_error("top_k_candidates: k must be >= 1");
        nlohmann::json request{{"text", text::detokenize(masked.stream)},
                               {"mask_index", masked.mask_position},
                               {"k", k}};
        const nlohmann::json payload = post("/top_k", request);

        CandidateSet set;
        set.mask_position = masked.mask_position;
        set.requested_k = k;
        try {
            for (const nlohmann::json& item : payload.at("candidates")) {
                set.candidates.push_back(Candidate{item.at("token").get<std::string>(),
                                                   item.at("p").get<double>()});
            }
        } catch (const nlohmann::json::exception& ex) {
            throw backend_error("MLM backend returned malformed candidates: " +
                                std::string(ex.what()));
        }
        set.effective_k = set.candidates.size();
        return set;
    }

    EmbeddingVector embed(const std::string& input) override {
        if (input.empty()) throw validation_error("embed: text is empty");
        const nlohmann::json payload = post("/embed", nlohmann::json{{"text", input}});
        EmbeddingVector v;
        v.backend_id = id_;
        try {
            v.values = payload.at("values").get<std::vector<double>>();
        } catch (const nlohmann::json::exception& ex) {
            throw backend_error("MLM backend returned malformed embedding: " +
                                std::string(ex.what()));
        }
        if (dimension_ == 0) dimension_ = v.values.size();
        return v;
    }

    std::size_t embedding_dimension() const override { return dimension_; }
    std::string id() const override { return id_; }
    bool shareable() const override { return true; }

private:
    nlohmann::json post(const char* path, const nlohmann::json& body) {
        httplib::Client client(base_url_);
        client.set_connection_timeout(std::chrono::duration<double>(timeout_s_));
        client.set_read_timeout(std::chrono::duration<double>(timeout_s_));
        httplib::Result res = client.Post(path, body.dump(), "application/json");
        if (!res)
            throw backend_error("MLM backend unreachable at " + base_url_ + path + ": " +
                                httplib::to_string(res.error()));
        nlohmann::json payload = nlohmann::json::parse(res->body, nullptr, false);
        if (res->status != 200) {
            std::string detail = payload.is_object() && payload.contains("error")
                                     ? payload["error"].dump()
                                     : res->body;
            throw backend_error("MLM backend error at " + std::string(path) + ": HTTP " +
                                std::to_string(res->status) + " " + detail);
        }
        if (payload.is_discarded())
            throw backend_error("MLM backend returned non-JSON body from " + std::string(path));
        return payload;
    }

    std::string base_url_;
    double timeout_s_;
    std::string id_;
    std::size_t dimension_ = 0;
};

}  // namespace agbs::mlm
