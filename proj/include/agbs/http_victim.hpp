#pragma once

#include <algorithm>
#include <chrono>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "agbs/errors.hpp"
#include "agbs/victim.hpp"

namespace agbs::victim {

// HTTP victim client speaking either the OpenAI-compatible chat-completions
// protocol or the Ollama generate protocol. Greedy decoding is requested
// (temperature 0) so repeated runs are as stable as the service allows.
// Transient failures (transport, HTTP 5xx) retry with exponential backoff
// up to max_retries; 4xx means a broken request or bad credentials and is
// not retried. Latency covers the successful attempt only.
class HttpVictimClient : public VictimClient {
public:
    explicit HttpVictimClient(VictimEndpoint endpoint)
        : endpoint_(std::move(endpoint)),
          slots_(static_cast<std::ptrdiff_t>(endpoint_.max_concurrency)) {
        endpoint_.validate();
        if (endpoint_.protocol == Protocol::scripted)
            throw validation_error("endpoint '" + endpoint_.name +
                                   "': scripted endpoints have no transport");
    }

    VictimResponse query(const std::string& prompt) override {
        slots_.acquire();
        struct Release {
            std::counting_semaphore<>* s;
            ~Release() { s->release(); }
        } release{&slots_};
        throttle();

        std::string last_failure;
        for (std::size_t attempt = 0; attempt <= endpoint_.max_retries; ++attempt) {
            if (attempt > 0) {
                const double backoff =
                    endpoint_.backoff_base_s * static_cast<double>(1ULL << (attempt - 1));
                std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
            }
            const auto started = std::chrono::steady_clock::now();
            httplib::Client client(endpoint_.base_url);
            client.set_connection_timeout(std::chrono::duration<double>(endpoint_.timeout_s));
            client.set_read_timeout(std::chrono::duration<double>(endpoint_.timeout_s));
            client.set_write_timeout(std::chrono::duration<double>(endpoint_.timeout_s));
            const std::string key = endpoint_.api_key();
            if (!key.empty()) client.set_bearer_token_auth(key);

            httplib::Result res = client.Post(path(), request_body(prompt), "application/json");
            const double latency =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

            if (!res) {
                last_failure = "transport failure: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status >= 500) {
                last_failure = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status >= 400) {
                throw protocol_error("endpoint '" + endpoint_.name + "' rejected the request: HTTP " +
                                     std::to_string(res->status) + " " + res->body);
            }

            VictimResponse response;
            response.raw_text = extract_text(res->body);
            response.latency_s = latency;
            response.attempt_count = attempt + 1;
            response.endpoint_name = endpoint_.name;
            return response;
        }
        throw transport_error("endpoint '" + endpoint_.name + "' unreachable after " +
                              std::to_string(endpoint_.max_retries + 1) + " attempts (" +
                              last_failure + ")");
    }

    std::string name() const override { return endpoint_.name; }

private:
    // Optional requests-per-minute throttle: request starts are spaced at
    // least 60/rpm seconds apart.
    void throttle() {
        if (endpoint_.requests_per_minute <= 0) return;
        const auto interval =
            std::chrono::duration<double>(60.0 / endpoint_.requests_per_minute);
        std::chrono::steady_clock::time_point wake;
        {
            std::lock_guard<std::mutex> lock(throttle_mutex_);
            const auto now = std::chrono::steady_clock::now();
            next_slot_ = std::max(next_slot_, now);
            wake = next_slot_;
            next_slot_ += std::chrono::duration_cast<std::chrono::steady_clock::duration>(interval);
        }
        std::this_thread::sleep_until(wake);
    }

    const char* path() const {
        return endpoint_.protocol == Protocol::openai_compatible ? "/v1/chat/completions"
                                                                 : "/api/generate";
    }

    std::string request_body(const std::string& prompt) const {
        nlohmann::json body;
        if (endpoint_.protocol == Protocol::openai_compatible) {
            body = {{"model", endpoint_.model_id},
                    {"messages", nlohmann::json::array({nlohmann::json{
                                     {"role", "user"}, {"content", prompt}}})},
                    {"temperature", 0}};
        } else {
            body = {{"model", endpoint_.model_id},
                    {"prompt", prompt},
                    {"stream", false},
                    {"options", nlohmann::json{{"temperature", 0}}}};
        }
        return body.dump();
    }

    std::string extract_text(const std::string& body) const {
        nlohmann::json payload = nlohmann::json::parse(body, nullptr, false);
        if (payload.is_discarded())
            throw protocol_error("endpoint '" + endpoint_.name + "' returned non-JSON body");
        std::string out;
        try {
            if (endpoint_.protocol == Protocol::openai_compatible) {
                out = payload.at("choices").at(0).at("message").at("content").get<std::string>();
            } else {
                out = payload.at("response").get<std::string>();
            }
        } catch (const nlohmann::json::exception& ex) {
            throw protocol_error("endpoint '" + endpoint_.name +
                                 "' response shape mismatch: " + ex.what());
        }
        if (out.empty())
            throw protocol_error("endpoint '" + endpoint_.name + "' returned an empty completion");
        return out;
    }

    VictimEndpoint endpoint_;
    std::counting_semaphore<> slots_;
    std::mutex throttle_mutex_;
    std::chrono::steady_clock::time_point next_slot_{};
};

inline std::shared_ptr<VictimClient> make_http_victim(VictimEndpoint endpoint) {
    return std::make_shared<HttpVictimClient>(std::move(endpoint));
}

}  // namespace agbs::victim
