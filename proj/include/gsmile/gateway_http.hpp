#pragma once

#include <cstdlib>
#include <string>

#include <httplib.h>
#include <json.hpp>

// httplib drags in <resolv.h>, whose _res macro breaks unrelated headers
// (Eigen among them) in any TU that includes both.
#ifdef _res
#undef _res
#endif

#include "gsmile/error.hpp"
#include "gsmile/gateway.hpp"

namespace gsmile {

namespace detail {

inline std::string env_or_empty(const char* name) {
    const char* v = std::getenv(name);
    return v ? v : "";
}

inline httplib::Client make_client(const std::string& base_url, int timeout_ms) {
    httplib::Client cli(base_url);
    cli.set_connection_timeout(0, timeout_ms * 1000);
    cli.set_read_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
    cli.set_write_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
    return cli;
}

inline std::string classify_and_throw(int status, const std::string& body) {
    if (status == 401 || status == 403)
        throw Error(ErrorCode::AuthError, "backend rejected credentials (" +
                                              std::to_string(status) + "): " + body);
    if (status == 429)
        throw Error(ErrorCode::RateLimited, "backend rate limited: " + body);
    if (status >= 500)
        throw Error(ErrorCode::Timeout, "backend unavailable (" + std::to_string(status) +
                                            "): " + body);
    throw Error(ErrorCode::SolverFailure,
                "backend error (" + std::to_string(status) + "): " + body);
}

} // namespace detail

// Completions-style and messages-style HTTP adapters, normalized to plain
// output text. Credentials come from the environment only.
inline std::string http_generate(const GeneratorSpec& spec, const std::string& prompt) {
    nlohmann::json body;
    std::string path;
    httplib::Headers headers;
    std::string base;

    if (spec.backend == Backend::OpenAiCompletions) {
        std::string key = detail::env_or_empty("OPENAI_API_KEY");
        if (key.empty())
            throw Error(ErrorCode::AuthError, "OPENAI_API_KEY is not set");
        base = spec.base_url.empty() ? "https://api.openai.com" : spec.base_url;
        path = "/v1/completions";
        headers.emplace("Authorization", "Bearer " + key);
        body = {{"model", spec.model_id},
                {"prompt", prompt},
                {"temperature", spec.temperature},
                {"max_tokens", spec.max_tokens}};
    } else if (spec.backend == Backend::AnthropicMessages) {
        std::string key = detail::env_or_empty("ANTHROPIC_API_KEY");
        if (key.empty())
            throw Error(ErrorCode::AuthError, "ANTHROPIC_API_KEY is not set");
        base = spec.base_url.empty() ? "https://api.anthropic.com" : spec.base_url;
        path = "/v1/messages";
        headers.emplace("x-api-key", key);
        headers.emplace("anthropic-version", "2023-06-01");
        body = {{"model", spec.model_id},
                {"temperature", spec.temperature},
                {"max_tokens", spec.max_tokens},
                {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})}};
    } else {
        throw Error(ErrorCode::InvalidConfig, "http_generate on non-remote backend");
    }

    auto cli = detail::make_client(base, spec.timeout_ms);
    auto res = cli.Post(path, headers, body.dump(), "application/json");
    if (!res) {
        if (res.error() == httplib::Error::ConnectionTimeout ||
            res.error() == httplib::Error::Read || res.error() == httplib::Error::Write)
            throw Error(ErrorCode::Timeout, "request timed out / connection lost");
        throw Error(ErrorCode::Timeout, "connection failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) detail::classify_and_throw(res->status, res->body);

    std::string text;
    try {
        auto j = nlohmann::json::parse(res->body);
        if (spec.backend == Backend::OpenAiCompletions)
            text = j.at("choices").at(0).at("text").get<std::string>();
        else
            text = j.at("content").at(0).at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SolverFailure, std::string("unparseable response: ") + e.what());
    }
    if (text.empty())
        throw Error(ErrorCode::EmptyCompletion, "backend returned an empty completion");
    return text;
}

} // namespace gsmile
