#include <doctest.h>

#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "gsmile/gateway.hpp"
#include "gsmile/gateway_http.hpp"

using namespace gsmile;

namespace {

std::string temp_dir(const std::string& tag) {
    auto p = std::filesystem::temp_directory_path() /
             ("gsmile_gw_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(p);
    return p.string();
}

GeneratorSpec mock_spec(MockLexicon lex = {}) {
    GeneratorSpec spec;
    spec.backend = Backend::Mock;
    spec.lexicon = std::move(lex);
    return spec;
}

} // namespace

TEST_CASE("mock_generate maps tokens through the lexicon in prompt order") {
    MockLexicon lex;
    lex.fragments = {{"life", "purpose existence"}, {"meaning", "significance"}};
    CHECK(mock_generate(lex, "meaning of life") == "significance purpose existence");
}

TEST_CASE("mock_generate default fragment fills unmapped tokens") {
    MockLexicon lex;
    lex.default_fragment = "x";
    CHECK(mock_generate(lex, "a b c") == "x x x");
}

TEST_CASE("mock_generate removing a mapped token removes exactly its fragment") {
    MockLexicon lex;
    lex.fragments = {{"a", "fa"}, {"b", "fb"}, {"c", "fc"}};
    CHECK(mock_generate(lex, "a b c") == "fa fb fc");
    CHECK(mock_generate(lex, "a c") == "fa fc");
}

TEST_CASE("mock_generate empty lexicon and empty default gives empty output") {
    MockLexicon lex;
    CHECK(mock_generate(lex, "anything here") == "");
}

TEST_CASE("gateway caches identical calls") {
    GatewayConfig cfg;
    cfg.cache_dir = temp_dir("cache");
    ModelGateway gw(cfg);
    MockLexicon lex;
    lex.default_fragment = "frag";
    auto spec = mock_spec(lex);

    auto r1 = gw.generate(spec, "hello world");
    CHECK_FALSE(r1.cache_hit);
    auto r2 = gw.generate(spec, "hello world");
    CHECK(r2.cache_hit);
    CHECK(r1.output == r2.output);
    CHECK(gw.backend_calls() == 1);
    CHECK(gw.cache_hits() == 1);

    // a fresh gateway reads the same on-disk cache
    ModelGateway gw2(cfg);
    auto r3 = gw2.generate(spec, "hello world");
    CHECK(r3.cache_hit);
    CHECK(r3.output == r1.output);
    CHECK(gw2.backend_calls() == 0);
    std::filesystem::remove_all(cfg.cache_dir);
}

TEST_CASE("cache key includes model and temperature") {
    ModelGateway gw;
    MockLexicon lex;
    lex.default_fragment = "frag";
    auto spec = mock_spec(lex);
    gw.generate(spec, "p");
    auto spec2 = spec;
    spec2.temperature = 0.7;
    auto r = gw.generate(spec2, "p");
    CHECK_FALSE(r.cache_hit);
    CHECK(gw.backend_calls() == 2);
}

TEST_CASE("generate rejects empty prompts") {
    ModelGateway gw;
    CHECK_THROWS_AS(gw.generate(mock_spec(), "   "), Error);
}

TEST_CASE("generate_batch preserves input order and reports per-item errors") {
    ModelGateway gw;
    MockLexicon lex;
    for (int i = 0; i < 64; ++i) lex.fragments["p" + std::to_string(i)] = "out" + std::to_string(i);
    auto spec = mock_spec(lex);

    std::vector<std::string> prompts;
    for (int i = 0; i < 64; ++i) prompts.push_back("p" + std::to_string(i));
    prompts[10] = "   "; // will fail as an empty prompt

    auto results = gw.generate_batch(spec, prompts, 8);
    REQUIRE(results.size() == 64);
    int failures = 0;
    for (int i = 0; i < 64; ++i) {
        if (!results[i].ok) {
            ++failures;
            CHECK(i == 10);
            continue;
        }
        CHECK(results[i].output == "out" + std::to_string(i));
    }
    CHECK(failures == 1);
}

TEST_CASE("generate_batch with parallelism 1 equals sequential outputs") {
    MockLexicon lex;
    lex.default_fragment = "d";
    auto spec = mock_spec(lex);
    std::vector<std::string> prompts = {"a b", "c d", "e f g"};

    ModelGateway seq;
    auto sequential = seq.generate_batch(spec, prompts, 1);
    ModelGateway par;
    auto parallel = par.generate_batch(spec, prompts, 4);
    REQUIRE(sequential.size() == parallel.size());
    for (std::size_t i = 0; i < prompts.size(); ++i)
        CHECK(sequential[i].output == parallel[i].output);
}

TEST_CASE("transient failures retry with backoff, fatal ones do not") {
    GatewayConfig cfg;
    cfg.backoff_ms = 1;
    ModelGateway gw(cfg);
    GeneratorSpec spec;
    spec.backend = Backend::OpenAiCompletions;
    spec.max_retries = 3;

    static std::atomic<int> calls{0};
    calls = 0;
    gw.set_remote_call([](const GeneratorSpec&, const std::string&) -> std::string {
        if (++calls < 3) throw Error(ErrorCode::RateLimited, "try later");
        return "ok";
    });
    auto rec = gw.generate(spec, "prompt");
    CHECK(rec.output == "ok");
    CHECK(calls == 3);

    calls = 0;
    ModelGateway gw2(cfg);
    gw2.set_remote_call([](const GeneratorSpec&, const std::string&) -> std::string {
        ++calls;
        throw Error(ErrorCode::AuthError, "bad key");
    });
    CHECK_THROWS_AS(gw2.generate(spec, "prompt"), Error);
    CHECK(calls == 1); // no retry on auth failure, no cache write
    CHECK(gw2.cache_hits() == 0);
}

TEST_CASE("retries exhaust into the transient error") {
    GatewayConfig cfg;
    cfg.backoff_ms = 1;
    ModelGateway gw(cfg);
    GeneratorSpec spec;
    spec.backend = Backend::OpenAiCompletions;
    spec.max_retries = 2;
    gw.set_remote_call([](const GeneratorSpec&, const std::string&) -> std::string {
        throw Error(ErrorCode::RateLimited, "always limited");
    });
    try {
        gw.generate(spec, "prompt");
        FAIL("expected RateLimited");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::RateLimited);
    }
    CHECK(gw.backend_calls() == 3); // initial + 2 retries
}

TEST_CASE("http adapters against a local server") {
    httplib::Server server;
    server.Post("/v1/completions", [](const httplib::Request& req, httplib::Response& res) {
        auto body = nlohmann::json::parse(req.body);
        if (req.get_header_value("Authorization") != "Bearer test-key") {
            res.status = 401;
            return;
        }
        nlohmann::json out = {
            {"choices", {{{"text", "echo: " + body.at("prompt").get<std::string>()}}}}};
        res.set_content(out.dump(), "application/json");
    });
    server.Post("/v1/messages", [](const httplib::Request& req, httplib::Response& res) {
        if (req.get_header_value("x-api-key") != "anth-key") {
            res.status = 401;
            return;
        }
        auto body = nlohmann::json::parse(req.body);
        std::string prompt = body.at("messages").at(0).at("content");
        nlohmann::json out = {{"content", {{{"type", "text"}, {"text", "claude: " + prompt}}}}};
        res.set_content(out.dump(), "application/json");
    });

    int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    setenv("OPENAI_API_KEY", "test-key", 1);
    setenv("ANTHROPIC_API_KEY", "anth-key", 1);

    GeneratorSpec oa;
    oa.backend = Backend::OpenAiCompletions;
    oa.model_id = "test-model";
    oa.base_url = "http://127.0.0.1:" + std::to_string(port);
    CHECK(http_generate(oa, "hi there") == "echo: hi there");

    GeneratorSpec an;
    an.backend = Backend::AnthropicMessages;
    an.model_id = "test-model";
    an.base_url = oa.base_url;
    CHECK(http_generate(an, "hello") == "claude: hello");

    // wrong key -> AuthError, and the gateway must not cache it
    setenv("OPENAI_API_KEY", "wrong", 1);
    ModelGateway gw;
    gw.set_remote_call(http_generate);
    try {
        gw.generate(oa, "hi there");
        FAIL("expected AuthError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::AuthError);
    }

    // missing key entirely
    unsetenv("OPENAI_API_KEY");
    CHECK_THROWS_AS(http_generate(oa, "x"), Error);

    server.stop();
    th.join();
}
