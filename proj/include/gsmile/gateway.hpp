#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "gsmile/embedding.hpp"
#include "gsmile/error.hpp"
#include "gsmile/text.hpp"

namespace gsmile {

enum class Backend { Mock, OpenAiCompletions, AnthropicMessages };

inline const char* backend_name(Backend b) {
    switch (b) {
        case Backend::Mock: return "mock";
        case Backend::OpenAiCompletions: return "openai_completions";
        case Backend::AnthropicMessages: return "anthropic_messages";
    }
    return "unknown";
}

inline Backend backend_from_name(const std::string& name) {
    if (name == "mock") return Backend::Mock;
    if (name == "openai_completions" || name == "openai") return Backend::OpenAiCompletions;
    if (name == "anthropic_messages" || name == "anthropic") return Backend::AnthropicMessages;
    throw Error(ErrorCode::InvalidConfig, "unknown backend: " + name);
}

// Deterministic offline generator: each prompt token maps to a fragment
// string, unmapped tokens take the default fragment, and the output is the
// space-join of the non-empty fragments in prompt order.
struct MockLexicon {
    std::map<std::string, std::string> fragments;
    std::string default_fragment;
};

inline std::string mock_generate(const MockLexicon& lexicon, const std::string& prompt) {
    std::string out;
    for (const auto& tok : split_token_texts(prompt)) {
        auto it = lexicon.fragments.find(tok);
        const std::string& frag =
            it != lexicon.fragments.end() ? it->second : lexicon.default_fragment;
        if (frag.empty()) continue;
        if (!out.empty()) out += ' ';
        out += frag;
    }
    return out;
}

struct GeneratorSpec {
    Backend backend = Backend::Mock;
    std::string model_id = "mock";
    double temperature = 0.0;
    int max_tokens = 256;
    int timeout_ms = 30000;
    int max_retries = 3;
    std::string base_url; // override endpoint; empty = backend default
    MockLexicon lexicon;  // mock backend only
};

struct GenerationRecord {
    std::string prompt;
    std::string output;
    std::string model_id;
    std::string backend;
    double latency_ms = 0.0;
    bool cache_hit = false;
    bool ok = true;
    std::string error; // set when ok == false (batch items)
};

struct GatewayConfig {
    std::string cache_dir;     // empty = in-memory cache only
    int parallelism = 4;
    double rate_per_minute = 0.0; // 0 = unlimited
    int backoff_ms = 250;         // base for exponential retry backoff
};

namespace detail {

inline std::string cache_key_string(const GeneratorSpec& spec, const std::string& prompt) {
    std::ostringstream ss;
    ss << backend_name(spec.backend) << '\x1f' << spec.model_id << '\x1f'
       << spec.temperature << '\x1f' << spec.max_tokens << '\x1f' << prompt;
    return ss.str();
}

inline std::string digest_hex(const std::string& s) {
    // Two FNV-1a passes with different offsets; stored key is verified on
    // read so a collision degrades to a cache miss, never a wrong answer.
    std::uint64_t h1 = WordVectorTable::fnv1a(s);
    std::uint64_t h2 = WordVectorTable::fnv1a(s + "\x1e");
    char buf[33];
    std::snprintf(buf, sizeof(buf), "%016llx%016llx",
                  static_cast<unsigned long long>(h1), static_cast<unsigned long long>(h2));
    return buf;
}

} // namespace detail

// Content-addressed response cache: one file per record, header lines plus
// raw body, written atomically (temp file then rename). No eviction.
class ResponseCache {
public:
    explicit ResponseCache(std::string dir) : dir_(std::move(dir)) {
        if (!dir_.empty()) std::filesystem::create_directories(dir_);
    }

    bool lookup(const GeneratorSpec& spec, const std::string& prompt, std::string& output) {
        const std::string key = detail::cache_key_string(spec, prompt);
        {
            std::lock_guard lock(mu_);
            auto it = memory_.find(key);
            if (it != memory_.end()) {
                output = it->second;
                return true;
            }
        }
        if (dir_.empty()) return false;
        auto path = std::filesystem::path(dir_) / (detail::digest_hex(key) + ".rec");
        std::ifstream in(path, std::ios::binary);
        if (!in) return false;
        std::string magic, stored_key, body;
        if (!read_record(in, magic, stored_key, body)) return false;
        if (stored_key != key) return false; // digest collision
        output = body;
        std::lock_guard lock(mu_);
        memory_[key] = output;
        return true;
    }

    void store(const GeneratorSpec& spec, const std::string& prompt, const std::string& output) {
        const std::string key = detail::cache_key_string(spec, prompt);
        {
            std::lock_guard lock(mu_);
            memory_[key] = output;
        }
        if (dir_.empty()) return;
        auto final_path = std::filesystem::path(dir_) / (detail::digest_hex(key) + ".rec");
        auto tmp_path = final_path;
        tmp_path += ".tmp";
        {
            std::ofstream out(tmp_path, std::ios::binary);
            out << "gsmile-cache v1\n";
            out << "backend: " << backend_name(spec.backend) << '\n';
            out << "model: " << spec.model_id << '\n';
            out << "key-bytes: " << key.size() << '\n';
            out << "output-bytes: " << output.size() << '\n';
            out << '\n';
            out.write(key.data(), static_cast<std::streamsize>(key.size()));
            out.write(output.data(), static_cast<std::streamsize>(output.size()));
        }
        std::filesystem::rename(tmp_path, final_path);
    }

private:
    static bool read_record(std::ifstream& in, std::string& magic, std::string& key,
                            std::string& body) {
        std::getline(in, magic);
        if (magic != "gsmile-cache v1") return false;
        std::size_t key_bytes = 0, out_bytes = 0;
        std::string line;
        while (std::getline(in, line) && !line.empty()) {
            auto colon = line.find(": ");
            if (colon == std::string::npos) return false;
            auto field = line.substr(0, colon);
            auto value = line.substr(colon + 2);
            if (field == "key-bytes") key_bytes = std::stoull(value);
            else if (field == "output-bytes") out_bytes = std::stoull(value);
        }
        key.resize(key_bytes);
        body.resize(out_bytes);
        in.read(key.data(), static_cast<std::streamsize>(key_bytes));
        in.read(body.data(), static_cast<std::streamsize>(out_bytes));
        return static_cast<bool>(in);
    }

    std::string dir_;
    std::mutex mu_;
    std::unordered_map<std::string, std::string> memory_;
};

// Token bucket keyed by backend. rate 0 disables limiting.
class RateLimiter {
public:
    explicit RateLimiter(double rate_per_minute) : rate_(rate_per_minute) {}

    void acquire(Backend backend) {
        if (rate_ <= 0.0) return;
        using clock = std::chrono::steady_clock;
        std::unique_lock lock(mu_);
        auto& b = buckets_[backend];
        auto now = clock::now();
        if (b.last.time_since_epoch().count() == 0) {
            b.last = now;
            b.tokens = 1.0; // first request passes immediately
        }
        double per_sec = rate_ / 60.0;
        b.tokens = std::min(rate_, b.tokens + per_sec * std::chrono::duration<double>(now - b.last).count());
        b.last = now;
        while (b.tokens < 1.0) {
            double wait_s = (1.0 - b.tokens) / per_sec;
            lock.unlock();
            std::this_thread::sleep_for(std::chrono::duration<double>(wait_s));
            lock.lock();
            now = clock::now();
            b.tokens = std::min(rate_, b.tokens + per_sec * std::chrono::duration<double>(now - b.last).count());
            b.last = now;
        }
        b.tokens -= 1.0;
    }

private:
    struct Bucket {
        double tokens = 0.0;
        std::chrono::steady_clock::time_point last{};
    };
    double rate_;
    std::mutex mu_;
    std::map<Backend, Bucket> buckets_;
};

// Remote transport hook. The HTTP implementation lives in gateway_http.hpp
// (http_generate); callers wire it in explicitly, tests may inject stubs.
using RemoteCallFn = std::function<std::string(const GeneratorSpec&, const std::string&)>;

class ModelGateway {
public:
    explicit ModelGateway(GatewayConfig cfg = {})
        : cfg_(std::move(cfg)), cache_(cfg_.cache_dir), limiter_(cfg_.rate_per_minute) {}

    GenerationRecord generate(const GeneratorSpec& spec, const std::string& prompt) {
        if (prompt.find_first_not_of(" \t\n\r") == std::string::npos)
            throw Error(ErrorCode::EmptyPrompt, "cannot generate from an empty prompt");

        GenerationRecord rec;
        rec.prompt = prompt;
        rec.model_id = spec.model_id;
        rec.backend = backend_name(spec.backend);

        auto t0 = std::chrono::steady_clock::now();
        std::string cached;
        if (cache_.lookup(spec, prompt, cached)) {
            rec.output = cached;
            rec.cache_hit = true;
            ++cache_hits_;
            rec.latency_ms = elapsed_ms(t0);
            return rec;
        }

        std::string output = invoke_backend(spec, prompt);
        rec.output = output;
        rec.latency_ms = elapsed_ms(t0);
        cache_.store(spec, prompt, output);
        return rec;
    }

    std::vector<GenerationRecord> generate_batch(const GeneratorSpec& spec,
                                                 const std::vector<std::string>& prompts,
                                                 int parallelism) {
        if (parallelism < 1)
            throw Error(ErrorCode::InvalidConfig, "parallelism must be >= 1");
        std::vector<GenerationRecord> out(prompts.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= prompts.size()) return;
                try {
                    out[i] = generate(spec, prompts[i]);
                } catch (const std::exception& e) {
                    out[i].prompt = prompts[i];
                    out[i].ok = false;
                    out[i].error = e.what();
                }
            }
        };
        if (parallelism == 1 || prompts.size() <= 1) {
            worker();
        } else {
            std::vector<std::thread> threads;
            int nthreads = std::min<int>(parallelism, static_cast<int>(prompts.size()));
            threads.reserve(static_cast<std::size_t>(nthreads));
            for (int t = 0; t < nthreads; ++t) threads.emplace_back(worker);
            for (auto& t : threads) t.join();
        }
        return out;
    }

    std::size_t backend_calls() const { return backend_calls_.load(); }
    std::size_t cache_hits() const { return cache_hits_.load(); }

    // Test hook: replace the remote transport.
    void set_remote_call(RemoteCallFn fn) { remote_call_ = fn; }

private:
    static double elapsed_ms(std::chrono::steady_clock::time_point t0) {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    }

    std::string invoke_backend(const GeneratorSpec& spec, const std::string& prompt) {
        if (spec.backend == Backend::Mock) {
            ++backend_calls_;
            return mock_generate(spec.lexicon, prompt);
        }
        if (!remote_call_)
            throw Error(ErrorCode::InvalidConfig,
                        "no remote transport configured for backend " +
                            std::string(backend_name(spec.backend)));
        int attempt = 0;
        for (;;) {
            limiter_.acquire(spec.backend);
            ++backend_calls_;
            try {
                return remote_call_(spec, prompt);
            } catch (const Error& e) {
                bool transient = e.code() == ErrorCode::RateLimited ||
                                 e.code() == ErrorCode::Timeout ||
                                 e.code() == ErrorCode::SolverFailure;
                if (!transient || attempt >= spec.max_retries) throw;
                int delay = cfg_.backoff_ms << attempt;
                std::this_thread::sleep_for(std::chrono::milliseconds(delay));
                ++attempt;
            }
        }
    }

    GatewayConfig cfg_;
    ResponseCache cache_;
    RateLimiter limiter_;
    RemoteCallFn remote_call_ = nullptr;
    std::atomic<std::size_t> backend_calls_{0};
    std::atomic<std::size_t> cache_hits_{0};
};

} // namespace gsmile
