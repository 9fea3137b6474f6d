#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "gsmile/error.hpp"

namespace gsmile {

enum class TokenKind { Word, Punctuation };

struct Token {
    std::string text;
    std::size_t index = 0;
    TokenKind kind = TokenKind::Word;
    // Whitespace preceding this token in the raw text; concatenating
    // leading_sep + text over all tokens (plus trailing_sep) reconstructs
    // the input byte for byte.
    std::string leading_sep;
};

struct TokenizerConfig {
    bool lowercase = false;
    bool perturb_punctuation = false;
    std::string placeholder = "UNKWORDZ";
};

struct TokenizedPrompt {
    std::string raw_text;
    std::vector<Token> tokens;
    std::vector<bool> perturbable; // parallel to tokens
    std::string trailing_sep;

    std::size_t perturbable_count() const {
        return static_cast<std::size_t>(
            std::count(perturbable.begin(), perturbable.end(), true));
    }

    // Indices (into tokens) of perturbable tokens, in order.
    std::vector<std::size_t> perturbable_indices() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < tokens.size(); ++i)
            if (perturbable[i]) out.push_back(i);
        return out;
    }

    bool degenerate_for_explanation() const { return perturbable_count() < 2; }

    std::vector<std::string> token_texts() const {
        std::vector<std::string> out;
        out.reserve(tokens.size());
        for (const auto& t : tokens) out.push_back(t.text);
        return out;
    }
};

struct PerturbationMask {
    std::vector<bool> bits; // one per perturbable token; true = keep
    std::uint64_t id = 0;

    std::size_t kept_count() const {
        return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), true));
    }
};

enum class EditMode { Drop, Placeholder };

struct PerturbedPrompt {
    PerturbationMask mask;
    std::string text;
};

namespace detail {

inline bool is_space_byte(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Word characters: ASCII alphanumerics, apostrophe-in-word handled as
// punctuation split, and any non-ASCII byte (keeps UTF-8 sequences whole).
inline bool is_word_byte(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'A' && c <= 'Z') ||
           (c >= 'a' && c <= 'z') || c == '_' || c >= 0x80;
}

} // namespace detail

inline TokenizedPrompt tokenize(const std::string& text, const TokenizerConfig& config = {}) {
    std::string trimmed_check = text;
    auto first = trimmed_check.find_first_not_of(" \t\n\r\f\v");
    if (first == std::string::npos)
        throw Error(ErrorCode::EmptyPrompt, "prompt is empty after trimming");

    TokenizedPrompt out;
    out.raw_text = text;

    std::size_t i = 0;
    const std::size_t n = text.size();
    std::string pending_sep;
    while (i < n) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (detail::is_space_byte(c)) {
            pending_sep.push_back(text[i]);
            ++i;
            continue;
        }
        Token tok;
        tok.leading_sep = pending_sep;
        pending_sep.clear();
        std::size_t start = i;
        if (detail::is_word_byte(c)) {
            while (i < n && detail::is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
            tok.kind = TokenKind::Word;
        } else {
            while (i < n) {
                unsigned char cc = static_cast<unsigned char>(text[i]);
                if (detail::is_space_byte(cc) || detail::is_word_byte(cc)) break;
                ++i;
            }
            tok.kind = TokenKind::Punctuation;
        }
        tok.text = text.substr(start, i - start);
        if (config.lowercase && tok.kind == TokenKind::Word) {
            for (auto& ch : tok.text)
                if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
        }
        tok.index = out.tokens.size();
        out.tokens.push_back(std::move(tok));
    }
    out.trailing_sep = pending_sep;

    bool any_word = false;
    out.perturbable.resize(out.tokens.size(), false);
    for (std::size_t t = 0; t < out.tokens.size(); ++t) {
        bool p = out.tokens[t].kind == TokenKind::Word ||
                 (config.perturb_punctuation && out.tokens[t].kind == TokenKind::Punctuation);
        out.perturbable[t] = p;
        if (out.tokens[t].kind == TokenKind::Word) any_word = true;
    }
    if (!any_word)
        throw Error(ErrorCode::EmptyPrompt, "prompt has no word tokens");
    return out;
}

namespace detail {

inline std::uint64_t mask_key(const std::vector<bool>& bits) {
    // Only used for dedupe when n <= 63; larger masks dedupe via the set of
    // bit vectors directly.
    std::uint64_t k = 0;
    for (std::size_t i = 0; i < bits.size(); ++i)
        if (bits[i]) k |= (std::uint64_t{1} << i);
    return k;
}

} // namespace detail

// Draw `count` distinct keep/remove masks over n perturbable tokens.
// Removal count k is uniform on {1..n-1}, then a uniform k-subset is removed.
// Never yields the all-keep or all-remove mask. Deterministic under seed,
// and the first m masks of a (seed, count) draw equal the (seed, m) draw.
inline std::vector<PerturbationMask> sample_masks(std::size_t n_perturbable,
                                                  std::size_t count,
                                                  std::uint64_t seed) {
    if (n_perturbable < 2)
        throw Error(ErrorCode::DegeneratePrompt,
                    "need at least 2 perturbable tokens, got " + std::to_string(n_perturbable));
    if (count < 1)
        throw Error(ErrorCode::EmptyInput, "mask count must be >= 1");

    const std::size_t n = n_perturbable;
    // Capacity 2^n - 2, saturated to avoid overflow for large n.
    std::uint64_t capacity = (n >= 63) ? UINT64_MAX
                                       : (std::uint64_t{1} << n) - 2;
    std::uint64_t target = std::min<std::uint64_t>(count, capacity);

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> k_dist(1, n - 1);

    std::set<std::vector<bool>> seen;
    std::vector<PerturbationMask> out;
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;

    std::uint64_t attempts = 0;
    const std::uint64_t max_attempts = 256 * target + 1024;
    while (out.size() < target && attempts < max_attempts) {
        ++attempts;
        std::size_t k = k_dist(rng);
        // Partial Fisher-Yates: pick k indices to remove.
        std::vector<std::size_t> pool = idx;
        std::vector<bool> bits(n, true);
        for (std::size_t j = 0; j < k; ++j) {
            std::uniform_int_distribution<std::size_t> pick(j, n - 1);
            std::swap(pool[j], pool[pick(rng)]);
            bits[pool[j]] = false;
        }
        if (seen.insert(bits).second) {
            PerturbationMask m;
            m.bits = std::move(bits);
            m.id = out.size();
            out.push_back(std::move(m));
        }
    }
    // Rejection got unlucky on a nearly exhausted space: enumerate the rest
    // in lexicographic order. Only reachable for small n.
    if (out.size() < target && n < 63) {
        for (std::uint64_t code = 1; code < capacity + 1 && out.size() < target; ++code) {
            std::vector<bool> bits(n, false);
            for (std::size_t i = 0; i < n; ++i) bits[i] = (code >> i) & 1;
            if (seen.insert(bits).second) {
                PerturbationMask m;
                m.bits = std::move(bits);
                m.id = out.size();
                out.push_back(std::move(m));
            }
        }
    }
    return out;
}

// Token texts of a string without the word-token requirement; may be empty.
inline std::vector<std::string> split_token_texts(const std::string& text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (detail::is_space_byte(c)) {
            ++i;
            continue;
        }
        std::size_t start = i;
        if (detail::is_word_byte(c)) {
            while (i < n && detail::is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
        } else {
            while (i < n) {
                unsigned char cc = static_cast<unsigned char>(text[i]);
                if (detail::is_space_byte(cc) || detail::is_word_byte(cc)) break;
                ++i;
            }
        }
        out.push_back(text.substr(start, i - start));
    }
    return out;
}

inline PerturbedPrompt apply_mask(const TokenizedPrompt& prompt,
                                  const PerturbationMask& mask,
                                  EditMode mode,
                                  const std::string& placeholder = "UNKWORDZ") {
    if (mask.bits.size() != prompt.perturbable_count())
        throw Error(ErrorCode::LengthMismatch,
                    "mask length " + std::to_string(mask.bits.size()) +
                        " != perturbable token count " +
                        std::to_string(prompt.perturbable_count()));

    std::string text;
    std::size_t bit = 0;
    for (std::size_t i = 0; i < prompt.tokens.size(); ++i) {
        const Token& tok = prompt.tokens[i];
        bool keep = true;
        bool substitute = false;
        if (prompt.perturbable[i]) {
            bool b = mask.bits[bit++];
            if (!b) {
                if (mode == EditMode::Drop) keep = false;
                else substitute = true;
            }
        }
        if (!keep) continue; // dropped token takes its leading separator with it
        text += tok.leading_sep;
        text += substitute ? placeholder : tok.text;
    }
    text += prompt.trailing_sep;
    // Collapse the leading separator that a dropped first token leaves behind.
    if (mode == EditMode::Drop) {
        auto first = text.find_first_not_of(" \t\n\r\f\v");
        auto raw_first = prompt.raw_text.find_first_not_of(" \t\n\r\f\v");
        if (first != std::string::npos && first > 0 && raw_first == 0)
            text.erase(0, first);
    }

    PerturbedPrompt out;
    out.mask = mask;
    out.text = std::move(text);
    return out;
}

} // namespace gsmile
