#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "gsmile/error.hpp"

namespace gsmile {

using Vec = std::vector<double>;

// Token -> vector lookup with a deterministic hashed-Gaussian fallback for
// out-of-vocabulary tokens. The fallback makes the whole pipeline runnable
// with no vector file at all.
class WordVectorTable {
public:
    WordVectorTable(std::size_t dim, std::uint64_t seed = 0)
        : dim_(dim), seed_(seed) {
        if (dim == 0) throw Error(ErrorCode::InvalidConfig, "embedding dim must be > 0");
    }

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return entries_.size(); }

    void insert(const std::string& token, Vec v) {
        if (v.size() != dim_)
            throw Error(ErrorCode::InconsistentDim,
                        "vector for '" + token + "' has " + std::to_string(v.size()) +
                            " components, table dim is " + std::to_string(dim_));
        for (double x : v)
            if (!std::isfinite(x))
                throw Error(ErrorCode::MalformedLine, "non-finite component for '" + token + "'");
        entries_[token] = std::move(v);
    }

    bool contains(const std::string& token) const { return entries_.count(token) > 0; }

    // Stored vector, or the hashed fallback for unknown tokens.
    Vec lookup(const std::string& token) const {
        auto it = entries_.find(token);
        if (it != entries_.end()) return it->second;
        return fallback(token);
    }

    // Unit Gaussian direction derived from a hash of (token, seed).
    Vec fallback(const std::string& token) const {
        std::uint64_t h = fnv1a(token) ^ (seed_ * 0x9e3779b97f4a7c15ull);
        std::mt19937_64 rng(h);
        std::normal_distribution<double> gauss(0.0, 1.0);
        Vec v(dim_);
        double norm2 = 0.0;
        for (auto& x : v) {
            x = gauss(rng);
            norm2 += x * x;
        }
        double norm = std::sqrt(norm2);
        if (norm < 1e-12) { // astronomically unlikely; keep it deterministic
            v.assign(dim_, 0.0);
            v[0] = 1.0;
            return v;
        }
        for (auto& x : v) x /= norm;
        return v;
    }

    static std::uint64_t fnv1a(const std::string& s) {
        std::uint64_t h = 14695981039346656037ull;
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
        return h;
    }

private:
    std::size_t dim_;
    std::uint64_t seed_;
    std::unordered_map<std::string, Vec> entries_;
};

// GloVe-style text format: one token plus dim floats per line, whitespace
// separated. Duplicate tokens: last line wins (warning to stderr).
inline WordVectorTable load_vectors(const std::string& path, std::uint64_t fallback_seed = 0) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open vector file: " + path);

    std::size_t dim = 0;
    std::vector<std::pair<std::string, Vec>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ss(line);
        std::string token;
        ss >> token;
        Vec v;
        double x;
        while (ss >> x) v.push_back(x);
        if (!ss.eof())
            throw Error(ErrorCode::MalformedLine,
                        path + ":" + std::to_string(lineno) + ": non-numeric field");
        if (v.empty())
            throw Error(ErrorCode::MalformedLine,
                        path + ":" + std::to_string(lineno) + ": no vector components");
        if (dim == 0) dim = v.size();
        else if (v.size() != dim)
            throw Error(ErrorCode::InconsistentDim,
                        path + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(dim) + " components, got " + std::to_string(v.size()));
        rows.emplace_back(std::move(token), std::move(v));
    }
    if (rows.empty()) throw Error(ErrorCode::EmptyTable, "vector file is empty: " + path);

    WordVectorTable table(dim, fallback_seed);
    for (auto& [tok, v] : rows) {
        if (table.contains(tok))
            std::cerr << "warning: duplicate vector for '" << tok << "', keeping last\n";
        table.insert(tok, std::move(v));
    }
    return table;
}

// Normalized bag-of-words: distinct tokens as support points, term
// frequencies as weights.
struct EmbeddedDoc {
    std::vector<Vec> support;
    std::vector<double> weights;
    std::vector<std::string> source_tokens;

    Vec centroid() const {
        if (support.empty()) throw Error(ErrorCode::EmptyDocument, "centroid of empty doc");
        Vec c(support[0].size(), 0.0);
        for (std::size_t i = 0; i < support.size(); ++i)
            for (std::size_t d = 0; d < c.size(); ++d)
                c[d] += weights[i] * support[i][d];
        return c;
    }
};

inline EmbeddedDoc embed_doc(const std::vector<std::string>& tokens,
                             const WordVectorTable& table) {
    if (tokens.empty()) throw Error(ErrorCode::EmptyDocument, "no tokens to embed");

    std::map<std::string, std::size_t> counts; // ordered: deterministic support order
    for (const auto& t : tokens) counts[t]++;

    EmbeddedDoc doc;
    const double total = static_cast<double>(tokens.size());
    for (const auto& [tok, cnt] : counts) {
        doc.support.push_back(table.lookup(tok));
        doc.weights.push_back(static_cast<double>(cnt) / total);
        doc.source_tokens.push_back(tok);
    }
    return doc;
}

} // namespace gsmile
